import math

import numpy as np
import pytest
from scipy import integrate

from fockconc import transforms as Tr
from fockconc.fock import evaluate, norm


def test_hermite_functions_orthonormal():
    t = np.linspace(-8, 8, 40001)
    h = Tr.hermite_functions(10, t)
    G = integrate.trapezoid(h[:, None, :] * h[None, :, :], t, axis=2)
    assert np.max(np.abs(G - np.eye(11))) < 1e-10


def test_h0_is_gaussian_window():
    t = np.linspace(-3, 3, 101)
    assert np.allclose(Tr.hermite_function(0, t), Tr.gaussian_window(t), atol=0, rtol=1e-15)


def test_hermite_expand_recovers_single_mode():
    f = Tr.sample(lambda t: Tr.hermite_function(3, t))
    e = Tr.hermite_expand(f, 12)
    target = np.zeros(13)
    target[3] = 1
    assert np.max(np.abs(e.coeffs - target)) < 1e-12


def test_indicator_coefficients_against_adaptive_quadrature():
    # trapezoid-sampled indicator of [-1, 1] with the half value on the jumps
    t = np.linspace(-8, 8, 16001)
    v = (np.abs(t) < 1).astype(float)
    v[np.isclose(np.abs(t), 1.0)] = 0.5
    c = 1 / math.sqrt(2)
    e = Tr.hermite_expand(Tr.SampledSignal(t, c * v, "trapezoid"), 12)
    oracle = [c * integrate.quad(lambda x: Tr.hermite_function(k, x), -1, 1, epsabs=1e-12, limit=200)[0] for k in range(13)]
    assert np.max(np.abs(e.coeffs - np.array(oracle))) < 1e-6


def test_bargmann_preserves_norm(rng):
    c = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    F = Tr.bargmann(Tr.HermiteExpansion(c, 0.0))
    assert abs(norm(F) - np.linalg.norm(c)) < 1e-13


def test_bargmann_of_h0_is_constant():
    F = Tr.bargmann(Tr.hermite_expand(Tr.sample(lambda t: Tr.hermite_function(0, t)), 8))
    assert abs(evaluate(F, 0.7 - 0.2j) - 1) < 1e-12


def test_stft_of_window_against_dense_trapezoid():
    f = Tr.sample(Tr.gaussian_window)
    got = abs(Tr.stft_gaussian(f, 1.0, 0.0))
    t = np.linspace(-10, 10, 100001)
    oracle = integrate.trapezoid(Tr.gaussian_window(t) * Tr.gaussian_window(1.0 - t), t)
    assert abs(got - oracle) < 1e-10
    assert abs(got - math.exp(-math.pi / 2)) < 1e-12


def test_stft_of_window_is_radial():
    f = Tr.sample(Tr.gaussian_window)
    r = 0.9
    vals = [abs(Tr.stft_gaussian(f, r * math.cos(a), r * math.sin(a))) for a in np.arange(4) * math.pi / 4]
    assert max(vals) - min(vals) < 1e-8


def test_bargmann_identity_residual_small(rng):
    c = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    f = Tr.sample(lambda t: c @ Tr.hermite_functions(5, t))
    pts = rng.uniform(-1.5, 1.5, (30, 2))
    assert Tr.bargmann_identity_residual(f, pts) < 1e-10


def test_stft_rejects_non_decaying_signal():
    t = np.linspace(-2, 2, 200)
    f = Tr.SampledSignal(t, np.ones_like(t), "trapezoid")
    with pytest.raises(ValueError, match="decay"):
        Tr.stft_gaussian(f, 0.0, 0.0)


def test_expand_rejects_too_few_nodes():
    f = Tr.sample(Tr.gaussian_window, Tr.gauss_hermite_nodes(21))
    with pytest.raises(ValueError, match="nodes"):
        Tr.hermite_expand(f, 24)


def test_identity_rejects_truncated_signal():
    f = Tr.sample(lambda t: Tr.hermite_function(30, t))
    with pytest.raises(ValueError, match="tail"):
        Tr.bargmann_identity_residual(f, [(0.0, 0.0)], nmax=30)


@pytest.mark.parametrize(
    "nodes, values, rule, msg",
    [
        (np.arange(5.0), np.zeros(5), "trapezoid", "at least 8"),
        (np.arange(10.0)[::-1], np.zeros(10), "trapezoid", "increasing"),
        (np.arange(10.0), np.zeros(10), "simpson", "unknown"),
        (np.arange(10.0), np.full(10, np.nan), "trapezoid", "non-finite"),
        (np.arange(10.0), np.zeros(10), "gauss-hermite", "symmetric"),
    ],
)
def test_sampled_signal_validation(nodes, values, rule, msg):
    with pytest.raises(ValueError, match=msg):
        Tr.SampledSignal(nodes, values, rule)


def test_signal_csv_round_trip(tmp_path):
    f = Tr.sample(lambda t: Tr.hermite_function(2, t) * (1 + 0.5j))
    p = tmp_path / "s.csv"
    Tr.write_signal_csv(f, p)
    g = Tr.read_signal_csv(p)
    assert g.rule == "gauss-hermite"
    assert np.array_equal(f.nodes, g.nodes) and np.array_equal(f.values, g.values)


def test_signal_csv_rejects_bad_rows(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,re,im\n0,1\n")
    with pytest.raises(ValueError):
        Tr.read_signal_csv(p)
