"""Acceptance criteria, each asserted at its stated tolerance and runtime budget."""
import math
import time

import numpy as np
import pytest

from fockconc import concentration as C
from fockconc import geometry as Geo
from fockconc import highdim as H
from fockconc import stability as S
from fockconc import transforms as Tr
from fockconc.fock import make_fock, random_polynomial
from fockconc.suites import hermite_battery, kern_battery

BATTERY_SEED = 7


@pytest.fixture(scope="module")
def battery():
    return kern_battery(np.random.default_rng(BATTERY_SEED), 50)


@pytest.fixture(scope="module")
def battery_profiles(battery):
    return [C.profile(C.sample_density(F, C.default_grid(F, n=512))) for F in battery]


def test_equality_case(record):
    t0 = time.perf_counter()
    F = make_fock(1, [1.0])
    spec = C.GridSpec(C.default_radius(0), 1024)
    grid = C.sample_density(F, spec)
    worst_d = 0.0
    for s in (0.5, 1.0, 2.0):
        rep = C.deficit(F, C.disc_mask(spec, area=s), grid)
        worst_d = max(worst_d, abs(rep.deficit))
    dist = S.gaussian_distance(F)
    dt = time.perf_counter() - t0
    ok = worst_d <= 2e-3 and dist.closed <= 1e-6 and dist.direct <= 1e-6 and dt <= 10
    record(1, "equality case", ok, f"max|delta|={worst_d:.2e}, dist={dist.closed:.1e}/{dist.direct:.1e}, {dt:.1f}s")
    assert ok


def _fk_trial(i):
    rng = np.random.default_rng([11, i])
    F = random_polynomial(rng, int(rng.integers(0, 9)))
    spec = C.GridSpec(C.default_radius(8), 256)
    m = C.random_mask(spec, rng)
    r = C.deficit(F, m, C.sample_density(F, spec))
    return r.deficit + r.quad_err


def test_fk_never_violated(record):
    t0 = time.perf_counter()
    vals = np.array([_fk_trial(i) for i in range(1000)])
    dt = time.perf_counter() - t0
    ok = bool(np.all(vals >= 0)) and dt <= 300
    record(2, "FK never violated", ok, f"min(delta+err)={vals.min():.3e} over 1000 trials, {dt:.1f}s")
    assert ok


def test_kern_closed_form(record, battery):
    t0 = time.perf_counter()
    worst = 0.0
    for F in battery:
        d = S.gaussian_distance(F)
        worst = max(worst, abs(d.closed - d.direct) / max(d.closed, 1e-6))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-4 and dt <= 120
    record(3, "closed-form Gaussian distance", ok, f"max rel err {worst:.2e} on 50 functions, {dt:.1f}s")
    assert ok


def test_rearrangement(record, battery, battery_profiles):
    ratio = conv = math.inf
    bad_cross = 0
    for F, p in zip(battery, battery_profiles):
        ratio = min(ratio, C.ratio_margin(p))
        conv = min(conv, C.convexity_G(p).min_margin)
        if p.T_unit < 1 - 1e-6 and C.crossing_count(p, F) != 1:
            bad_cross += 1
    ok = ratio >= 0 and conv >= 0 and bad_cross == 0
    record(4, "rearrangement inequalities", ok, f"ratio margin {ratio:.2e}, convexity margin {conv:.2e}, crossing failures {bad_cross}")
    assert ok


def test_sandwich(record, battery_profiles):
    fails = 0
    ratios = []
    for p in battery_profiles:
        for s0 in (0.5, 1.0, 2.0):
            b = C.lemma_bounds(p, s0)
            fails += not b.holds
            if math.isfinite(b.reinforced_ratio):
                ratios.append(b.reinforced_ratio)
    K = max(ratios)
    ok = fails == 0 and math.isfinite(K)
    record(5, "sandwich bounds", ok, f"{fails} failures in {3 * len(battery_profiles)} cases, reinforced constant {K:.4g}")
    assert ok


def test_v_coefficients(record):
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(2, 13):
        for s in (0.1, 0.5, 1.0, 2.0, 5.0, 10.0):
            a, b = S.v_coefficient(k, s), S.v_coefficient_oracle(k, s)
            worst = max(worst, abs(a - b) / abs(b))
    v21 = abs(S.v_coefficient(2, 1.0) + math.exp(-1.0)) / math.exp(-1.0)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and v21 <= 1e-15 and dt <= 10
    record(6, "V_k closed form", ok, f"max rel err {worst:.2e}, V_2(1) rel err {v21:.1e}, {dt:.2f}s")
    assert ok


def test_negdef_witness(record):
    rng = np.random.default_rng(3)
    eq = max(abs(S.second_variation(make_fock(1, [0, 0, 1.0]), s) + s * math.exp(-s)) for s in (0.1, 0.5, 1, 2, 5, 10))
    strict = True
    for _ in range(200):
        N = int(rng.integers(3, 13))
        a = rng.standard_normal(N + 1) + 1j * rng.standard_normal(N + 1)
        a[:2] = 0
        a[3:] *= rng.uniform(0.01, 1)
        s = float(rng.uniform(0.05, 10))
        G = make_fock(1, a)
        strict &= S.second_variation(G, s) < -s * math.exp(-s) * G.norm_sq()
    ok = eq <= 1e-12 and strict
    record(7, "negative definiteness and witness", ok, f"witness err {eq:.1e}, strict on 200 directions: {strict}")
    assert ok


@pytest.fixture(scope="module")
def sweeps():
    t0 = time.perf_counter()
    eps = [0.05, 0.035, 0.025, 0.0175]
    out = {s: S.sharpness_sweep(s, eps) for s in (1.0, 2.0)}
    return out, time.perf_counter() - t0


def test_sharpness_coefficient(record, sweeps):
    res, dt = sweeps
    rel = {s: abs(r.limit - r.target) / r.target for s, r in res.items()}
    ok = all(v <= 0.1 for v in rel.values()) and dt <= 180
    detail = ", ".join(f"s={s:g}: {r.limit:.6g} vs {r.target:.6g}" for s, r in res.items())
    record(8, "sharpness coefficient", ok, f"{detail}, {dt:.1f}s")
    assert ok


def test_exponent_sharpness(record, sweeps):
    res, _ = sweeps
    ok = all(abs(r.slope - 0.5) <= 0.05 for r in res.values())
    record(9, "exponent sharpness", ok, ", ".join(f"s={s:g}: slope {r.slope:.5f}" for s, r in res.items()))
    assert ok


def test_localization(record):
    t0 = time.perf_counter()
    spec = C.GridSpec(1.0, 1024)
    disc = C.disc_mask(spec, area=1.0)
    pd = S.top_eigenpair(S.localization_matrix(disc, 24), disc)
    lam_err = abs(pd.value - C.fk_bound(1.0))
    outside = float(np.sum(np.abs(pd.function.dense()[1:]) ** 2))

    rng = np.random.default_rng(5)
    rspec = C.GridSpec(4.0, 256)
    worst = -math.inf
    for _ in range(100):
        m = C.random_mask(rspec, rng)
        p = S.top_eigenpair(S.localization_matrix(m, 24), m)
        worst = max(worst, p.value - C.fk_bound(m.measure) - p.err)

    ell = C.ellipse_mask(spec, 0j, 1.4 / math.sqrt(math.pi), 1 / (1.4 * math.sqrt(math.pi)))
    pe = S.top_eigenpair(S.localization_matrix(ell, 24), ell)
    # compare against the disc value at the ellipse's own raster measure
    gap = min(C.fk_bound(ell.measure), pd.value - pd.err) - pe.value - pe.err
    dt = time.perf_counter() - t0
    ok = lam_err <= 1e-3 and outside < 1e-4 and worst <= 0 and gap > 0 and dt <= 180
    record(
        10,
        "localization spectra",
        ok,
        f"|lambda-(1-1/e)|={lam_err:.1e}, outside mass {outside:.1e}, random margin {worst:.2e}, ellipse gap {gap:.2e}, {dt:.1f}s",
    )
    assert ok


def test_bargmann_identity(record):
    g = np.linspace(-1.5, 1.5, 7)
    pts = [(x, w) for x in g for w in g]
    worst = max(Tr.bargmann_identity_residual(Tr.sample(f), pts) for _, f in hermite_battery(np.random.default_rng(1)))
    ok = worst <= 1e-6
    record(11, "Bargmann identity", ok, f"max residual {worst:.2e}")
    assert ok


def test_higher_dimension(record):
    t0 = time.perf_counter()
    exact = 1 - 3 * math.exp(-2)
    e1 = abs(H.fk_bound_d(2.0, 2) - exact)
    e2 = abs(H.fk_bound_d_quad(2.0, 2) - exact)
    F = make_fock(2, {(0, 0): 1.0})
    r = H.deficit_d(F, H.ball([0j, 0j], measure=1.0), H.MCSpec(1_000_000, seed=0), control_variate=False)
    dt = time.perf_counter() - t0
    ok = e1 <= 1e-10 and e2 <= 1e-10 and abs(r.deficit) <= 3 * r.stderr and dt <= 120
    record(12, "higher dimension", ok, f"bound err {e1:.1e}/{e2:.1e}, delta={r.deficit:.2e} +- {r.stderr:.1e}, {dt:.1f}s")
    assert ok


def test_geometry_regime(record):
    fails = []
    for eps in (0.05, 0.03, 0.01):
        F = S.perturbed_gaussian(eps).normalized()
        mx = C.global_max(F)
        for s in (0.25, 0.5, 1.0, 1.5, 2.0):
            g, _ = S.superlevel_polar(F, s, mx.argmax, m=128)
            sc = Geo.shape_checks(g)
            if not (sc.star_shaped and sc.convex):
                fails.append((eps, s))
    spec = C.GridSpec(4.0, 512)
    disc_ok = True
    for area in (0.5, 1.0, 2.0):
        a = Geo.fraenkel_asymmetry(C.disc_mask(spec, 0.4 + 0.1j, area=area))
        disc_ok &= a.A <= a.slack
    two = C.disc_mask(spec, -2.5 + 0j, area=1.0) | C.disc_mask(spec, 2.5 + 0j, area=1.0)
    at = Geo.fraenkel_asymmetry(two)
    far_ok = abs(at.A - 1.0) <= at.slack
    ok = not fails and disc_ok and far_ok
    record(13, "geometry regime", ok, f"shape failures {fails}, discs within slack {disc_ok}, two discs A={at.A:.4f} (slack {at.slack:.3f})")
    assert ok
