import os
import subprocess
import sys

import numpy as np
import pytest

from fockconc import kernels as K
from fockconc.fock import basis_scale, multi_indices

pytestmark = pytest.mark.skipif(not K.NUMBA_KERNELS, reason="numba not installed")


def _pair(name):
    return K.NUMPY_KERNELS[name], K.NUMBA_KERNELS[name]


def test_poly_eval_parity(rng):
    b = rng.standard_normal(15) + 1j * rng.standard_normal(15)
    z = rng.uniform(-3, 3, (7, 9)) + 1j * rng.uniform(-3, 3, (7, 9))
    a, c = (f(b, z.real, z.imag) for f in _pair("poly_eval"))
    assert a.shape == c.shape == z.shape
    assert np.allclose(a, c, rtol=1e-13, atol=0)
    # scalar input and the direct power-series oracle
    z0 = 0.4 - 1.1j
    ref = np.sum(b * z0 ** np.arange(15))
    for f in _pair("poly_eval"):
        assert abs(complex(f(b, np.float64(z0.real), np.float64(z0.imag))) - ref) < 1e-12


def test_density_grid_parity(rng):
    b = rng.standard_normal(9) + 1j * rng.standard_normal(9)
    xs, ys = np.linspace(-3, 3, 40), np.linspace(-2, 2.5, 33)
    a, c = (f(b, xs, ys) for f in _pair("density_grid"))
    assert a.shape == (33, 40)
    assert np.allclose(a, c, rtol=1e-12, atol=1e-300)
    X, Y = np.meshgrid(xs, ys)
    Z = X + 1j * Y
    ref = np.abs(np.polyval(b[::-1], Z)) ** 2 * np.exp(-np.pi * np.abs(Z) ** 2)
    assert np.allclose(a, ref, rtol=1e-11)


def test_weighted_basis_parity(rng):
    z = rng.uniform(-2, 2, 50) + 1j * rng.uniform(-2, 2, 50)
    a, c = (f(12, z.real, z.imag) for f in _pair("weighted_basis"))
    assert np.allclose(a, c, rtol=1e-12, atol=1e-300)
    k = np.arange(13)[:, None]
    ref = basis_scale(k)[:, None] * z[None, :] ** k * np.exp(-np.pi * np.abs(z) ** 2 / 2)
    assert np.allclose(a, ref, rtol=1e-11)


def test_boundary_edges_parity(rng):
    n = 16
    order = rng.permutation(n * n).astype(np.int64)
    a, c = (f(order, n) for f in _pair("boundary_edges"))
    assert np.array_equal(a, c)
    # brute force: exposed edges of the first k+1 cells
    for k in (0, 5, 100, n * n - 1):
        cells = np.zeros((n, n), bool)
        cells.ravel()[order[: k + 1]] = True
        p = np.pad(cells, 1)
        exposed = sum(np.count_nonzero(cells & ~np.roll(p, s, axis=ax)[1:-1, 1:-1]) for ax in (0, 1) for s in (1, -1))
        assert a[k] == exposed


def test_multi_eval_parity(rng):
    idx = multi_indices(2, 4)
    coef = rng.standard_normal(idx.shape[0]) + 1j * rng.standard_normal(idx.shape[0])
    z = rng.uniform(-1, 1, (30, 2)) + 1j * rng.uniform(-1, 1, (30, 2))
    a, c = (f(idx, coef, z.real, z.imag) for f in _pair("multi_eval"))
    ref = np.array([np.sum(coef * np.prod(p[None, :] ** idx, axis=1)) for p in z])
    assert np.allclose(a, c, rtol=1e-12) and np.allclose(a, ref, rtol=1e-12)


@pytest.mark.parametrize("flag, expected", [("0", "numpy"), ("1", "numba")])
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, FOCKCONC_NUMBA=flag)
    r = subprocess.run(
        [sys.executable, "-c", "from fockconc import kernels; print(kernels.backend())"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert r.stdout.strip() == expected
