"""Hot numeric kernels.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
version with identical semantics.  The numba path is used when numba imports
and the environment variable ``FOCKCONC_NUMBA`` is not set to ``0``.  Both
implementations stay importable (``NUMBA_KERNELS`` / ``NUMPY_KERNELS``) so the
benchmark and the test-suite can compare them directly.
"""
import math
import os

import numpy as np

try:
    import numba
    from numba import njit, prange

    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the system TBB is too old for numba; prefer OpenMP and skip the warning
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("FOCKCONC_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _np_poly_eval(b, zr, zi):
    """Sum b[k] z**k in ascending k with Kahan compensation (real and imag)."""
    zr = np.asarray(zr, dtype=np.float64)
    zi = np.asarray(zi, dtype=np.float64)
    sr = np.zeros_like(zr)
    si = np.zeros_like(zr)
    cr = np.zeros_like(zr)
    ci = np.zeros_like(zr)
    pr = np.ones_like(zr)
    pi_ = np.zeros_like(zr)
    for k in range(b.shape[0]):
        br, bi = b[k].real, b[k].imag
        if br != 0.0 or bi != 0.0:
            tr = br * pr - bi * pi_
            ti = br * pi_ + bi * pr
            y = tr - cr
            t = sr + y
            cr = (t - sr) - y
            sr = t
            y = ti - ci
            t = si + y
            ci = (t - si) - y
            si = t
        pr, pi_ = pr * zr - pi_ * zi, pr * zi + pi_ * zr
    return sr + 1j * si


def _np_density_grid(b, xs, ys):
    zr = xs[None, :] + np.zeros((ys.shape[0], 1))
    zi = ys[:, None] + np.zeros((1, xs.shape[0]))
    f = _np_poly_eval(b, zr, zi)
    return (f.real ** 2 + f.imag ** 2) * np.exp(-np.pi * (zr * zr + zi * zi))


def _np_weighted_basis(nmax, zr, zi):
    """Rows k = 0..nmax of e_k(z) exp(-pi |z|^2 / 2) at the given points."""
    out = np.empty((nmax + 1, zr.shape[0]), dtype=np.complex128)
    cur = np.exp(-0.5 * np.pi * (zr * zr + zi * zi)).astype(np.complex128)
    z = zr + 1j * zi
    out[0] = cur
    for k in range(nmax):
        cur = cur * z * math.sqrt(math.pi / (k + 1))
        out[k + 1] = cur
    return out


def _np_boundary_edges(order, n):
    """Exposed edge count of the cell set after each insertion along ``order``."""
    inset = np.zeros(n * n, dtype=np.bool_)
    edges = np.empty(order.shape[0], dtype=np.int64)
    count = 0
    for j in range(order.shape[0]):
        c = int(order[j])
        r, q = divmod(c, n)
        nb = 0
        if r > 0 and inset[c - n]:
            nb += 1
        if r < n - 1 and inset[c + n]:
            nb += 1
        if q > 0 and inset[c - 1]:
            nb += 1
        if q < n - 1 and inset[c + 1]:
            nb += 1
        count += 4 - 2 * nb
        inset[c] = True
        edges[j] = count
    return edges


def _np_multi_eval(powers, coef, zr, zi):
    """Evaluate sum_a coef[a] prod_i z_i**powers[a, i] at points z (rows)."""
    z = zr + 1j * zi
    out = np.zeros(z.shape[0], dtype=np.complex128)
    for a in range(powers.shape[0]):
        term = np.full(z.shape[0], coef[a], dtype=np.complex128)
        for i in range(powers.shape[1]):
            p = powers[a, i]
            if p:
                term = term * z[:, i] ** p
        out += term
    return out


NUMPY_KERNELS = {
    "poly_eval": _np_poly_eval,
    "density_grid": _np_density_grid,
    "weighted_basis": _np_weighted_basis,
    "boundary_edges": _np_boundary_edges,
    "multi_eval": _np_multi_eval,
}


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _nb_poly_point(br, bi, xr, xi):
        sr = 0.0
        si = 0.0
        cr = 0.0
        ci = 0.0
        pr = 1.0
        pim = 0.0
        for k in range(br.shape[0]):
            if br[k] != 0.0 or bi[k] != 0.0:
                tr = br[k] * pr - bi[k] * pim
                ti = br[k] * pim + bi[k] * pr
                y = tr - cr
                t = sr + y
                cr = (t - sr) - y
                sr = t
                y = ti - ci
                t = si + y
                ci = (t - si) - y
                si = t
            npr = pr * xr - pim * xi
            pim = pr * xi + pim * xr
            pr = npr
        return sr, si

    @njit(cache=True, nogil=True, parallel=True)
    def _nb_poly_eval_flat(br, bi, zr, zi):
        m = zr.shape[0]
        out = np.empty(m, dtype=np.complex128)
        for j in prange(m):
            sr, si = _nb_poly_point(br, bi, zr[j], zi[j])
            out[j] = complex(sr, si)
        return out

    def _nb_poly_eval(b, zr, zi):
        zr = np.asarray(zr, dtype=np.float64)
        zi = np.asarray(zi, dtype=np.float64)
        shape = np.broadcast(zr, zi).shape
        zr = np.ascontiguousarray(np.broadcast_to(zr, shape)).ravel()
        zi = np.ascontiguousarray(np.broadcast_to(zi, shape)).ravel()
        b = np.asarray(b, dtype=np.complex128)
        out = _nb_poly_eval_flat(np.ascontiguousarray(b.real), np.ascontiguousarray(b.imag), zr, zi)
        return out.reshape(shape)

    @njit(cache=True, nogil=True, parallel=True)
    def _nb_density_rows(br, bi, xs, ys):
        ny = ys.shape[0]
        nx = xs.shape[0]
        out = np.empty((ny, nx))
        for r in prange(ny):
            y = ys[r]
            for q in range(nx):
                x = xs[q]
                sr, si = _nb_poly_point(br, bi, x, y)
                out[r, q] = (sr * sr + si * si) * math.exp(-math.pi * (x * x + y * y))
        return out

    def _nb_density_grid(b, xs, ys):
        b = np.asarray(b, dtype=np.complex128)
        return _nb_density_rows(
            np.ascontiguousarray(b.real),
            np.ascontiguousarray(b.imag),
            np.ascontiguousarray(xs, dtype=np.float64),
            np.ascontiguousarray(ys, dtype=np.float64),
        )

    @njit(cache=True, nogil=True, parallel=True)
    def _nb_weighted_basis_impl(nmax, zr, zi):
        m = zr.shape[0]
        out = np.empty((nmax + 1, m), dtype=np.complex128)
        scale = np.empty(nmax)
        for k in range(nmax):
            scale[k] = math.sqrt(math.pi / (k + 1))
        for j in prange(m):
            z = complex(zr[j], zi[j])
            cur = complex(math.exp(-0.5 * math.pi * (zr[j] * zr[j] + zi[j] * zi[j])), 0.0)
            out[0, j] = cur
            for k in range(nmax):
                cur = cur * z * scale[k]
                out[k + 1, j] = cur
        return out

    def _nb_weighted_basis(nmax, zr, zi):
        return _nb_weighted_basis_impl(
            int(nmax),
            np.ascontiguousarray(zr, dtype=np.float64),
            np.ascontiguousarray(zi, dtype=np.float64),
        )

    @njit(cache=True, nogil=True)
    def _nb_boundary_edges_impl(order, n):
        inset = np.zeros(n * n, dtype=np.bool_)
        edges = np.empty(order.shape[0], dtype=np.int64)
        count = 0
        for j in range(order.shape[0]):
            c = order[j]
            r = c // n
            q = c - r * n
            nb = 0
            if r > 0 and inset[c - n]:
                nb += 1
            if r < n - 1 and inset[c + n]:
                nb += 1
            if q > 0 and inset[c - 1]:
                nb += 1
            if q < n - 1 and inset[c + 1]:
                nb += 1
            count += 4 - 2 * nb
            inset[c] = True
            edges[j] = count
        return edges

    def _nb_boundary_edges(order, n):
        return _nb_boundary_edges_impl(np.ascontiguousarray(order, dtype=np.int64), int(n))

    @njit(cache=True, nogil=True, parallel=True)
    def _nb_multi_eval_impl(powers, cr, ci, zr, zi):
        m = zr.shape[0]
        d = zr.shape[1]
        out = np.empty(m, dtype=np.complex128)
        for j in prange(m):
            acc = complex(0.0, 0.0)
            for a in range(powers.shape[0]):
                term = complex(cr[a], ci[a])
                for i in range(d):
                    zz = complex(zr[j, i], zi[j, i])
                    for _ in range(powers[a, i]):
                        term = term * zz
                acc += term
            out[j] = acc
        return out

    def _nb_multi_eval(powers, coef, zr, zi):
        coef = np.asarray(coef, dtype=np.complex128)
        return _nb_multi_eval_impl(
            np.ascontiguousarray(powers, dtype=np.int64),
            np.ascontiguousarray(coef.real),
            np.ascontiguousarray(coef.imag),
            np.ascontiguousarray(zr, dtype=np.float64),
            np.ascontiguousarray(zi, dtype=np.float64),
        )

    NUMBA_KERNELS = {
        "poly_eval": _nb_poly_eval,
        "density_grid": _nb_density_grid,
        "weighted_basis": _nb_weighted_basis,
        "boundary_edges": _nb_boundary_edges,
        "multi_eval": _nb_multi_eval,
    }
else:  # pragma: no cover
    NUMBA_KERNELS = {}

_ACTIVE = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS

poly_eval = _ACTIVE["poly_eval"]
density_grid = _ACTIVE["density_grid"]
weighted_basis = _ACTIVE["weighted_basis"]
boundary_edges = _ACTIVE["boundary_edges"]
multi_eval = _ACTIVE["multi_eval"]


def backend():
    """Name of the active kernel backend."""
    return "numba" if USE_NUMBA else "numpy"
