"""Distances to the Gaussian class, second variation, sharpness and localization spectra."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gammaln

from . import kernels
from .concentration import (
    SENTINEL,
    DensityGrid,
    RegionMask,
    deficit,
    default_grid,
    density_laplacian,
    fk_bound,
    global_max,
    sample_density,
)
from .fock import FockFunction, evaluate, kernel_degree, kernel_function, make_fock, pad_to
from .geometry import fraenkel_asymmetry, polar_mass, trace_level_set

# ---------------------------------------------------------------------------
# distance to the Gaussian class
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianDistance:
    closed: float  # 2(1 - sqrt T)
    direct: float  # min over z0 of |F/|F| - c F_z0|^2
    T: float
    argmax: complex
    converged: bool


def _kernel_gap(Fn: FockFunction, z0: complex) -> float:
    """|Fn - c F_z0|^2 with the optimal unimodular c, in coefficient space."""
    deg = max(kernel_degree(z0, 1e-16), Fn.max_degree)
    K = kernel_function(z0, deg)
    f0 = complex(evaluate(Fn, z0))
    c = f0 / abs(f0) if f0 != 0 else 1.0
    diff = pad_to(Fn, deg) - c * K.dense()
    return float(np.sum(diff.real ** 2 + diff.imag ** 2))


def _compass(obj, z: complex, step: float, tol: float, max_eval: int = 4000):
    v = obj(z)
    n = 1
    dirs = np.exp(1j * np.pi / 4 * np.arange(8))
    while step > tol and n < max_eval:
        moved = False
        for d in dirs:
            c = z + step * d
            cv = obj(c)
            n += 1
            if cv < v:
                z, v, moved = c, cv, True
                break
        if not moved:
            step *= 0.5
    return z, v, step <= tol


def gaussian_distance(F: FockFunction, grid: DensityGrid | None = None) -> GaussianDistance:
    """Closed form 2(1 - sqrt T) and a direct minimization over kernel elements."""
    nsq = F.norm_sq()
    if nsq <= 0:
        raise ValueError("distance of the zero function is undefined")
    Fn = F.normalized()
    if grid is None:
        grid = sample_density(Fn, default_grid(Fn, n=256))
    elif abs(grid.norm_sq - 1.0) > 1e-12:
        grid = DensityGrid(grid.spec, grid.values / grid.norm_sq, grid.tail_mass / grid.norm_sq, 1.0, Fn)
    mx = global_max(Fn, grid)
    T = min(mx.T, 1.0)
    closed = 2.0 * (1.0 - math.sqrt(T))
    # independent seed: the raw grid maximum, not the refined argmax
    seed = complex(grid.spec.points().ravel()[int(np.argmax(grid.values))])
    z, direct, ok = _compass(lambda p: _kernel_gap(Fn, p), seed, step=grid.spec.h, tol=1e-9)
    if not ok:
        warnings.warn("direct distance search did not converge; using the grid argmax", RuntimeWarning, stacklevel=2)
    return GaussianDistance(closed, direct, T, mx.argmax, ok and mx.converged)


@dataclass(frozen=True)
class StabilityReport:
    T: float
    distance_sq: float
    distance_sq_direct: float
    deficit: float
    quad_err: float
    area: float
    ratio: float  # distance / sqrt(e^|Omega| delta)
    asymmetry: float
    asymmetry_ratio: float  # A / sqrt(delta)

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "distance_sq": self.distance_sq,
            "distance_sq_direct": self.distance_sq_direct,
            "deficit": self.deficit,
            "quad_err": self.quad_err,
            "area": self.area,
            "ratio": self.ratio,
            "asymmetry": self.asymmetry,
            "asymmetry_ratio": self.asymmetry_ratio,
        }

    def to_json(self) -> str:
        return json.dumps({k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in self.to_dict().items()}, indent=2)


def stability_report(F: FockFunction, mask: RegionMask, grid: DensityGrid | None = None) -> StabilityReport:
    if grid is None:
        grid = sample_density(F, mask.spec)
    rep = deficit(F, mask, grid)
    dist = gaussian_distance(F, grid)
    asym = fraenkel_asymmetry(mask)
    d = rep.deficit
    if d <= rep.quad_err:
        ratio = arat = SENTINEL
    else:
        ratio = math.sqrt(dist.closed) / math.sqrt(math.exp(rep.area) * d)
        arat = asym.A / math.sqrt(d)
    return StabilityReport(dist.T, dist.closed, dist.direct, d, rep.quad_err, rep.area, ratio, asym.A, arat)


# ---------------------------------------------------------------------------
# second variation
# ---------------------------------------------------------------------------


def v_coefficient(k: int, s: float) -> float:
    """V_k(s) = -e^{-s} sum_{j=1}^{k-1} s^j / j!."""
    if k < 2:
        raise ValueError(f"V_k is defined for k >= 2, got {k}")
    if s < 0:
        raise ValueError("s must be nonnegative")
    term, acc = 1.0, 0.0
    for j in range(1, k):
        term *= s / j
        acc += term
    return -math.exp(-s) * acc


def v_coefficient_oracle(k: int, s: float, nodes: int = 120) -> float:
    """V_k(s) from its defining integrals over the disc of area s.

    (pi^k/k!) int_B |z|^{2k} e^{-pi|z|^2} - int_B e^{-pi|z|^2} + e^{-s} s^k/k!,
    with both integrals done by Gauss-Legendre quadrature in the radius.
    """
    if k < 2:
        raise ValueError(f"V_k is defined for k >= 2, got {k}")
    rho = math.sqrt(s / math.pi)
    x, w = leggauss(nodes)
    r = 0.5 * rho * (x + 1.0)
    w = 0.5 * rho * w
    g = np.exp(-math.pi * r * r) * 2.0 * math.pi * r
    logc = k * math.log(math.pi) - gammaln(k + 1)
    t1 = float(np.sum(w * g * np.exp(logc + 2 * k * np.log(np.where(r > 0, r, 1e-300)))))
    t2 = float(np.sum(w * g))
    t3 = math.exp(-s + k * math.log(s) - gammaln(k + 1)) if s > 0 else 0.0
    return t1 - t2 + t3


def second_variation(G: FockFunction, s: float, vfunc=v_coefficient) -> float:
    """(1/2) d^2 K[1](G, G) = sum_{k>=2} |a_k|^2 V_k(s); G must have a_0 = a_1 = 0."""
    if G.dim != 1:
        raise ValueError("second variation is implemented for dim=1")
    a = G.dense()
    low = np.abs(a[:2]) if a.shape[0] >= 2 else np.abs(a)
    if np.any(low > 1e-12):
        raise ValueError("G must be orthogonal to e_0 and e_1")
    return float(sum(abs(a[k]) ** 2 * vfunc(k, s) for k in range(2, a.shape[0])))


# ---------------------------------------------------------------------------
# sharpness family 1 + eps z^2
# ---------------------------------------------------------------------------


def perturbed_gaussian(eps: float) -> FockFunction:
    """1 + eps z^2 in the normalized basis (z^2 = (sqrt 2 / pi) e_2)."""
    return make_fock(1, [1.0, 0.0, eps * math.sqrt(2.0) / math.pi])


@dataclass(frozen=True)
class SharpnessRow:
    eps: float
    s: float
    deficit: float
    distance: float
    ratio_deficit: float  # deficit (1 - e^{-s}) / eps^2
    ratio_distance: float  # distance / eps
    err: float  # quadrature error estimate of the deficit
    flagged: bool


@dataclass(frozen=True)
class SharpnessResult:
    rows: list
    limit: float
    target: float
    slope: float  # d log(distance) / d log(deficit)

    def csv_rows(self):
        out = [("eps", "s", "deficit", "distance", "ratio_deficit", "ratio_distance")]
        for r in self.rows:
            out.append(tuple(f"{v:.17g}" for v in (r.eps, r.s, r.deficit, r.distance, r.ratio_deficit, r.ratio_distance)))
        s = self.rows[0].s if self.rows else float("nan")
        out.append(("0", f"{s:.17g}", "", "", f"{self.limit:.17g}", ""))
        return out


def superlevel_polar(F: FockFunction, s: float, center: complex, m: int = 256, nodes: int = 48):
    """Level set of u_F enclosing area s as a polar graph, plus the enclosed mass."""
    T = float(abs(complex(evaluate(F, center))) ** 2 * math.exp(-math.pi * abs(center) ** 2))
    rmax = 2.0 * math.sqrt(s / math.pi) + 2.0
    lo, hi = 0.0, T
    g = None
    for _ in range(200):
        t = 0.5 * (lo + hi)
        g = trace_level_set(F, t, center, m, rmax=rmax, samples=512, tol=1e-14)
        a = g.area()
        if abs(a - s) <= 1e-13 * s or hi - lo <= 1e-16 * T:
            break
        if a > s:
            lo = t
        else:
            hi = t
    return g, polar_mass(F, g, nodes)


def sharpness_row(eps: float, s: float, m: int = 256) -> SharpnessRow:
    F = perturbed_gaussian(eps).normalized()
    mx = global_max(F)
    g, mass = superlevel_polar(F, s, mx.argmax, m=m)
    _, mass2 = superlevel_polar(F, s, mx.argmax, m=2 * m, nodes=96)
    area = g.area()
    bound = fk_bound(area)
    d = 1.0 - mass / bound
    err = abs(mass2 - mass) / bound + 1e-15
    dist = math.sqrt(2.0 * (1.0 - math.sqrt(min(mx.T, 1.0))))
    flagged = err > 1e-3 * abs(d) or not mx.converged
    return SharpnessRow(eps, s, d, dist, d * -math.expm1(-s) / eps ** 2, dist / eps, err, flagged)


def sharpness_target(s: float) -> float:
    return 2.0 * s * math.exp(-s) / math.pi ** 2


def sharpness_sweep(s: float, eps_list, m: int = 256, workers: int | None = None) -> SharpnessResult:
    """Deficits of 1 + eps z^2 on its own super-level sets and the eps -> 0 limit.

    The ratio deficit (1 - e^{-s}) / eps^2 is even in eps, so it is fitted as
    a + b eps^2 by least squares over the unflagged rows; a is the limit.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ValueError("empty eps list")
    if any(not (0 < e <= 0.1) for e in eps_list):
        raise ValueError("eps values must lie in (0, 0.1]")
    if not (0 < s <= 3):
        raise ValueError("s must lie in (0, 3]")
    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(lambda e: sharpness_row(e, s, m), eps_list))
    else:
        rows = [sharpness_row(e, s, m) for e in eps_list]
    good = [r for r in rows if not r.flagged]
    if len(good) >= 2:
        e2 = np.array([r.eps ** 2 for r in good])
        q = np.array([r.ratio_deficit for r in good])
        A = np.vstack([np.ones_like(e2), e2]).T
        limit = float(np.linalg.lstsq(A, q, rcond=None)[0][0])
    elif good:
        limit = good[0].ratio_deficit
    else:
        limit = SENTINEL
    if len(good) >= 2:
        slope = float(np.polyfit(np.log([r.deficit for r in good]), np.log([r.distance for r in good]), 1)[0])
    else:
        slope = SENTINEL
    return SharpnessResult(rows, limit, sharpness_target(s), slope)


# ---------------------------------------------------------------------------
# localization operator
# ---------------------------------------------------------------------------


def localization_matrix(mask: RegionMask, N: int) -> np.ndarray:
    """M_jk = int_mask e_j conj(e_k) e^{-pi|z|^2} by the midpoint rule, symmetrized."""
    if not (0 <= N <= 64):
        raise ValueError("N must lie in [0, 64]")
    if mask.count == 0:
        raise ValueError("localization on an empty region is undefined")
    z = mask.spec.points()[mask.cells]
    E = kernels.weighted_basis(N, np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag))
    M = mask.spec.cell_area * (E @ E.conj().T)
    return 0.5 * (M + M.conj().T)


@dataclass(frozen=True)
class Eigenpair:
    value: float
    function: FockFunction
    converged: bool
    multiplicity: int  # dimension of the near-degenerate top eigenspace (1 if converged)
    err: float  # quadrature error estimate of the value


def top_eigenpair(M: np.ndarray, mask: RegionMask | None = None, tol: float = 1e-10, max_iter: int = 20000) -> Eigenpair:
    """Largest eigenvalue of M and its eigenfunction by power iteration."""
    n = M.shape[0]
    v = np.ones(n, dtype=np.complex128) / math.sqrt(n)
    v[int(np.argmax(np.real(np.diag(M))))] += 1.0
    v /= np.linalg.norm(v)
    lam = 0.0
    ok = False
    for _ in range(max_iter):
        w = M @ v
        new = float(np.real(np.vdot(v, w)))
        res = np.linalg.norm(w - new * v)
        nw = np.linalg.norm(w)
        if nw == 0:
            break
        v = w / nw
        if res <= tol * max(abs(new), 1e-300) and abs(new - lam) <= tol * max(abs(new), 1e-300):
            lam, ok = new, True
            break
        lam = new
    mult = 1
    if not ok:
        ev = np.linalg.eigvalsh(M)
        mult = int(np.count_nonzero(ev >= ev[-1] * (1 - 1e-6)))
        warnings.warn(f"power iteration stagnated; top eigenspace dimension ~{mult}", RuntimeWarning, stacklevel=2)
    c = np.conj(v)
    j = int(np.argmax(np.abs(c)))
    c *= abs(c[j]) / c[j]
    f = make_fock(1, c / np.linalg.norm(c))
    err = 0.0
    if mask is not None:
        z = mask.spec.points()[mask.cells]
        h = mask.spec.h
        err = float(mask.spec.cell_area * h * h / 24.0 * np.sum(np.abs(density_laplacian(f, z)))) + 1e-12
    return Eigenpair(lam, f, ok, mult, err)


def eigen_stability_ratio(pair: Eigenpair, area: float) -> float:
    """distance(f_Omega, Gaussians) / sqrt(e^{|Omega|} (1 - lambda_1/(1 - e^{-|Omega|})))."""
    d = 1.0 - pair.value / fk_bound(area)
    if d <= 0:
        return SENTINEL
    dist = gaussian_distance(pair.function)
    return math.sqrt(dist.closed) / math.sqrt(math.exp(area) * d)


__all__ = [
    "GaussianDistance",
    "StabilityReport",
    "SharpnessRow",
    "SharpnessResult",
    "Eigenpair",
    "gaussian_distance",
    "stability_report",
    "v_coefficient",
    "v_coefficient_oracle",
    "second_variation",
    "perturbed_gaussian",
    "superlevel_polar",
    "sharpness_row",
    "sharpness_target",
    "sharpness_sweep",
    "localization_matrix",
    "top_eigenpair",
    "eigen_stability_ratio",
]
