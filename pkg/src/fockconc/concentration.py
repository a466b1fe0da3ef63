"""Density grids, rearrangements and deficits in one complex dimension.

The plane is rasterized into square cells.  A rasterized region is a genuine
measurable set (a union of cells), so the concentration inequality applies to
it without discretization slack; only the quadrature of ``u`` over each cell
carries error.  Cell masses use the midpoint rule with the analytic
``h^2/24 * Laplacian`` correction, which makes them fourth-order accurate.

Quantities tied to level sets (``u*``, ``mu``, ``I``) are computed from the
sorted cell values and inherit a one-cell slack: the rasterized super-level
set differs from the true one on a band of boundary cells whose area is
``cell_area * exposed_edges``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.special import gammaincc

from . import kernels
from .fock import FockFunction, derivatives, evaluate

MIN_CELLS = 64
TAIL_REL_TOL = 1e-6
DEGENERATE_T = 1e-6
SENTINEL = float("nan")
TRUST_FLOOR = 1e-12  # profile values below this (relative to the norm) are not trusted


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Square window ``[-R, R]^2 + center`` split into ``n x n`` cells.

    ``values[iy, ix]`` holds the cell centred at
    ``(xs[ix], ys[iy])``; rows run along the imaginary axis.
    """

    R: float
    n: int
    center: complex = 0j

    def __post_init__(self):
        if not (self.R > 0 and math.isfinite(self.R)):
            raise ValueError(f"grid half-width must be positive, got {self.R}")
        if int(self.n) != self.n or self.n < MIN_CELLS:
            raise ValueError(f"grid resolution must be an integer >= {MIN_CELLS}, got {self.n}")
        object.__setattr__(self, "R", float(self.R))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "center", complex(self.center))

    @property
    def h(self) -> float:
        return 2.0 * self.R / self.n

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @property
    def area(self) -> float:
        return 4.0 * self.R * self.R

    @property
    def xs(self) -> np.ndarray:
        return -self.R + self.h * (np.arange(self.n) + 0.5) + self.center.real

    @property
    def ys(self) -> np.ndarray:
        return -self.R + self.h * (np.arange(self.n) + 0.5) + self.center.imag

    def points(self) -> np.ndarray:
        return self.xs[None, :] + 1j * self.ys[:, None]

    def header(self, kind: str) -> str:
        c = self.center
        return f"{kind} v1 {self.n} {self.R:.17g} {c.real:.17g} {c.imag:.17g}"


def default_radius(max_degree: int, s_max: float = 5.0) -> float:
    return float(math.ceil(math.sqrt((max_degree + s_max + 30.0) / math.pi)))


def default_grid(F: FockFunction, n: int = 1024, s_max: float = 5.0, center: complex = 0j) -> GridSpec:
    return GridSpec(default_radius(F.max_degree, s_max), n, center)


def _parse_header(line: str, kind: str) -> GridSpec:
    parts = line.split()
    if len(parts) != 6 or parts[0] != kind or parts[1] != "v1":
        raise ValueError(f"bad {kind} header: {line.strip()!r}")
    try:
        n = int(parts[2])
        R, cx, cy = (float(p) for p in parts[3:])
    except ValueError as exc:
        raise ValueError(f"bad {kind} header: {line.strip()!r}") from exc
    return GridSpec(R, n, complex(cx, cy))


def window_tail(F: FockFunction, g: GridSpec) -> float:
    """Upper bound on the mass of u_F outside the window.

    The window contains the disc of radius ``R - |center|`` about the
    origin, and the mass outside an origin disc of radius rho is
    ``sum |a_k|^2 Q(k+1, pi rho^2)`` with Q the regularized upper gamma.
    """
    a = F.dense()
    rho = g.R - abs(g.center)
    if rho <= 0:
        return float(np.sum(np.abs(a) ** 2))
    k = np.arange(a.shape[0])
    return float(np.sum(np.abs(a) ** 2 * gammaincc(k + 1.0, math.pi * rho * rho)))


@dataclass(eq=False)
class DensityGrid:
    spec: GridSpec
    values: np.ndarray  # (n, n), values[iy, ix]
    tail_mass: float
    norm_sq: float
    fock: FockFunction | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.values.shape != (self.spec.n, self.spec.n):
            raise ValueError(f"value array has shape {self.values.shape}, expected {(self.spec.n,) * 2}")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("density values must be finite and nonnegative")

    @cached_property
    def laplacian(self) -> np.ndarray:
        if self.fock is None:
            return _fd_laplacian(self.values, self.spec.h)
        return density_laplacian(self.fock, self.spec.points())

    @cached_property
    def cell_mass(self) -> np.ndarray:
        """Corrected per-cell integrals a (u + h^2/24 Lap u)."""
        h = self.spec.h
        return self.spec.cell_area * (self.values + (h * h / 24.0) * self.laplacian)

    @cached_property
    def cell_error(self) -> np.ndarray:
        """Per-cell estimate of the remaining quadrature error (next-order term, doubled)."""
        h = self.spec.h
        bilap = _fd_laplacian(self.laplacian, h)
        eps = np.finfo(float).eps
        return self.spec.cell_area * (2.0 * h ** 4 / 384.0 * np.abs(bilap) + 8 * eps * self.values)

    def total_mass(self) -> float:
        return float(self.cell_mass.sum())

    # binary io --------------------------------------------------------------

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write((self.spec.header("grid") + "\n").encode("ascii"))
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())


def density_laplacian(F: FockFunction, z) -> np.ndarray:
    """Analytic Laplacian of u_F at points z (dim=1).

    For holomorphic F and w = exp(-pi|z|^2):
    Lap u = w (4|F'|^2 + 4 pi (pi |z|^2 - 1)|F|^2 - 8 pi Re(z conj(F) F')).
    """
    z = np.asarray(z, dtype=np.complex128)
    f, f1, _ = derivatives(F, z)
    r2 = z.real ** 2 + z.imag ** 2
    w = np.exp(-math.pi * r2)
    return w * (
        4.0 * np.abs(f1) ** 2
        + 4.0 * math.pi * (math.pi * r2 - 1.0) * np.abs(f) ** 2
        - 8.0 * math.pi * np.real(z * np.conj(f) * f1)
    )


def _fd_laplacian(v: np.ndarray, h: float) -> np.ndarray:
    p = np.pad(v, 1, mode="edge")
    return (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4.0 * v) / (h * h)


def sample_density(F: FockFunction, g: GridSpec | None = None) -> DensityGrid:
    """Rasterize u_F on the grid; fails if the window misses too much mass."""
    if F.dim != 1:
        raise ValueError("density grids are two-dimensional; use highdim for dim >= 2")
    if g is None:
        g = default_grid(F)
    nsq = F.norm_sq()
    if nsq <= 0:
        raise ValueError("the zero function has no density profile")
    tail = window_tail(F, g)
    if tail > TAIL_REL_TOL * nsq:
        need = default_radius(F.max_degree) + abs(g.center)
        raise ValueError(f"tail mass {tail:.3e} outside the window exceeds {TAIL_REL_TOL:g}*|F|^2; use R >= {need:g}")
    vals = kernels.density_grid(F.monomial_coeffs(), g.xs, g.ys)
    return DensityGrid(g, np.asarray(vals, dtype=np.float64), tail, nsq, F)


def load_grid(path) -> DensityGrid:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise ValueError("grid file has no header line")
    spec = _parse_header(raw[:nl].decode("ascii", errors="replace"), "grid")
    body = raw[nl + 1 :]
    if len(body) != 8 * spec.n * spec.n:
        raise ValueError(f"grid body has {len(body)} bytes, expected {8 * spec.n * spec.n}")
    vals = np.frombuffer(body, dtype="<f8").reshape(spec.n, spec.n).astype(np.float64)
    mass = float(vals.sum() * spec.cell_area)
    return DensityGrid(spec, vals, float("nan"), mass, None)


# ---------------------------------------------------------------------------
# global maximum
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaxResult:
    T: float
    argmax: complex
    converged: bool


def _newton_ascent(F: FockFunction, z: complex, tol: float = 1e-12, max_iter: int = 100):
    """Damped Newton on log u_F starting at z; returns (z, converged)."""

    def logu(p):
        f = complex(evaluate(F, p))
        if f == 0:
            return -math.inf
        return 2.0 * math.log(abs(f)) - math.pi * abs(p) ** 2

    cur = logu(z)
    for _ in range(max_iter):
        f, f1, f2 = (complex(v) for v in derivatives(F, np.array(z)))
        if f == 0:
            return z, False
        w = f1 / f
        wp = f2 / f - w * w
        g = np.array([2 * w.real - 2 * math.pi * z.real, -2 * w.imag - 2 * math.pi * z.imag])
        if np.max(np.abs(g)) < tol:
            return z, True
        H = np.array([[2 * wp.real - 2 * math.pi, -2 * wp.imag], [-2 * wp.imag, -2 * wp.real - 2 * math.pi]])
        if np.all(np.linalg.eigvalsh(H) < 0):
            p = -np.linalg.solve(H, g)
        else:
            p = 0.1 * g
        step = 1.0
        for _ in range(60):
            cand = z + step * complex(p[0], p[1])
            val = logu(cand)
            if val >= cur - 1e-15 * max(1.0, abs(cur)):
                break
            step *= 0.5
        else:
            return z, False
        if abs(cand - z) < 1e-15 * max(1.0, abs(z)):
            return cand, True
        z, cur = cand, val
    return z, False


def global_max(F: FockFunction, grid: DensityGrid | None = None, starts: int = 5) -> MaxResult:
    """max u_F, refined from the top grid cells by Newton ascent on log u_F."""
    if grid is None:
        grid = sample_density(F, default_grid(F, n=256))
    flat = grid.values.ravel()
    k = min(starts, flat.shape[0])
    top = np.argpartition(-flat, k - 1)[:k]
    top = top[np.argsort(-flat[top], kind="stable")]
    pts = grid.spec.points().ravel()
    best_T, best_z, ok_any = float(flat[top[0]]), complex(pts[top[0]]), False
    for idx in top:
        z, ok = _newton_ascent(F, complex(pts[idx]))
        if not ok:
            continue
        val = float(abs(complex(evaluate(F, z))) ** 2 * math.exp(-math.pi * abs(z) ** 2))
        if val >= best_T or not ok_any:
            if val >= best_T:
                best_T, best_z = val, z
            ok_any = True
    if not ok_any:
        warnings.warn("maximum refinement did not converge; using the grid maximum", RuntimeWarning, stacklevel=2)
    return MaxResult(best_T, best_z, ok_any)


# ---------------------------------------------------------------------------
# rearrangement profile
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ConcentrationProfile:
    """Sorted cell data of a density grid.

    Index k refers to the k-th largest cell; ``s_k = (k+1) a`` is the
    measure of the top k+1 cells and ``u*`` is constant, equal to
    ``values[k]``, on ``[k a, (k+1) a)``.
    """

    spec: GridSpec
    order: np.ndarray  # flat cell indices, descending value, ties lexicographic
    values: np.ndarray  # sorted descending
    masses: np.ndarray  # corrected cell masses in the same order
    errors: np.ndarray  # per-cell quadrature error estimate in the same order
    norm_sq: float
    T: float  # max of u_F (not normalized)
    argmax: complex
    refined: bool
    s_star: float
    t_star: float

    @property
    def cell_area(self) -> float:
        return self.spec.cell_area

    @property
    def T_unit(self) -> float:
        """Maximum of u for F / |F|."""
        return self.T / self.norm_sq

    @property
    def degenerate(self) -> bool:
        return self.T_unit >= 1.0 - DEGENERATE_T

    @cached_property
    def prefix(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.masses)])

    @cached_property
    def prefix_err(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.errors)])

    @cached_property
    def edges(self) -> np.ndarray:
        """Exposed edge count of the top-(k+1) cell set."""
        return kernels.boundary_edges(self.order, self.spec.n)

    @cached_property
    def s_trust(self) -> float:
        """Largest s at which the raster profile is trusted.

        Super-level sets must fit in the inscribed disc of the window and
        values must stay above round-off.
        """
        rho = self.spec.R - abs(self.spec.center)
        lim = 0.9 * math.pi * rho * rho
        small = np.nonzero(self.values < TRUST_FLOOR * self.norm_sq)[0]
        if small.size:
            lim = min(lim, small[0] * self.cell_area)
        return float(lim)

    @property
    def k_trust(self) -> int:
        return int(self.s_trust / self.cell_area)

    # tabulations -------------------------------------------------------------

    def s_grid(self) -> np.ndarray:
        return self.cell_area * np.arange(1, self.values.shape[0] + 1)

    def mu(self, t):
        """Measure of {u > t} on the raster."""
        asc = self.values[::-1]
        cnt = asc.shape[0] - np.searchsorted(asc, np.asarray(t, dtype=float), side="right")
        return cnt * self.cell_area

    def ustar(self, s):
        s = np.asarray(s, dtype=float)
        k = np.clip(np.floor(s / self.cell_area).astype(np.int64), 0, self.values.shape[0] - 1)
        out = self.values[k]
        return float(out) if out.ndim == 0 else out

    def _ustar_lin(self, s):
        a = self.cell_area
        mids = a * (np.arange(self.values.shape[0]) + 0.5)
        return np.interp(s, mids, self.values)

    def I(self, s):
        """Mass of u on the top-measure-s part of the raster (linear within a cell)."""
        s = np.asarray(s, dtype=float)
        x = s / self.cell_area
        k = np.clip(np.floor(x).astype(np.int64), 0, self.values.shape[0] - 1)
        frac = np.clip(x - k, 0.0, 1.0)
        out = self.prefix[k] + frac * self.masses[k]
        out = np.where(x >= self.values.shape[0], self.prefix[-1], out)
        return float(out) if out.ndim == 0 else out

    def I_err(self, s):
        """Slack between the raster I(s) and the true I(s).

        Quadrature error of the cells plus the boundary band: band area
        sigma = a * edges, and within the band u varies at most between
        u*(s - sigma) and u*(s + sigma).
        """
        s = np.asarray(s, dtype=float)
        k = np.clip(np.floor(s / self.cell_area).astype(np.int64), 0, self.values.shape[0] - 1)
        sig = self.cell_area * self.edges[k]
        band = sig * (self.ustar(np.maximum(s - sig, 0.0)) - self.ustar(s + sig))
        out = band + self.prefix_err[k + 1] + 1e-12 * self.norm_sq
        return float(out) if out.ndim == 0 else out

    def sigma(self, k):
        return self.cell_area * self.edges[np.asarray(k)]


def _find_s_star(p: ConcentrationProfile) -> float:
    """Root of e^s u*(s)/|F|^2 - 1 by bisection to 1e-10 on the interpolated profile."""
    if p.degenerate:
        return SENTINEL
    kt = max(p.k_trust, 2)
    s = p.cell_area * (np.arange(kt) + 0.5)
    r = np.exp(s) * p.values[:kt] / p.norm_sq
    above = np.nonzero(r >= 1.0)[0]
    if above.size == 0:
        return SENTINEL
    j = int(above[0])
    lo = 0.0 if j == 0 else float(s[j - 1])
    hi = float(s[j])

    def phi(x):
        return math.exp(x) * float(p._ustar_lin(x)) / p.norm_sq - 1.0

    if phi(lo) >= 0:
        return lo
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if phi(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def profile(grid: DensityGrid, refine: bool = True) -> ConcentrationProfile:
    flat = grid.values.ravel()
    order = np.argsort(-flat, kind="stable")
    if refine and grid.fock is not None:
        mx = global_max(grid.fock, grid)
        T, zmax, ok = max(mx.T, float(flat[order[0]])), mx.argmax, mx.converged
    else:
        T, zmax, ok = float(flat[order[0]]), complex(grid.spec.points().ravel()[order[0]]), False
    p = ConcentrationProfile(
        spec=grid.spec,
        order=order,
        values=flat[order],
        masses=grid.cell_mass.ravel()[order],
        errors=grid.cell_error.ravel()[order],
        norm_sq=grid.norm_sq,
        T=T,
        argmax=zmax,
        refined=ok,
        s_star=SENTINEL,
        t_star=SENTINEL,
    )
    p.s_star = _find_s_star(p)
    p.t_star = math.exp(-p.s_star) if math.isfinite(p.s_star) else SENTINEL
    return p


# ---------------------------------------------------------------------------
# profile diagnostics
# ---------------------------------------------------------------------------


def ratio_margin(p: ConcentrationProfile) -> float:
    """Worst violation of monotone e^s u*(s), with one-cell slack.

    Returns min_k [log r_k + sigma_k - max_{j<k}(log r_j - sigma_j)] over the
    trusted range; nonnegative means no detectable violation.
    """
    k = max(p.k_trust, 2)
    s = p.cell_area * np.arange(k)
    logr = s + np.log(p.values[:k] / p.norm_sq)
    sig = p.cell_area * p.edges[:k]
    run = np.maximum.accumulate(logr - sig)
    return float(np.min(logr[1:] + sig[1:] - run[:-1]))


def crossing_count(p: ConcentrationProfile, F: FockFunction | None = None) -> int:
    """Sign changes of u*(s) - e^{-s} at points where the sign is decided despite slack.

    When the raster decides only one sign (typical when 1 - T is below the
    boundary-band slack) and ``F`` is given, the count is taken from traced
    level sets instead, provided they are polar graphs about the maximum.
    """
    raster = _raster_crossings(p)
    if raster > 0 or F is None or p.degenerate:
        return raster
    from .geometry import polar_sign_changes

    smax = min(p.s_trust, 20.0)
    s = np.unique(np.concatenate([np.geomspace(1e-7, 1.0, 80), np.linspace(1.0, smax, 120)]))
    polar = polar_sign_changes(F.normalized(), p.argmax, p.T_unit, s)
    return raster if polar is None else polar


def _raster_crossings(p: ConcentrationProfile) -> int:
    k = max(p.k_trust, 2)
    a = p.cell_area
    s = a * np.arange(k)
    sig = a * p.edges[:k]
    e = np.exp(-s)
    hi = p.ustar(s + sig) / p.norm_sq
    lo = p.ustar(np.maximum(s - sig, 0.0)) / p.norm_sq
    sign = np.zeros(k, dtype=np.int8)
    sign[hi > e] = 1
    sign[lo < e] = -1
    dec = sign[sign != 0]
    return int(np.count_nonzero(dec[1:] != dec[:-1]))


def mu_lower_margin(p: ConcentrationProfile, ts) -> float:
    """min over t of mu(t) - log_+(T/t) plus the boundary-band slack (unit-norm scaling)."""
    ts = np.asarray(ts, dtype=float)
    lhs = p.mu(ts * p.norm_sq)
    k = np.clip(np.rint(lhs / p.cell_area).astype(np.int64) - 1, 0, p.values.shape[0] - 1)
    slack = p.cell_area * (p.edges[k] + 1)
    rhs = np.maximum(np.log(p.T_unit / ts), 0.0)
    return float(np.min(lhs - rhs + slack))


def mu_peak_ratio(p: ConcentrationProfile, lo: float = 0.8, hi: float = 0.99, m: int = 64) -> float:
    """max over t in [lo T, hi T] of (mu(t)/log(T/t) - 1)/(1 - T), unit norm."""
    T = p.T_unit
    if p.degenerate:
        return SENTINEL
    ts = np.linspace(lo * T, hi * T, m)
    mu = p.mu(ts * p.norm_sq)
    return float(np.max((mu / np.log(T / ts) - 1.0) / (1.0 - T)))


@dataclass(frozen=True)
class ConvexityReport:
    min_second_diff: float
    min_margin: float  # second difference plus its one-cell slack
    max_excess: float  # max of I(s) - |F|^2 (1 - e^{-s})
    excess_margin: float  # max of that excess minus its slack


def convexity_G(p: ConcentrationProfile, m: int = 200) -> ConvexityReport:
    """Discrete convexity of G(sigma) = I(-log sigma) and the bound I(s) <= |F|^2(1-e^{-s})."""
    smax = p.s_trust
    lo = max(1.0 / m, math.exp(-smax))
    sig = np.linspace(lo, 1.0, m)
    s = -np.log(sig)
    G = p.I(s) / p.norm_sq
    d2 = G[:-2] - 2.0 * G[1:-1] + G[2:]
    k = np.clip(np.floor(s / p.cell_area).astype(np.int64), 0, p.values.shape[0] - 1)
    sg = p.cell_area * p.edges[k]
    r = np.exp(s) * p.ustar(s) / p.norm_sq
    dsig = sig[1] - sig[0]
    # G' = -r(s); allowed backwards drift of r over the stencil from slack and cell width
    slack = dsig * r[1:-1] * np.expm1(2.0 * (sg[:-2] + sg[2:]) + 2.0 * p.cell_area)
    slack += 4.0 * p.I_err(s[1:-1]) / p.norm_sq
    excess = p.I(s) - p.norm_sq * (-np.expm1(-s))
    tab = p.s_grid()[: max(p.k_trust, 1)]
    ex_tab = p.prefix[1 : tab.shape[0] + 1] - p.norm_sq * (-np.expm1(-tab))
    ex_all = np.concatenate([excess, ex_tab])
    err_all = np.concatenate([p.prefix_err[k + 1], p.prefix_err[1 : tab.shape[0] + 1]]) + 1e-12 * p.norm_sq
    return ConvexityReport(
        float(np.min(d2)),
        float(np.min(d2 + slack)),
        float(np.max(ex_all)),
        float(np.max(ex_all - err_all)),
    )


@dataclass(frozen=True)
class LemmaBounds:
    lhs: float
    mid: float
    rhs: float
    reinforced_ratio: float
    tol_mid: float
    tol_rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.mid + self.tol_mid and self.mid <= self.rhs + self.tol_rhs


def lemma_bounds(p: ConcentrationProfile, s0: float) -> LemmaBounds:
    """(1-T)^2/2 <= int_0^{s*} (e^{-s} - u*) <= delta_{s0} e^{s0}, unit-norm F."""
    if abs(p.norm_sq - 1.0) > 1e-8:
        raise ValueError(f"lemma bounds need a unit-norm function, got |F|^2 = {p.norm_sq:.12g}")
    if not s0 > 0:
        raise ValueError("s0 must be positive")
    T = min(p.T_unit, 1.0)
    d_s0 = 1.0 - p.I(s0) / (-math.expm1(-s0))
    rhs = d_s0 * math.exp(s0)
    err_rhs = p.I_err(s0) * math.exp(s0) / (-math.expm1(-s0))
    if p.degenerate or not math.isfinite(p.s_star):
        # equality case: s* is undefined and the middle term vanishes
        return LemmaBounds((1.0 - T) ** 2 / 2.0, 0.0, rhs, SENTINEL, 1e-12, err_rhs)
    ss = p.s_star
    mid = -math.expm1(-ss) - p.I(ss)
    tol_mid = p.I_err(ss)
    tol_rhs = tol_mid + err_rhs
    ratio = (1.0 - T) / mid if mid > 0 else math.inf
    return LemmaBounds((1.0 - T) ** 2 / 2.0, mid, rhs, ratio, tol_mid, tol_rhs)


# ---------------------------------------------------------------------------
# regions and deficits
# ---------------------------------------------------------------------------


def fk_bound(area: float) -> float:
    """1 - e^{-area}."""
    if area < 0 or math.isnan(area):
        raise ValueError(f"area must be nonnegative, got {area}")
    return -math.expm1(-area)


@dataclass(eq=False)
class RegionMask:
    spec: GridSpec
    cells: np.ndarray  # bool (n, n), cells[iy, ix]

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=bool)
        if self.cells.shape != (self.spec.n, self.spec.n):
            raise ValueError(f"mask has shape {self.cells.shape}, expected {(self.spec.n,) * 2}")

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.cells))

    @property
    def measure(self) -> float:
        return self.count * self.spec.cell_area

    def boundary_cells(self) -> int:
        """Cells of the mask with at least one 4-neighbour outside it."""
        c = np.pad(self.cells, 1, constant_values=False)
        inner = c[:-2, 1:-1] & c[2:, 1:-1] & c[1:-1, :-2] & c[1:-1, 2:]
        return int(np.count_nonzero(self.cells & ~inner))

    def __or__(self, other: "RegionMask") -> "RegionMask":
        _same_spec(self.spec, other.spec)
        return RegionMask(self.spec, self.cells | other.cells)

    def dumps(self) -> str:
        rows = ["".join("1" if b else "0" for b in row) for row in self.cells]
        return self.spec.header("mask") + "\n" + "\n".join(rows) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())


def _same_spec(a: GridSpec, b: GridSpec):
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


def loads_mask(text: str) -> RegionMask:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty mask file")
    spec = _parse_header(lines[0], "mask")
    rows = lines[1:]
    if len(rows) != spec.n:
        raise ValueError(f"mask has {len(rows)} rows, expected {spec.n}")
    cells = np.zeros((spec.n, spec.n), dtype=bool)
    for i, row in enumerate(rows):
        row = row.strip()
        if len(row) != spec.n or set(row) - {"0", "1"}:
            raise ValueError(f"mask row {i} is malformed")
        cells[i] = np.frombuffer(row.encode("ascii"), dtype=np.uint8) == ord("1")
    return RegionMask(spec, cells)


def load_mask(path) -> RegionMask:
    return loads_mask(Path(path).read_text())


def disc_mask(spec: GridSpec, center: complex = 0j, area: float | None = None, radius: float | None = None) -> RegionMask:
    if (area is None) == (radius is None):
        raise ValueError("give exactly one of area and radius")
    r = radius if radius is not None else math.sqrt(area / math.pi)
    z = spec.points()
    return RegionMask(spec, np.abs(z - center) <= r)


def square_mask(spec: GridSpec, center: complex = 0j, side: float = 1.0) -> RegionMask:
    z = spec.points() - center
    half = side / 2.0
    return RegionMask(spec, (np.abs(z.real) <= half) & (np.abs(z.imag) <= half))


def ellipse_mask(spec: GridSpec, center: complex, a: float, b: float, angle: float = 0.0) -> RegionMask:
    z = (spec.points() - center) * np.exp(-1j * angle)
    return RegionMask(spec, (z.real / a) ** 2 + (z.imag / b) ** 2 <= 1.0)


def star_mask(spec: GridSpec, center: complex, radius_fn) -> RegionMask:
    """{center + r e^{i theta} : r <= radius_fn(theta)}."""
    z = spec.points() - center
    return RegionMask(spec, np.abs(z) <= radius_fn(np.angle(z)))


def random_mask(spec: GridSpec, rng: np.random.Generator, area: float | None = None, max_offset: float = 1.0) -> RegionMask:
    """Random star-shaped region built from a few harmonics, optionally scaled to an area."""
    if area is None:
        area = float(rng.uniform(0.2, 3.0))
    nh = int(rng.integers(1, 5))
    amp = rng.uniform(-0.35, 0.35, nh) / np.arange(1, nh + 1)
    ph = rng.uniform(0, 2 * math.pi, nh)
    freq = np.arange(2, nh + 2)
    c = complex(*rng.uniform(-max_offset, max_offset, 2))

    def shape(theta):
        return 1.0 + sum(a * np.cos(f * theta + p) for a, f, p in zip(amp, freq, ph))

    th = np.linspace(0, 2 * math.pi, 2048, endpoint=False)
    base = 0.5 * np.mean(shape(th) ** 2) * 2 * math.pi
    scale = math.sqrt(area / base)
    m = star_mask(spec, c, lambda t: scale * shape(t))
    if m.count == 0:
        raise ValueError("random mask came out empty; grid too coarse")
    return m


@dataclass(frozen=True)
class DeficitReport:
    concentration: float
    fk_bound: float
    deficit: float
    superlevel_deficit: float
    area: float
    norm_sq: float
    quad_err: float

    @property
    def violation(self) -> bool:
        return self.deficit < -self.quad_err

    def to_dict(self) -> dict:
        return {
            "concentration": self.concentration,
            "fk_bound": self.fk_bound,
            "deficit": self.deficit,
            "superlevel_deficit": self.superlevel_deficit,
            "area": self.area,
            "norm_sq": self.norm_sq,
            "quad_err": self.quad_err,
        }

    def to_json(self) -> str:
        return _dump_json(self.to_dict())


def _fmt(v):
    if isinstance(v, float):
        if math.isnan(v) or math.isinf(v):
            return None
        return float(f"{v:.17g}")
    return v


def _dump_json(d: dict) -> str:
    # repr of a python float is already the shortest lossless decimal
    return json.dumps({k: _fmt(v) for k, v in d.items()}, indent=2, allow_nan=False)


def _mass_and_err(grid: DensityGrid, cells: np.ndarray) -> tuple[float, float]:
    return float(grid.cell_mass[cells].sum()), float(grid.cell_error[cells].sum())


def superlevel_mask(grid: DensityGrid, s0: float) -> tuple[RegionMask, float]:
    """The top-s0 cells (ties by lexicographic order) and their deficit."""
    if not s0 > 0:
        raise ValueError("s0 must be positive")
    if s0 > 0.9 * grid.spec.area:
        raise ValueError(f"s0={s0} exceeds 0.9 of the window area {grid.spec.area:g}")
    a = grid.spec.cell_area
    k = max(1, int(round(s0 / a)))
    flat = grid.values.ravel()
    if k < flat.shape[0]:
        idx = np.argpartition(-flat, k - 1)
        thr = flat[idx[k - 1]]
        above = np.nonzero(flat > thr)[0]
        tied = np.nonzero(flat == thr)[0][: k - above.shape[0]]
        sel = np.concatenate([above, tied])
    else:
        sel = np.arange(flat.shape[0])
    cells = np.zeros(flat.shape[0], dtype=bool)
    cells[sel] = True
    cells = cells.reshape(grid.values.shape)
    mass, _ = _mass_and_err(grid, cells)
    area = k * a
    return RegionMask(grid.spec, cells), 1.0 - mass / (fk_bound(area) * grid.norm_sq)


def deficit(F: FockFunction, mask: RegionMask, grid: DensityGrid | GridSpec | None = None) -> DeficitReport:
    """delta(F; mask) = 1 - int_mask u / ((1 - e^{-|mask|}) |F|^2)."""
    if grid is None:
        grid = mask.spec
    if isinstance(grid, GridSpec):
        grid = sample_density(F, grid)
    _same_spec(grid.spec, mask.spec)
    if mask.count == 0:
        raise ValueError("deficit of an empty region is undefined")
    nsq = F.norm_sq()
    if nsq <= 0:
        raise ValueError("deficit of the zero function is undefined")
    mass, err = _mass_and_err(grid, mask.cells)
    area = mask.measure
    bound = fk_bound(area)
    _, d_s0 = superlevel_mask(grid, area) if area <= 0.9 * grid.spec.area else (None, SENTINEL)
    denom = bound * nsq
    return DeficitReport(mass, bound, 1.0 - mass / denom, d_s0, area, nsq, err / denom + 1e-12)


__all__ = [
    "GridSpec",
    "DensityGrid",
    "ConcentrationProfile",
    "RegionMask",
    "DeficitReport",
    "LemmaBounds",
    "ConvexityReport",
    "MaxResult",
    "default_grid",
    "default_radius",
    "window_tail",
    "sample_density",
    "density_laplacian",
    "load_grid",
    "global_max",
    "profile",
    "ratio_margin",
    "crossing_count",
    "mu_lower_margin",
    "mu_peak_ratio",
    "convexity_G",
    "lemma_bounds",
    "fk_bound",
    "disc_mask",
    "square_mask",
    "ellipse_mask",
    "star_mask",
    "random_mask",
    "loads_mask",
    "load_mask",
    "superlevel_mask",
    "deficit",
]
