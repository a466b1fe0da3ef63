"""Set geometry: asymmetry, symmetric differences and polar level sets."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss

from .concentration import DensityGrid, RegionMask, _same_spec
from .fock import FockFunction, density

BISECT_TOL = 1e-10


# ---------------------------------------------------------------------------
# Fraenkel asymmetry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Asymmetry:
    A: float
    center: complex
    radius: float
    slack: float  # discretization bound: 2 * boundary-cell fraction

    def to_json(self) -> str:
        return json.dumps(
            {
                "A": self.A,
                "cx": self.center.real,
                "cy": self.center.imag,
                "r": self.radius,
                "slack": self.slack,
            },
            indent=2,
        )


def _overlap(pts: np.ndarray, centers: np.ndarray, r: float, h: float) -> np.ndarray:
    """Anti-aliased cell count of the mask inside each disc B(center, r)."""
    out = np.empty(centers.shape[0])
    chunk = max(1, 4_000_000 // max(pts.shape[0], 1))
    for i in range(0, centers.shape[0], chunk):
        c = centers[i : i + chunk]
        d = np.abs(pts[None, :] - c[:, None])
        out[i : i + chunk] = np.clip((r - d) / h + 0.5, 0.0, 1.0).sum(axis=1)
    return out


def fraenkel_asymmetry(mask: RegionMask, coarse: int = 21) -> Asymmetry:
    """min over centres of |mask xor B|/|mask| with |B| = |mask|.

    The disc coverage of a cell is approximated by a linear ramp of width one
    cell across the circle, which makes the objective continuous in the
    centre; the search is a coarse grid over the bounding box followed by a
    compass search down to 1e-3 cell sides.
    """
    cnt = mask.count
    if cnt == 0:
        raise ValueError("asymmetry of an empty region is undefined")
    spec = mask.spec
    h = spec.h
    iy, ix = np.nonzero(mask.cells)
    # work in cell-index units relative to the bounding box so translations are exact
    y0, x0 = iy.min(), ix.min()
    pts = (ix - x0) + 1j * (iy - y0)
    r = math.sqrt(cnt / math.pi)  # radius in cell units, |B| = |mask|
    wx, wy = ix.max() - x0, iy.max() - y0
    gx = np.linspace(0, wx, coarse)
    gy = np.linspace(0, wy, coarse)
    cand = (gx[None, :] + 1j * gy[:, None]).ravel()
    cov = _overlap(pts, cand, r, 1.0)
    seeds = cand[np.argsort(-cov, kind="stable")[:3]]
    best_c, best_v = seeds[0], -1.0
    for c in seeds:
        v = float(_overlap(pts, np.array([c]), r, 1.0)[0])
        step = max(wx, wy, 1.0) / (coarse - 1) / 2.0
        while step > 1e-3:
            moves = c + step * np.array([1, -1, 1j, -1j, 1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])
            vals = _overlap(pts, moves, r, 1.0)
            j = int(np.argmax(vals))
            if vals[j] > v:
                c, v = moves[j], float(vals[j])
            else:
                step *= 0.5
        if v > best_v:
            best_c, best_v = c, v
    A = float(np.clip(2.0 * (1.0 - best_v / cnt), 0.0, 2.0))
    origin = complex(spec.xs[x0], spec.ys[y0])
    center = origin + h * best_c
    slack = 2.0 * mask.boundary_cells() / cnt
    return Asymmetry(A, center, r * h, slack)


def symdiff_measure(a: RegionMask, b: RegionMask) -> float:
    _same_spec(a.spec, b.spec)
    return float(np.count_nonzero(a.cells ^ b.cells) * a.spec.cell_area)


# ---------------------------------------------------------------------------
# level sets as graphs over the circle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryGraph:
    theta: np.ndarray
    r: np.ndarray
    center: complex
    multi: np.ndarray  # True where a ray crosses the level more than once

    def __post_init__(self):
        if self.theta.shape != self.r.shape or self.theta.ndim != 1:
            raise ValueError("theta and r must be 1-D of equal length")
        if not (np.all(np.isfinite(self.r)) and np.all(self.r > 0)):
            raise ValueError("boundary radii must be finite and positive")

    @classmethod
    def from_radii(cls, r, center: complex = 0j) -> "BoundaryGraph":
        r = np.asarray(r, dtype=float)
        th = 2 * math.pi * np.arange(r.shape[0]) / r.shape[0]
        return cls(th, r, complex(center), np.zeros(r.shape[0], dtype=bool))

    @property
    def m(self) -> int:
        return self.r.shape[0]

    def vertices(self) -> np.ndarray:
        return self.center + self.r * np.exp(1j * self.theta)

    def area(self) -> float:
        """(1/2) int r^2 dtheta by the periodic trapezoid rule."""
        return float(math.pi * np.mean(self.r ** 2))

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "r"])
            for t, r in zip(self.theta, self.r):
                w.writerow([f"{t:.17g}", f"{r:.17g}"])


def trace_level_set(
    F: FockFunction,
    level: float,
    center: complex,
    m: int = 256,
    rmax: float = 8.0,
    samples: int = 2048,
    tol: float = BISECT_TOL,
) -> BoundaryGraph:
    """Outermost crossing of u_F = level along m rays, refined by bisection."""
    center = complex(center)
    if density(F, center) <= level:
        raise ValueError(f"u at the centre is not above level {level:g}: the centre lies outside the set")
    theta = 2 * math.pi * np.arange(m) / m
    dirs = np.exp(1j * theta)
    rs = np.linspace(0.0, rmax, samples)
    u = density(F, center + rs[None, :] * dirs[:, None])
    above = u > level
    if np.any(above[:, -1]):
        raise ValueError(f"level set reaches rmax={rmax:g}; level too low for the window")
    # last sample above the level on each ray
    last = samples - 1 - np.argmax(above[:, ::-1], axis=1)
    changes = np.count_nonzero(above[:, 1:] != above[:, :-1], axis=1)
    lo = rs[last].copy()
    hi = rs[last + 1].copy()
    while np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        up = density(F, center + mid * dirs) > level
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    return BoundaryGraph(theta, 0.5 * (lo + hi), center, changes > 1)


def boundary_graph(grid: DensityGrid, level: float, center: complex, m: int = 256) -> BoundaryGraph:
    if grid.fock is None:
        raise ValueError("boundary tracing needs the analytic function behind the grid")
    rmax = grid.spec.R - abs(complex(center) - grid.spec.center)
    if rmax <= 0:
        raise ValueError("centre lies outside the grid window")
    return trace_level_set(grid.fock, level, center, m, rmax=rmax * math.sqrt(2.0))


@dataclass(frozen=True)
class ShapeChecks:
    star_shaped: bool
    convex: bool
    min_turn: float
    m: int  # angular resolution behind the verdict


def shape_checks(g: BoundaryGraph) -> ShapeChecks:
    """Star-shapedness from ray crossings; convexity from the polygon turning sign."""
    if g.m < 64:
        raise ValueError("shape checks need at least 64 rays")
    v = g.vertices()
    e = np.roll(v, -1) - v
    e2 = np.roll(e, -1)
    turn = (np.conj(e) * e2).imag / (np.abs(e) * np.abs(e2))
    return ShapeChecks(bool(not g.multi.any()), bool(np.all(turn > 0)), float(turn.min()), g.m)


def radial_monotone(F: FockFunction, center: complex, rmax: float, rays: int = 32, samples: int = 400) -> bool:
    """True if u_F strictly decreases along every ray on (0, rmax]."""
    theta = 2 * math.pi * np.arange(rays) / rays
    rs = np.linspace(0.0, rmax, samples)
    u = density(F, complex(center) + rs[None, :] * np.exp(1j * theta)[:, None])
    return bool(np.all(np.diff(u, axis=1) < 0))


def polar_mass(F: FockFunction, g: BoundaryGraph, nodes: int = 48) -> float:
    """int of u_F over the star-shaped region bounded by g (Gauss-Legendre in r, trapezoid in theta)."""
    x, w = leggauss(nodes)
    t = 0.5 * (x + 1.0)
    rr = g.r[:, None] * t[None, :]
    z = g.center + rr * np.exp(1j * g.theta)[:, None]
    inner = (density(F, z) * rr * (0.5 * w)[None, :]).sum(axis=1) * g.r
    return float(2 * math.pi * inner.mean())


def polar_sign_changes(F: FockFunction, argmax: complex, T: float, s_values, m: int = 128, tol: float = 1e-9):
    """Sign changes of mu(e^{-s}) - s (unit-norm scaling) from traced level sets.

    Returns None when some level set is not a single-valued polar graph
    about ``argmax`` or leaves the tracing window, since the traced area is
    then not the measure of the super-level set.
    """
    nsq = F.norm_sq()
    s = np.asarray(s_values, dtype=float)
    rmax = 2.0 * math.sqrt(float(s.max()) / math.pi) + 3.0
    signs = []
    for sv in s:
        t = math.exp(-sv)
        if t >= T:
            signs.append(-1)
            continue
        try:
            g = trace_level_set(F, t * nsq, argmax, m, rmax=rmax, samples=768, tol=1e-12)
        except ValueError:
            return None
        if g.multi.any():
            return None
        d = g.area() - sv
        if abs(d) > tol * max(sv, 1.0):
            signs.append(1 if d > 0 else -1)
    signs = np.array(signs, dtype=np.int8)
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def load_boundary_csv(path, center: complex = 0j) -> BoundaryGraph:
    rows = list(csv.reader(Path(path).read_text().splitlines()))
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    return BoundaryGraph(data[:, 0], data[:, 1], complex(center), np.zeros(len(data), dtype=bool))


__all__ = [
    "Asymmetry",
    "BoundaryGraph",
    "ShapeChecks",
    "fraenkel_asymmetry",
    "symdiff_measure",
    "trace_level_set",
    "boundary_graph",
    "shape_checks",
    "radial_monotone",
    "polar_mass",
    "load_boundary_csv",
]
