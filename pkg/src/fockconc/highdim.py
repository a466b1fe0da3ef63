"""The d-dimensional picture: e*(s), the bound, Monte Carlo deficits and rearrangements.

Monte Carlo integrals of ``|F|^2 exp(-pi|z|^2)`` over a region use the
Gaussian itself as the sampling law: each real coordinate of ``z`` is normal
with variance ``1/(2 pi)``, whose density on R^{2d} is exactly
``exp(-pi|z|^2)``.  Samples come from independent streams spawned from one
seed, and per-stream sums are reduced in stream order, so results depend on
``(seed, streams)`` and not on the number of worker threads.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.special import gammainc, gammaln

from .fock import FockFunction, evaluate

MIN_SAMPLES = 10_000
CHUNK = 1 << 16


def e_star(s, d: int):
    """exp(-(d! s)^(1/d))."""
    if d < 1:
        raise ValueError("d must be >= 1")
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("s must be nonnegative")
    out = np.exp(-np.power(math.factorial(d) * s, 1.0 / d))
    return float(out) if out.ndim == 0 else out


def _tau(area: float, d: int) -> float:
    return (math.factorial(d) * area) ** (1.0 / d)


def fk_bound_d(area: float, d: int) -> float:
    """int_0^area e*(s) ds = P(d, (d! area)^(1/d)) with P the regularized lower gamma."""
    if area < 0:
        raise ValueError("area must be nonnegative")
    if math.isinf(area):
        return 1.0
    return float(gammainc(d, _tau(area, d)))


def fk_bound_d_quad(area: float, d: int) -> float:
    """Adaptive-quadrature value of int_0^area e*(s) ds."""
    val, _ = quad(lambda s: e_star(s, d), 0.0, area, epsabs=1e-14, epsrel=1e-13, limit=200)
    return float(val)


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------


def _coords(center, d):
    c = np.asarray(center)
    if np.iscomplexobj(c):
        c = c.astype(np.complex128).ravel()
    else:
        c = np.asarray(c, dtype=float).reshape(-1, 2)
        c = c[:, 0] + 1j * c[:, 1]
    if c.shape[0] != d:
        raise ValueError(f"centre has {c.shape[0]} complex coordinates, expected {d}")
    return c


@dataclass(frozen=True)
class Ball:
    """Euclidean ball in C^d = R^{2d}."""

    center: np.ndarray
    radius: float

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def measure(self) -> float:
        d = self.dim
        return (math.pi * self.radius ** 2) ** d / math.factorial(d)

    def contains(self, z: np.ndarray) -> np.ndarray:
        return np.sum(np.abs(z - self.center) ** 2, axis=-1) <= self.radius ** 2

    def to_dict(self) -> dict:
        return {"kind": "ball", "center": [[c.real, c.imag] for c in self.center], "radius": self.radius}


@dataclass(frozen=True)
class Product:
    """Product of discs, one per complex coordinate."""

    center: np.ndarray
    radii: np.ndarray

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def measure(self) -> float:
        return float(np.prod(math.pi * self.radii ** 2))

    def contains(self, z: np.ndarray) -> np.ndarray:
        return np.all(np.abs(z - self.center) <= self.radii, axis=-1)

    def to_dict(self) -> dict:
        return {"kind": "product", "center": [[c.real, c.imag] for c in self.center], "radii": list(map(float, self.radii))}


def ball(center, radius: float = None, d: int | None = None, measure: float | None = None) -> Ball:
    if d is None:
        d = len(np.atleast_1d(center)) if np.iscomplexobj(np.asarray(center)) else np.asarray(center).size // 2
    c = _coords(center, d)
    if (radius is None) == (measure is None):
        raise ValueError("give exactly one of radius and measure")
    if measure is not None:
        radius = math.sqrt(_tau(measure, d) / math.pi)
    if not radius > 0:
        raise ValueError("radius must be positive")
    return Ball(c, float(radius))


def product(center, radii) -> Product:
    r = np.asarray(radii, dtype=float).ravel()
    c = _coords(center, r.shape[0])
    if np.any(r <= 0):
        raise ValueError("radii must be positive")
    return Product(c, r)


def region_from_dict(spec: dict, d: int | None = None):
    kind = spec.get("kind")
    if kind == "ball":
        c = np.asarray(spec["center"], dtype=float)
        return ball(c, float(spec["radius"]), d=c.size // 2)
    if kind == "product":
        return product(np.asarray(spec["center"], dtype=float), spec["radii"])
    raise ValueError(f"unsupported region kind {kind!r}; expected 'ball' or 'product'")


def load_region(path):
    return region_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MCSpec:
    count: int = 1_000_000
    seed: int = 0
    streams: int = 8
    workers: int = 1
    sampler: str = "gaussian"  # law with density exp(-pi|z|^2)

    def __post_init__(self):
        if self.count < MIN_SAMPLES:
            raise ValueError(f"need at least {MIN_SAMPLES} samples, got {self.count}")
        if self.streams < 1:
            raise ValueError("streams must be >= 1")

    def stream_counts(self):
        base, extra = divmod(self.count, self.streams)
        return [base + (1 if i < extra else 0) for i in range(self.streams)]

    def generators(self):
        return [np.random.default_rng(s) for s in np.random.SeedSequence(self.seed).spawn(self.streams)]


def _gaussian_points(rng: np.random.Generator, m: int, d: int) -> np.ndarray:
    x = rng.standard_normal((m, 2 * d)) / math.sqrt(2.0 * math.pi)
    return x[:, 0::2] + 1j * x[:, 1::2]


def _map_streams(mc: MCSpec, fn):
    jobs = list(zip(mc.generators(), mc.stream_counts()))
    if mc.workers > 1:
        with ThreadPoolExecutor(mc.workers) as ex:
            return list(ex.map(lambda a: fn(*a), jobs))
    return [fn(*a) for a in jobs]


@dataclass(frozen=True)
class DeficitD:
    deficit: float
    stderr: float
    concentration: float
    fk_bound: float
    measure: float
    norm_sq: float
    control_variate: bool
    seed: int
    streams: int
    count: int

    def to_dict(self) -> dict:
        return {
            "deficit": self.deficit,
            "stderr": self.stderr,
            "concentration": self.concentration,
            "fk_bound": self.fk_bound,
            "measure": self.measure,
            "norm_sq": self.norm_sq,
            "control_variate": self.control_variate,
            "seed": self.seed,
            "streams": self.streams,
            "count": self.count,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def deficit_d(F: FockFunction, region, mc: MCSpec = MCSpec(), control_variate: bool = True) -> DeficitD:
    """delta = 1 - int_region u / (|F|^2 fk_bound_d(|region|, d)) by Monte Carlo.

    With ``control_variate`` the centred ball of the same measure, whose
    Gaussian mass is known exactly, is used as control.
    """
    d = F.dim
    if d == 1:
        raise ValueError("dim=1 deficits are computed on grids; use concentration.deficit")
    if d not in (2, 3):
        raise ValueError(f"Monte Carlo deficits support d in (2, 3), got {d}")
    if not isinstance(region, (Ball, Product)):
        raise ValueError("region must be a Ball or a Product")
    if region.dim != d:
        raise ValueError(f"region lives in C^{region.dim}, function in C^{d}")
    meas = region.measure
    bound = fk_bound_d(meas, d)
    r0sq = _tau(meas, d) / math.pi

    def run(rng, m):
        acc = np.zeros(5)
        left = m
        while left > 0:
            k = min(CHUNK, left)
            z = _gaussian_points(rng, k, d)
            x = np.abs(evaluate(F, z)) ** 2 * region.contains(z)
            y = (np.sum(np.abs(z) ** 2, axis=1) <= r0sq).astype(float)
            acc += [x.sum(), y.sum(), (x * x).sum(), (y * y).sum(), (x * y).sum()]
            left -= k
        return acc

    parts = _map_streams(mc, run)
    sx, sy, sxx, syy, sxy = np.sum(parts, axis=0)
    n = mc.count
    mx, my = sx / n, sy / n
    vx = max(sxx / n - mx * mx, 0.0)
    vy = max(syy / n - my * my, 0.0)
    cxy = sxy / n - mx * my
    if control_variate and vy > 0:
        beta = cxy / vy
        est = mx - beta * (my - bound)
        var = max(vx - 2 * beta * cxy + beta * beta * vy, 0.0)
    else:
        est, var = mx, vx
    se = math.sqrt(var / n)
    nsq = F.norm_sq()
    return DeficitD(
        float(1.0 - est / (nsq * bound)), float(se / (nsq * bound)), float(est), bound, meas, nsq, bool(control_variate), mc.seed, mc.streams, n
    )


@dataclass(frozen=True)
class RearrangementD:
    margin: float  # worst consecutive margin, slack included; >= 0 passes
    s: np.ndarray
    ustar: np.ndarray
    ratio: np.ndarray  # u*(s)/e*(s)
    slack_s: np.ndarray  # 3-sigma uncertainty of the measure at each quantile


def rearrangement_check_d(F: FockFunction, s_grid, mc: MCSpec = MCSpec(), volume_factor: float = 3.0) -> RearrangementD:
    """Monotonicity of u*(s)/e*(s) from Monte Carlo quantiles of u on a bounding ball."""
    d = F.dim
    if d not in (2, 3):
        raise ValueError(f"rearrangement checks support d in (2, 3), got {d}")
    s = np.asarray(s_grid, dtype=float)
    if s.ndim != 1 or s.shape[0] < 2 or np.any(np.diff(s) <= 0) or s[0] <= 0:
        raise ValueError("s_grid must be an increasing sequence of positive reals")
    nsq = F.norm_sq()
    V = volume_factor * s[-1]
    Rb = math.sqrt(_tau(V, d) / math.pi)

    def run(rng, m):
        out = []
        left = m
        while left > 0:
            k = min(CHUNK, left)
            g = rng.standard_normal((k, 2 * d))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            g *= Rb * rng.random((k, 1)) ** (1.0 / (2 * d))
            z = g[:, 0::2] + 1j * g[:, 1::2]
            out.append(np.abs(evaluate(F, z)) ** 2 * np.exp(-math.pi * np.sum(g * g, axis=1)))
            left -= k
        return np.concatenate(out)

    u = np.sort(np.concatenate(_map_streams(mc, run)))[::-1] / nsq
    n = u.shape[0]
    p = s / V
    slack = 3.0 * V * np.sqrt(p * (1 - p) / n)
    if np.any(slack >= 0.5 * np.min(np.diff(s), initial=np.inf)) and s.shape[0] > 1:
        need = int(math.ceil(n * (np.max(slack) / (0.45 * np.min(np.diff(s)))) ** 2))
        raise ValueError(f"Monte Carlo slack too large for this s grid; use at least {need} samples")

    def ustar(x):
        k = np.clip(np.floor(np.asarray(x) / V * n).astype(np.int64), 0, n - 1)
        return u[k]

    us = ustar(s)
    ratio = us / e_star(s, d)
    hi = np.log(ustar(np.maximum(s - slack, 0.0))) - np.log(e_star(s, d))
    lo = np.log(ustar(s + slack)) - np.log(e_star(s, d))
    margin = float(np.min(hi[1:] - lo[:-1]))
    return RearrangementD(margin, s, us, ratio, slack)


# ---------------------------------------------------------------------------
# second variation in d dimensions
# ---------------------------------------------------------------------------


def v_coefficient_d(k: int, s: float, d: int) -> float:
    """Second-variation coefficient of a unit homogeneous degree-k direction in C^d.

    -e^{-tau} sum_{j=d}^{k+d-2} tau^j / j! with tau = (d! s)^(1/d).
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    tau = _tau(s, d)
    term = math.exp(-tau + d * math.log(tau) - gammaln(d + 1)) if tau > 0 else 0.0
    acc = 0.0
    for j in range(d, k + d - 1):
        acc += term
        term *= tau / (j + 1)
    return -acc


def v_coefficient_d_oracle(k: int, s: float, d: int, nodes: int = 120) -> float:
    """Same coefficient from the three-term ball/sphere formula by radial quadrature.

    For unit ``G`` homogeneous of degree k the sphere average of |G|^2 is
    fixed by the Fock norm, so every term is a radial integral:
    int_B |G|^2 e^{-pi|z|^2} - int_B e^{-pi|z|^2} + e*(s) d s^{1-1/d} (d!)^{-1/d} avg_{dB} |G|^2.
    """
    area_sphere = 2.0 * math.pi ** d / math.factorial(d - 1)
    rho = math.sqrt(_tau(s, d) / math.pi)
    x, w = leggauss(nodes)

    def radial(power, a, b):
        r = 0.5 * (b - a) * (x + 1.0) + a
        return 0.5 * (b - a) * float(np.sum(w * r ** power * np.exp(-math.pi * r * r)))

    # full radial moment over [0, inf) via a finite cutoff where the integrand is negligible
    cut = math.sqrt((k + d + 40) / math.pi) + 2.0
    full = radial(2 * k + 2 * d - 1, 0.0, cut)
    avg_unit = 1.0 / (area_sphere * full)  # sphere average of |G|^2 on |z| = 1
    t1 = area_sphere * avg_unit * radial(2 * k + 2 * d - 1, 0.0, rho)
    t2 = area_sphere * radial(2 * d - 1, 0.0, rho)
    boundary = e_star(s, d) * d * s ** (1.0 - 1.0 / d) / math.factorial(d) ** (1.0 / d)
    t3 = boundary * avg_unit * rho ** (2 * k)
    return t1 - t2 + t3


def second_variation_d(G: FockFunction, s: float) -> float:
    """sum_a |a_a|^2 V^{(d)}_{|a|}(s) for G without constant or linear terms."""
    d = G.dim
    total = 0.0
    for alpha, v in G.items():
        k = sum(alpha)
        if k < 2:
            if abs(v) > 1e-12:
                raise ValueError("G must be orthogonal to constants and linear functions")
            continue
        total += abs(v) ** 2 * v_coefficient_d(k, s, d)
    return total


def quadratic_witness(d: int) -> FockFunction:
    """sum_i z_i^2 + sqrt 2 sum_{i<j} z_i z_j in the normalized basis."""
    from .fock import make_fock

    coeffs = {}
    for i in range(d):
        a = [0] * d
        a[i] = 2
        coeffs[tuple(a)] = math.sqrt(2.0) / math.pi  # z^2 = (sqrt 2/pi) e_2
        for j in range(i + 1, d):
            b = [0] * d
            b[i] = b[j] = 1
            coeffs[tuple(b)] = math.sqrt(2.0) / math.pi  # z_i z_j = (1/pi) e_{ij}
    return make_fock(d, coeffs)


def second_variation_target(s: float, d: int) -> float:
    """-e*(s) d(d+1) s / pi^2, the value for the quadratic witness."""
    return -e_star(s, d) * d * (d + 1) * s / math.pi ** 2


__all__ = [
    "MCSpec",
    "Ball",
    "Product",
    "DeficitD",
    "RearrangementD",
    "e_star",
    "fk_bound_d",
    "fk_bound_d_quad",
    "ball",
    "product",
    "region_from_dict",
    "load_region",
    "deficit_d",
    "rearrangement_check_d",
    "v_coefficient_d",
    "v_coefficient_d_oracle",
    "second_variation_d",
    "quadratic_witness",
    "second_variation_target",
]
