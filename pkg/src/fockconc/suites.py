"""Property suites behind ``fockconc verify``.

Each check returns a :class:`Check`; a suite is an ordered list of checks.
``scale`` multiplies ensemble sizes; the default scale finishes in a few
minutes on a laptop.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import concentration as C
from . import geometry as Geo
from . import highdim as H
from . import stability as S
from . import transforms as Tr
from .fock import (
    density,
    evaluate,
    inner,
    kernel_function,
    make_fock,
    near_gaussian,
    norm,
    quadrature_norm_sq,
    random_polynomial,
)

DEFAULT_TOL = {
    "parseval": 1e-6,
    "reproducing": 1e-9,
    "bargmann": 1e-6,
    "kern": 1e-4,
    "slope": 0.05,
    "negdef": 1e-12,
}


@dataclass
class Check:
    name: str
    prop: str  # the property being tested, in words
    passed: bool
    value: float
    detail: str = ""
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "property": self.prop,
            "passed": self.passed,
            "value": self.value,
            "detail": self.detail,
        }


@dataclass
class Context:
    seed: int = 0
    scale: float = 1.0
    workers: int = 1
    tol: dict = field(default_factory=dict)
    vfunc: object = S.v_coefficient

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    def n(self, base: int) -> int:
        return max(1, int(round(base * self.scale)))

    def t(self, name: str) -> float:
        return float(self.tol.get(name, DEFAULT_TOL[name]))

    def map(self, fn, items):
        if self.workers > 1:
            with ThreadPoolExecutor(self.workers) as ex:
                return list(ex.map(fn, items))
        return [fn(x) for x in items]


def _timed(fn):
    def wrapper(ctx):
        t0 = time.perf_counter()
        res = fn(ctx)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    return wrapper


# ---------------------------------------------------------------------------
# fock_core
# ---------------------------------------------------------------------------


@_timed
def check_parseval(ctx: Context) -> Check:
    rng = ctx.rng(1)
    worst = 0.0
    for i in range(ctx.n(10)):
        F = random_polynomial(rng, int(rng.integers(0, 33)))
        q = quadrature_norm_sq(F, R=7.0, n=768)
        worst = max(worst, abs(q - F.norm_sq()) / F.norm_sq())
    return Check("parseval", "coefficient norm equals the Gaussian-weighted plane integral", worst <= ctx.t("parseval"), worst)


@_timed
def check_kernel_bound(ctx: Context) -> Check:
    rng = ctx.rng(2)
    worst = -math.inf
    for _ in range(ctx.n(20)):
        F = random_polynomial(rng, int(rng.integers(0, 20)))
        z = rng.uniform(-3, 3, 500) + 1j * rng.uniform(-3, 3, 500)
        worst = max(worst, float(np.max(density(F, z))) - F.norm_sq())
    return Check("kernel_bound", "pointwise bound u_F <= |F|^2", worst <= 1e-12, worst)


@_timed
def check_reproducing(ctx: Context) -> Check:
    rng = ctx.rng(3)
    worst = 0.0
    for _ in range(ctx.n(100)):
        F = random_polynomial(rng, int(rng.integers(0, 16)))
        z0 = complex(*rng.uniform(-1.5, 1.5, 2))
        K = kernel_function(z0, 64)
        lhs = inner(F, K)
        rhs = complex(evaluate(F, z0)) * math.exp(-math.pi * abs(z0) ** 2 / 2)
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    return Check("reproducing", "reproducing identity <F, F_z0> = F(z0) e^{-pi|z0|^2/2}", worst <= ctx.t("reproducing"), worst)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def hermite_battery(rng: np.random.Generator):
    out = [(f"h{k}", (lambda k: lambda t: Tr.hermite_function(k, t))(k)) for k in range(7)]
    for j in range(2):
        c = rng.standard_normal(7) + 1j * rng.standard_normal(7)
        c /= np.linalg.norm(c)
        out.append((f"mix{j}", (lambda c: lambda t: c @ Tr.hermite_functions(6, t))(c)))
    return out


@_timed
def check_unitarity(ctx: Context) -> Check:
    rng = ctx.rng(4)
    worst = 0.0
    for _ in range(ctx.n(20)):
        c = rng.standard_normal(25) + 1j * rng.standard_normal(25)
        e = Tr.HermiteExpansion(c, 0.0)
        worst = max(worst, abs(norm(Tr.bargmann(e)) - np.linalg.norm(c)) / np.linalg.norm(c))
    return Check("unitarity", "Bargmann map preserves norms", worst <= 1e-14, worst)


@_timed
def check_bargmann_identity(ctx: Context) -> Check:
    g = np.linspace(-1.5, 1.5, 5)
    pts = [(x, w) for x in g for w in g]
    worst = 0.0
    for _, f in hermite_battery(ctx.rng(5)):
        worst = max(worst, Tr.bargmann_identity_residual(Tr.sample(f), pts))
    return Check("bargmann_identity", "|V f(x,-w)| = |Bf(z)| e^{-pi|z|^2/2}", worst <= ctx.t("bargmann"), worst)


# ---------------------------------------------------------------------------
# concentration
# ---------------------------------------------------------------------------


def _fk_one(args):
    seed, i = args
    rng = np.random.default_rng([seed, 10, i])
    F = random_polynomial(rng, int(rng.integers(0, 9)))
    spec = C.GridSpec(C.default_radius(8), 256)
    g = C.sample_density(F, spec)
    m = C.random_mask(spec, rng)
    r = C.deficit(F, m, g)
    return r.deficit + r.quad_err


@_timed
def check_fk(ctx: Context) -> Check:
    vals = ctx.map(_fk_one, [(ctx.seed, i) for i in range(ctx.n(200))])
    worst = float(min(vals))
    return Check("fk_inequality", "deficit >= -quadrature error for random F and masks", worst >= 0.0, worst)


def profile_battery(rng: np.random.Generator, count: int, n: int = 512):
    """Unit-norm functions near and far from the Gaussian class."""
    fs = []
    for i in range(count):
        if i % 5 == 4:
            F = random_polynomial(rng, int(rng.integers(1, 7)))
        else:
            F = near_gaussian(rng, int(rng.integers(2, 7)), float(rng.uniform(0.02, 0.5)))
        fs.append(F)
    return fs


@_timed
def check_rearrangement(ctx: Context) -> Check:
    rng = ctx.rng(11)
    worst_ratio = math.inf
    worst_mu = math.inf
    bad_cross = 0
    worst_conv = math.inf
    worst_excess = -math.inf
    for F in profile_battery(rng, ctx.n(12)):
        p = C.profile(C.sample_density(F, C.default_grid(F, n=512)))
        worst_ratio = min(worst_ratio, C.ratio_margin(p))
        worst_mu = min(worst_mu, C.mu_lower_margin(p, np.linspace(0.01, 0.99, 50) * p.T_unit))
        if not p.degenerate and C.crossing_count(p, F) != 1:
            bad_cross += 1
        cv = C.convexity_G(p)
        worst_conv = min(worst_conv, cv.min_margin)
        worst_excess = max(worst_excess, cv.excess_margin)
    ok = worst_ratio >= 0 and worst_mu >= 0 and bad_cross == 0 and worst_conv >= 0 and worst_excess <= 0
    detail = (
        f"ratio margin {worst_ratio:.3g}; mu margin {worst_mu:.3g}; crossing failures {bad_cross}; "
        f"convexity margin {worst_conv:.3g}; excess margin {worst_excess:.3g}"
    )
    return Check("rearrangement", "monotone e^s u*(s), mu lower bound, single crossing, convex G", ok, worst_ratio, detail)


@_timed
def check_mu_peak(ctx: Context) -> Check:
    rng = ctx.rng(12)
    worst = 0.0
    for _ in range(ctx.n(8)):
        F = near_gaussian(rng, int(rng.integers(2, 6)), float(rng.uniform(0.05, 0.3)))
        p = C.profile(C.sample_density(F, C.default_grid(F, n=512)))
        if 1 - p.T_unit <= 0.05 and not p.degenerate:
            worst = max(worst, C.mu_peak_ratio(p))
    return Check("mu_peak", "near-peak distribution ratio bounded (finite ensemble constant)", math.isfinite(worst), worst)


@_timed
def check_superlevel(ctx: Context) -> Check:
    rng = ctx.rng(13)
    worst = math.inf
    for _ in range(ctx.n(6)):
        F = random_polynomial(rng, int(rng.integers(0, 7)))
        spec = C.GridSpec(C.default_radius(6), 384)
        g = C.sample_density(F, spec)
        m = C.random_mask(spec, rng)
        r = C.deficit(F, m, g)
        worst = min(worst, r.deficit - r.superlevel_deficit + r.quad_err)
    return Check("superlevel", "super-level sets minimize the deficit at fixed measure", worst >= 0, worst)


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------


@_timed
def check_asymmetry(ctx: Context) -> Check:
    spec = C.GridSpec(3.0, 512)
    bad = []
    for area in (0.5, 1.0, 2.0):
        a = Geo.fraenkel_asymmetry(C.disc_mask(spec, 0.3 - 0.2j, area=area))
        if a.A > a.slack:
            bad.append(area)
    m = C.random_mask(spec, ctx.rng(20), area=1.0, max_offset=0.5)
    shifted = C.RegionMask(spec, np.roll(np.roll(m.cells, 17, axis=0), -9, axis=1))
    a1, a2 = Geo.fraenkel_asymmetry(m).A, Geo.fraenkel_asymmetry(shifted).A
    ok = not bad and abs(a1 - a2) <= 1e-12
    return Check("asymmetry", "discs have zero asymmetry up to slack; translation invariance", ok, abs(a1 - a2), f"failing areas {bad}")


@_timed
def check_shapes(ctx: Context) -> Check:
    fails = []
    for eps in (0.05, 0.02, 0.01):
        F = S.perturbed_gaussian(eps).normalized()
        mx = C.global_max(F)
        for frac in np.linspace(0.8, 0.99, 5):
            g = Geo.trace_level_set(F, frac * mx.T, mx.argmax, 128, rmax=3.0)
            sc = Geo.shape_checks(g)
            if not (sc.star_shaped and sc.convex):
                fails.append((eps, round(float(frac), 3)))
        for s in (0.5, 1.0, 2.0):
            g, _ = S.superlevel_polar(F, s, mx.argmax, m=128)
            sc = Geo.shape_checks(g)
            if not (sc.star_shaped and sc.convex):
                fails.append((eps, s))
    return Check("shapes", "super-level sets of 1 + eps z^2 are star-shaped and convex", not fails, len(fails), str(fails))


@_timed
def check_radial(ctx: Context) -> Check:
    fails = []
    for eps in (0.02, 0.01, 0.005):
        F = S.perturbed_gaussian(eps).normalized()
        mx = C.global_max(F)
        if not Geo.radial_monotone(F, mx.argmax, 0.2 * math.sqrt(math.log(1 / eps)), rays=32):
            fails.append(eps)
    return Check("radial", "u decreases along rays from its maximum", not fails, len(fails), str(fails))


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------


def kern_battery(rng: np.random.Generator, count: int):
    fs = [make_fock(1, [1.0]), kernel_function(0.3 + 0.4j), S.perturbed_gaussian(0.1).normalized()]
    while len(fs) < count:
        k = len(fs) % 3
        if k == 0:
            fs.append(near_gaussian(rng, int(rng.integers(2, 7)), float(rng.uniform(0.01, 0.6))))
        elif k == 1:
            fs.append(random_polynomial(rng, int(rng.integers(1, 6))))
        else:
            z0 = complex(*rng.uniform(-1, 1, 2))
            base = kernel_function(z0, 48)
            fs.append((base + near_gaussian(rng, 4, float(rng.uniform(0.02, 0.3)))).normalized())
    return fs[:count]


@_timed
def check_kern(ctx: Context) -> Check:
    worst = 0.0
    for F in kern_battery(ctx.rng(30), ctx.n(20)):
        d = S.gaussian_distance(F)
        worst = max(worst, abs(d.closed - d.direct) / max(d.closed, 1e-6))
    return Check("kern", "closed-form distance 2(1-sqrt T) equals the direct minimum", worst <= ctx.t("kern"), worst)


@_timed
def check_function_stability(ctx: Context) -> Check:
    rng = ctx.rng(31)
    spec = C.GridSpec(C.default_radius(6), 384)
    worst = 0.0
    for _ in range(ctx.n(10)):
        F = near_gaussian(rng, int(rng.integers(2, 6)), float(rng.uniform(0.02, 0.3)))
        m = C.random_mask(spec, rng, max_offset=0.3)
        rep = S.stability_report(F, m)
        if math.isfinite(rep.ratio) and rep.deficit > 10 * rep.quad_err:
            worst = max(worst, rep.ratio)
    return Check("function_stability", "distance / sqrt(e^|Omega| deficit) bounded (finite ensemble constant)", math.isfinite(worst), worst)


@_timed
def check_slope(ctx: Context) -> Check:
    res = S.sharpness_sweep(1.0, [0.05, 0.035, 0.025, 0.0175], workers=ctx.workers)
    return Check("exponent", "log distance vs log deficit has slope 1/2", abs(res.slope - 0.5) <= ctx.t("slope"), res.slope)


@_timed
def check_negdef(ctx: Context) -> Check:
    rng = ctx.rng(32)
    worst = -math.inf
    eq_ok = True
    for _ in range(ctx.n(100)):
        N = int(rng.integers(2, 13))
        a = rng.standard_normal(N + 1) + 1j * rng.standard_normal(N + 1)
        a[:2] = 0
        G = make_fock(1, a)
        s = float(rng.uniform(0.05, 10))
        val = S.second_variation(G, s, ctx.vfunc)
        bound = -s * math.exp(-s) * G.norm_sq()
        worst = max(worst, val - bound)
        if np.sum(np.abs(a[3:]) ** 2) > 1e-6 and not val < bound:
            eq_ok = False
    for s in (0.1, 1.0, 5.0):
        v = S.second_variation(make_fock(1, [0, 0, 1.0]), s, ctx.vfunc)
        eq_ok &= abs(v + s * math.exp(-s)) <= 1e-12
    ok = worst <= ctx.t("negdef") and eq_ok
    return Check("negdef", "second variation <= -s e^{-s} |G|^2, equality only on e_2", ok, worst)


@_timed
def check_lambda(ctx: Context) -> Check:
    rng = ctx.rng(33)
    spec = C.GridSpec(4.0, 256)
    worst = -math.inf
    for _ in range(ctx.n(30)):
        m = C.random_mask(spec, rng)
        p = S.top_eigenpair(S.localization_matrix(m, 24), m)
        worst = max(worst, p.value - C.fk_bound(m.measure) - p.err)
    return Check("lambda_bound", "top localization eigenvalue <= 1 - e^{-|Omega|}", worst <= 0, worst)


# ---------------------------------------------------------------------------
# highdim
# ---------------------------------------------------------------------------


@_timed
def check_fk_d1(ctx: Context) -> Check:
    a = np.logspace(-8, 1.5, 200)
    worst = max(abs(H.fk_bound_d(x, 1) - C.fk_bound(x)) / C.fk_bound(x) for x in a)
    return Check("fk_d1", "d-dimensional bound reduces to 1 - e^{-s} for d = 1", worst <= 1e-13, worst)


@_timed
def check_estar(ctx: Context) -> Check:
    s = np.linspace(0.0, 10.0, 2001)
    ok = True
    for d in (1, 2, 3):
        e = H.e_star(s, d)
        ok &= bool(np.all(np.diff(e) < 0) and np.all(np.diff(e, 2) >= -1e-15))
    return Check("e_star", "e*(s) decreasing and convex", ok, 0.0)


@_timed
def check_fk_d(ctx: Context) -> Check:
    mc = H.MCSpec(ctx.n(200_000) if ctx.scale >= 0.05 else 10_000, seed=ctx.seed, streams=4, workers=ctx.workers)
    rng = ctx.rng(40)
    worst = -math.inf
    for i in range(ctx.n(6)):
        d = 2 + (i % 2)
        idx = [tuple(int(v) for v in row) for row in np.eye(d, dtype=int) * 2]
        coeffs = {(0,) * d: 1.0}
        for a in idx:
            coeffs[a] = complex(*rng.normal(0, 0.1, 2))
        F = make_fock(d, coeffs).normalized()
        c = rng.uniform(-0.3, 0.3, (d, 2))
        reg = H.ball(c, measure=float(rng.uniform(0.3, 2.0)), d=d) if i % 3 else H.product(c, rng.uniform(0.3, 0.8, d))
        r = H.deficit_d(F, reg, mc)
        worst = max(worst, -r.deficit - 3 * r.stderr)
    return Check("fk_d", "d-dimensional deficit >= -3 sigma", worst <= 0, worst)


SUITES = {
    "fock_core": [check_parseval, check_kernel_bound, check_reproducing],
    "transforms": [check_unitarity, check_bargmann_identity],
    "concentration": [check_fk, check_rearrangement, check_mu_peak, check_superlevel],
    "geometry": [check_asymmetry, check_shapes, check_radial],
    "stability": [check_kern, check_function_stability, check_slope, check_negdef, check_lambda],
    "highdim": [check_fk_d1, check_estar, check_fk_d],
}


def run_suites(ctx: Context, only=None, progress=None) -> dict:
    names = list(SUITES) if not only else list(only)
    for n in names:
        if n not in SUITES:
            raise ValueError(f"unknown suite {n!r}; choose from {', '.join(SUITES)}")
    out = {}
    for n in names:
        res = []
        for fn in SUITES[n]:
            r = fn(ctx)
            res.append(r)
            if progress:
                progress(n, r)
        out[n] = res
    return out
