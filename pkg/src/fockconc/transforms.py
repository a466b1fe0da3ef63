"""Signal side: Hermite expansion, Bargmann transform and the Gaussian STFT.

Only one-dimensional signals are handled.  The Hermite functions are
normalised so that the Bargmann transform sends h_k to the Fock basis
element e_k::

    h_k(t) = 2^(1/4) (2^k k!)^(-1/2) H_k(sqrt(2 pi) t) exp(-pi t^2)
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import roots_hermite

from .fock import FockFunction, evaluate, make_fock

RULES = ("gauss-hermite", "trapezoid")
DEFAULT_MODES = 24
DEFAULT_NODES = 129
DECAY_TOL = 1e-12


@dataclass(frozen=True)
class SampledSignal:
    nodes: np.ndarray
    values: np.ndarray
    rule: str = "trapezoid"

    def __post_init__(self):
        t = np.asarray(self.nodes, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.complex128)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("nodes and values must be 1-D arrays of equal length")
        if t.shape[0] < 8:
            raise ValueError(f"need at least 8 nodes, got {t.shape[0]}")
        if not np.all(np.diff(t) > 0):
            raise ValueError("nodes must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("signal contains non-finite samples")
        if self.rule not in RULES:
            raise ValueError(f"unknown quadrature rule {self.rule!r}; expected one of {RULES}")
        if self.rule == "gauss-hermite" and not np.allclose(t, -t[::-1], rtol=0, atol=1e-12):
            raise ValueError("Gauss-Hermite nodes must be symmetric about 0")
        object.__setattr__(self, "nodes", t)
        object.__setattr__(self, "values", v)

    def weights(self) -> np.ndarray:
        """Quadrature weights w_i with sum w_i g(t_i) ~ integral of g."""
        t = self.nodes
        if self.rule == "gauss-hermite":
            x, w = roots_hermite(t.shape[0])
            # nodes are x / sqrt(2 pi); weight exp(-x^2) is divided back out
            return w * np.exp(x * x) / math.sqrt(2.0 * math.pi)
        dt = np.diff(t)
        w = np.zeros_like(t)
        w[:-1] += 0.5 * dt
        w[1:] += 0.5 * dt
        return w


@dataclass(frozen=True)
class HermiteExpansion:
    coeffs: np.ndarray
    tail: float  # |c_N|^2 / sum |c_k|^2

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def gauss_hermite_nodes(n: int = DEFAULT_NODES) -> np.ndarray:
    x, _ = roots_hermite(n)
    return x / math.sqrt(2.0 * math.pi)


def sample(func, nodes=None, rule: str = "gauss-hermite") -> SampledSignal:
    """Sample a callable on Gauss-Hermite nodes (default) or on given nodes."""
    if nodes is None:
        nodes = gauss_hermite_nodes()
    nodes = np.asarray(nodes, dtype=np.float64)
    return SampledSignal(nodes, np.asarray(func(nodes), dtype=np.complex128), rule)


def hermite_functions(nmax: int, t) -> np.ndarray:
    """Array of shape (nmax+1, len(t)) holding h_0..h_nmax at t."""
    t = np.asarray(t, dtype=np.float64)
    x = math.sqrt(2.0 * math.pi) * t
    out = np.empty((nmax + 1,) + t.shape)
    out[0] = 2.0 ** 0.25 * np.exp(-math.pi * t * t)
    if nmax >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(1, nmax):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * x * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
        if not np.all(np.isfinite(out[k + 1])):
            raise OverflowError(f"Hermite recurrence overflowed at k={k + 1}")
    return out


def hermite_function(k: int, t) -> np.ndarray:
    return hermite_functions(k, t)[k]


def hermite_expand(f: SampledSignal, nmax: int = DEFAULT_MODES) -> HermiteExpansion:
    """Coefficients c_k = integral f(t) h_k(t) dt, k = 0..nmax, by quadrature."""
    if nmax < 0:
        raise ValueError("nmax must be >= 0")
    if f.nodes.shape[0] < 2 * nmax + 1:
        raise ValueError(f"need at least {2 * nmax + 1} nodes for {nmax} modes, got {f.nodes.shape[0]}")
    h = hermite_functions(nmax, f.nodes)
    c = h @ (f.weights() * f.values)
    total = float(np.sum(np.abs(c) ** 2))
    tail = float(abs(c[-1]) ** 2 / total) if total > 0 else 0.0
    return HermiteExpansion(c, tail)


def bargmann(e: HermiteExpansion) -> FockFunction:
    """Bargmann transform as the coefficient identity h_k -> e_k."""
    return make_fock(1, e.coeffs)


def gaussian_window(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    return 2.0 ** 0.25 * np.exp(-math.pi * t * t)


def _check_decay(f: SampledSignal):
    scale = max(float(np.max(np.abs(f.values))), 1e-300)
    edge = max(abs(f.values[0]), abs(f.values[-1])) / scale
    if edge > DECAY_TOL:
        raise ValueError(
            f"signal does not decay at the node extremes (relative edge value {edge:.2e}); widen the node window"
        )


def stft_gaussian(f: SampledSignal, x, omega):
    """V f(x, w) = integral exp(-2 pi i t w) f(t) phi(x - t) dt with the Gaussian window."""
    _check_decay(f)
    x = np.asarray(x, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    xb, wb = np.broadcast_arrays(x, omega)
    t = f.nodes
    wf = f.weights() * f.values
    phase = np.exp(-2j * math.pi * wb.reshape(-1, 1) * t[None, :])
    win = gaussian_window(xb.reshape(-1, 1) - t[None, :])
    out = (phase * win) @ wf
    out = out.reshape(xb.shape)
    return complex(out) if out.ndim == 0 else out


def bargmann_identity_residual(f: SampledSignal, points, nmax: int = DEFAULT_MODES) -> float:
    """max | |V f(x,-w)| - |Bf(x+iw)| exp(-pi(x^2+w^2)/2) | over the points."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    e = hermite_expand(f, nmax)
    if e.tail > 1e-10:
        raise ValueError(f"Hermite truncation tail {e.tail:.2e} exceeds 1e-10; raise nmax")
    F = bargmann(e)
    x, w = pts[:, 0], pts[:, 1]
    lhs = np.abs(stft_gaussian(f, x, -w))
    rhs = np.abs(evaluate(F, x + 1j * w)) * np.exp(-math.pi * (x * x + w * w) / 2.0)
    return float(np.max(np.abs(lhs - rhs)))


def read_signal_csv(path, rule: str | None = None) -> SampledSignal:
    """Read ``t,re,im`` rows; a leading ``# rule=<name>`` line selects the rule."""
    text = Path(path).read_text().splitlines()
    found_rule = None
    rows = []
    for line in text:
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            if "rule=" in s:
                found_rule = s.split("rule=", 1)[1].strip()
            continue
        rows.append(s)
    reader = csv.reader(rows)
    data = []
    for rec in reader:
        if rec and rec[0].strip() == "t":
            continue
        if len(rec) != 3:
            raise ValueError(f"expected t,re,im but got {rec!r}")
        data.append([float(v) for v in rec])
    arr = np.array(data, dtype=np.float64).reshape(-1, 3)
    return SampledSignal(arr[:, 0], arr[:, 1] + 1j * arr[:, 2], rule or found_rule or "trapezoid")


def write_signal_csv(f: SampledSignal, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# rule={f.rule}\n")
        w = csv.writer(fh)
        w.writerow(["t", "re", "im"])
        for t, v in zip(f.nodes, f.values):
            w.writerow([f"{t:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])
