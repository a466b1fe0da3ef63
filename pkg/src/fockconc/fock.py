"""Truncated Fock-space functions on C^d.

A :class:`FockFunction` stores coefficients with respect to the orthonormal
monomial basis ``e_a(z) = (pi^|a| / a!)^(1/2) z^a`` of the Fock space
``F^2(C^d)`` (Gaussian weight ``exp(-pi |z|^2)``).  In one dimension the
coefficients are held densely; for ``d >= 2`` only the supplied multi-indices
are kept.
"""
from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.special import gammainc, gammaln

from . import kernels

DEFAULT_DEGREE_1D = 32
DEFAULT_DEGREE_ND = 12
KERNEL_TAIL_TOL = 1e-12


def basis_scale(indices: np.ndarray) -> np.ndarray:
    """(pi^|a| / a!)^(1/2) for each row of an integer index array."""
    indices = np.atleast_2d(indices)
    tot = indices.sum(axis=1)
    logf = gammaln(indices + 1.0).sum(axis=1)
    return np.exp(0.5 * (tot * math.log(math.pi) - logf))


@dataclass(frozen=True, eq=False)
class FockFunction:
    """Finite expansion ``sum_a values[a] e_a`` in ``F^2(C^dim)``."""

    dim: int
    indices: np.ndarray  # (K, dim) int64, unique rows
    values: np.ndarray  # (K,) complex128
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.indices.setflags(write=False)
        self.values.setflags(write=False)
        object.__setattr__(
            self, "_lookup", {tuple(int(x) for x in row): j for j, row in enumerate(self.indices)}
        )

    @property
    def max_degree(self) -> int:
        if self.indices.shape[0] == 0:
            return 0
        return int(self.indices.sum(axis=1).max())

    def coeff(self, alpha) -> complex:
        if isinstance(alpha, (int, np.integer)):
            alpha = (int(alpha),)
        j = self._lookup.get(tuple(alpha))
        return complex(self.values[j]) if j is not None else 0.0j

    def items(self):
        for row, v in zip(self.indices, self.values):
            yield tuple(int(x) for x in row), complex(v)

    def dense(self) -> np.ndarray:
        """Coefficient vector a_0..a_N (one dimension only)."""
        if self.dim != 1:
            raise ValueError("dense coefficient vectors exist only for dim=1")
        out = np.zeros(self.max_degree + 1, dtype=np.complex128)
        out[self.indices[:, 0]] = self.values
        return out

    def monomial_coeffs(self) -> np.ndarray:
        """Power-series coefficients b_k = a_k (pi^k/k!)^(1/2) (dim=1)."""
        a = self.dense()
        return a * basis_scale(np.arange(a.shape[0])[:, None])

    def norm_sq(self) -> float:
        return float(np.sum(self.values.real ** 2 + self.values.imag ** 2))

    def scaled(self, c: complex) -> "FockFunction":
        return FockFunction(self.dim, self.indices.copy(), self.values * c)

    def normalized(self) -> "FockFunction":
        nrm = math.sqrt(self.norm_sq())
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero function")
        return self.scaled(1.0 / nrm)

    def __add__(self, other: "FockFunction") -> "FockFunction":
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        acc: dict = {}
        for a, v in itertools.chain(self.items(), other.items()):
            acc[a] = acc.get(a, 0.0) + v
        return make_fock(self.dim, acc)

    def __call__(self, z):
        return evaluate(self, z)


def make_fock(dim: int, coeffs) -> FockFunction:
    """Validate coefficients and build a :class:`FockFunction`.

    ``coeffs`` is either a sequence (dim=1, entry k is the coefficient of
    e_k) or a mapping from an index (int for dim=1, tuple of length dim
    otherwise) to a complex number.
    """
    if int(dim) != dim or dim < 1:
        raise ValueError(f"dim must be a positive integer, got {dim!r}")
    dim = int(dim)
    if isinstance(coeffs, Mapping):
        pairs = list(coeffs.items())
    else:
        if dim != 1:
            raise ValueError("sequence coefficients are only accepted for dim=1; pass a mapping")
        pairs = list(enumerate(coeffs))
    idx_rows = []
    vals = []
    seen = set()
    for key, val in pairs:
        if isinstance(key, (int, np.integer)):
            key = (int(key),)
        key = tuple(int(k) for k in key)
        if len(key) != dim:
            raise ValueError(f"index {key} has length {len(key)}, expected {dim}")
        if any(k < 0 for k in key):
            raise ValueError(f"negative multi-index {key}")
        if key in seen:
            raise ValueError(f"duplicate multi-index {key}")
        seen.add(key)
        v = complex(val)
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise ValueError(f"non-finite coefficient at index {key[0] if dim == 1 else key}: {val!r}")
        idx_rows.append(key)
        vals.append(v)
    if not idx_rows:
        idx_rows, vals = [(0,) * dim], [0.0]
    indices = np.array(idx_rows, dtype=np.int64).reshape(-1, dim)
    values = np.array(vals, dtype=np.complex128)
    if dim == 1:
        # dense storage: every degree 0..N present
        n = int(indices.max())
        dense = np.zeros(n + 1, dtype=np.complex128)
        dense[indices[:, 0]] = values
        indices = np.arange(n + 1, dtype=np.int64)[:, None]
        values = dense
    else:
        order = np.lexsort(indices.T[::-1])
        order = order[np.argsort(indices[order].sum(axis=1), kind="stable")]
        indices, values = indices[order], values[order]
    return FockFunction(dim, np.ascontiguousarray(indices), np.ascontiguousarray(values))


def monomial(k, dim: int = 1) -> FockFunction:
    """The basis element e_k (k an int or a multi-index)."""
    return make_fock(dim, {k: 1.0})


def _as_points(F: FockFunction, z):
    z = np.asarray(z, dtype=np.complex128)
    if F.dim == 1:
        return z
    if z.shape[-1] != F.dim:
        raise ValueError(f"points must have trailing dimension {F.dim}")
    return z


def evaluate(F: FockFunction, z):
    """F(z); scalar in, scalar out.  For dim>=2 the last axis of z holds coordinates."""
    pts = _as_points(F, z)
    if F.dim == 1:
        out = kernels.poly_eval(F.monomial_coeffs(), pts.real, pts.imag)
    else:
        flat = pts.reshape(-1, F.dim)
        coef = F.values * basis_scale(F.indices)
        out = kernels.multi_eval(F.indices, coef, flat.real, flat.imag).reshape(pts.shape[:-1])
    if np.ndim(out) == 0:
        return complex(out)
    return out


def density(F: FockFunction, z):
    """u_F(z) = |F(z)|^2 exp(-pi |z|^2)."""
    pts = _as_points(F, z)
    val = evaluate(F, pts)
    r2 = np.abs(pts) ** 2 if F.dim == 1 else np.sum(np.abs(pts) ** 2, axis=-1)
    out = np.abs(val) ** 2 * np.exp(-np.pi * r2)
    return float(out) if np.ndim(out) == 0 else out


def derivatives(F: FockFunction, z):
    """(F, F', F'') at z for dim=1."""
    b = F.monomial_coeffs()
    k = np.arange(b.shape[0])
    b1 = (b * k)[1:] if b.shape[0] > 1 else np.zeros(1, complex)
    b2 = (b * k * (k - 1))[2:] if b.shape[0] > 2 else np.zeros(1, complex)
    zr, zi = np.real(z), np.imag(z)
    return (
        kernels.poly_eval(b, zr, zi),
        kernels.poly_eval(b1, zr, zi),
        kernels.poly_eval(b2, zr, zi),
    )


def inner(F: FockFunction, G: FockFunction) -> complex:
    """<F, G> = sum_a a_a conj(b_a)."""
    if F.dim != G.dim:
        raise ValueError(f"dimension mismatch: {F.dim} vs {G.dim}")
    if F.dim == 1:
        a, b = F.dense(), G.dense()
        m = min(a.shape[0], b.shape[0])
        return complex(np.sum(a[:m] * np.conj(b[:m])))
    total = 0.0j
    for alpha, v in F.items():
        total += v * np.conj(G.coeff(alpha))
    return complex(total)


def norm(F: FockFunction) -> float:
    return math.sqrt(F.norm_sq())


def multi_indices(dim: int, max_degree: int) -> np.ndarray:
    """All multi-indices with |a| <= max_degree, graded then lexicographic."""
    rows = []
    for tot in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(dim), tot):
            a = [0] * dim
            for i in combo:
                a[i] += 1
            rows.append(a)
    out = np.array(rows, dtype=np.int64).reshape(-1, dim)
    # combinations_with_replacement yields reverse-lex within a degree; sort for stability
    order = np.lexsort(np.vstack([out.T[::-1], out.sum(axis=1)]))
    return out[order]


def kernel_tail(z0, max_degree: int) -> float:
    """Mass of the normalized kernel F_{z0} beyond total degree max_degree."""
    x = math.pi * float(np.sum(np.abs(np.atleast_1d(np.asarray(z0, dtype=complex))) ** 2))
    if x == 0.0:
        return 0.0
    return float(gammainc(max_degree + 1, x))


def kernel_degree(z0, tol: float = 1e-16, floor: int = 0) -> int:
    """Smallest truncation degree whose kernel tail mass is at most ``tol``."""
    n = max(int(floor), 0)
    while kernel_tail(z0, n) > tol:
        n += 1
    return n


def kernel_function(z0, max_degree: int | None = None) -> FockFunction:
    """Truncation of F_{z0}(z) = exp(-pi|z0|^2/2) exp(pi z . conj(z0)).

    ``z0`` is a complex scalar (dim=1) or a length-d sequence.  Raises
    ValueError when the discarded tail mass exceeds 1e-12.
    """
    z0 = np.atleast_1d(np.asarray(z0, dtype=np.complex128))
    dim = z0.shape[0]
    if not np.all(np.isfinite(z0)):
        raise ValueError("kernel centre must be finite")
    if max_degree is None:
        max_degree = DEFAULT_DEGREE_1D if dim == 1 else DEFAULT_DEGREE_ND
    tail = kernel_tail(z0, max_degree)
    if tail > KERNEL_TAIL_TOL:
        need = kernel_degree(z0, KERNEL_TAIL_TOL, floor=max_degree)
        raise ValueError(
            f"kernel tail mass {tail:.3e} exceeds {KERNEL_TAIL_TOL:g} at degree {max_degree}; "
            f"use max_degree >= {need}"
        )
    idx = multi_indices(dim, max_degree)
    pref = math.exp(-0.5 * math.pi * float(np.sum(np.abs(z0) ** 2)))
    cz = np.conj(z0)
    powers = np.prod(cz[None, :] ** idx, axis=1)
    vals = pref * basis_scale(idx) * powers
    if dim == 1:
        return make_fock(1, vals)
    return make_fock(dim, {tuple(int(x) for x in row): v for row, v in zip(idx, vals)})


def quadrature_norm_sq(F: FockFunction, R: float = 6.0, n: int = 512) -> float:
    """Midpoint-rule integral of u_F over [-R, R]^2 (dim=1)."""
    if F.dim != 1:
        raise ValueError("plane quadrature is implemented for dim=1")
    h = 2.0 * R / n
    xs = -R + h * (np.arange(n) + 0.5)
    u = kernels.density_grid(F.monomial_coeffs(), xs, xs)
    return float(u.sum() * h * h)


# ---------------------------------------------------------------------------
# text format: "fock v1 d N" then "a_1 ... a_d re im"
# ---------------------------------------------------------------------------

def dumps(F: FockFunction) -> str:
    buf = io.StringIO()
    buf.write(f"fock v1 {F.dim} {F.max_degree}\n")
    for alpha, v in F.items():
        idx = " ".join(str(a) for a in alpha)
        buf.write(f"{idx} {v.real:.17g} {v.imag:.17g}\n")
    return buf.getvalue()


def loads(text: str) -> FockFunction:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError("empty fock file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "fock" or head[1] != "v1":
        raise ValueError(f"bad fock header: {lines[0]!r}")
    try:
        dim, nmax = int(head[2]), int(head[3])
    except ValueError as exc:
        raise ValueError(f"bad fock header: {lines[0]!r}") from exc
    coeffs = {}
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != dim + 2:
            raise ValueError(f"bad fock line (expected {dim + 2} fields): {ln!r}")
        alpha = tuple(int(p) for p in parts[:dim])
        if sum(alpha) > nmax:
            raise ValueError(f"index {alpha} exceeds declared degree {nmax}")
        coeffs[alpha] = complex(float(parts[dim]), float(parts[dim + 1]))
    return make_fock(dim, coeffs)


def save(F: FockFunction, path) -> None:
    Path(path).write_text(dumps(F))


def load(path) -> FockFunction:
    return loads(Path(path).read_text())


def random_polynomial(rng: np.random.Generator, max_degree: int, dim: int = 1) -> FockFunction:
    """Unit-norm function with i.i.d. complex Gaussian coefficients up to max_degree."""
    idx = multi_indices(dim, max_degree)
    vals = rng.standard_normal(idx.shape[0]) + 1j * rng.standard_normal(idx.shape[0])
    vals /= np.linalg.norm(vals)
    if dim == 1:
        return make_fock(1, vals)
    return make_fock(dim, {tuple(int(x) for x in row): v for row, v in zip(idx, vals)})


def near_gaussian(rng: np.random.Generator, max_degree: int, scale: float) -> FockFunction:
    """Unit-norm 1 + scale * (random tail of degree 2..max_degree), dim=1."""
    k = max(max_degree - 1, 1)
    tail = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    tail *= scale / np.linalg.norm(tail)
    vals = np.concatenate([[1.0, 0.0], tail])
    return make_fock(1, vals).normalized()


def pad_to(F: FockFunction, n: int) -> np.ndarray:
    """Dense dim=1 coefficient vector padded/truncated to length n+1."""
    a = F.dense()
    out = np.zeros(n + 1, dtype=np.complex128)
    m = min(n + 1, a.shape[0])
    out[:m] = a[:m]
    return out


__all__ = [
    "FockFunction",
    "make_fock",
    "monomial",
    "evaluate",
    "density",
    "derivatives",
    "inner",
    "norm",
    "kernel_function",
    "kernel_tail",
    "kernel_degree",
    "multi_indices",
    "quadrature_norm_sq",
    "dumps",
    "loads",
    "save",
    "load",
    "random_polynomial",
    "near_gaussian",
]
