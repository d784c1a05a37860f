"""Exterior algebra of R^n and the super tensor product of two copies of it.

Basis monomials are encoded as bitmasks: bit ``i - 1`` set means ``e^i`` is a
factor, always in ascending order.  An :class:`ExteriorElement` stores a dense
coefficient vector of length ``2**n``; a :class:`BiForm` stores a
``(2**n, 2**n)`` array whose entry ``[A, B]`` is the coefficient of
``e^A (x) e^B``.

The product routines also accept stacked coefficient arrays (leading batch
axes), which is how the integrand is evaluated at many quadrature nodes at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_DIM = 8


def _check_dim(n: int) -> None:
    if not 1 <= n <= MAX_DIM:
        raise ValueError(f"dimension must be in 1..{MAX_DIM}, got {n}")


@lru_cache(maxsize=None)
def popcounts(n: int) -> np.ndarray:
    """Number of set bits of every mask below ``2**n``."""
    masks = np.arange(1 << n)
    out = np.zeros(1 << n, dtype=np.int64)
    for bit in range(n):
        out += (masks >> bit) & 1
    return out


@lru_cache(maxsize=None)
def wedge_signs(n: int) -> np.ndarray:
    """``S[A, C]`` with ``e^A ^ e^C = S[A, C] e^(A|C)``; zero when A, C overlap."""
    masks = np.arange(1 << n)
    A = masks[:, None]
    C = masks[None, :]
    # parity of the number of pairs (a in A, c in C) with a > c
    inversions = np.zeros((1 << n, 1 << n), dtype=np.int64)
    pc = popcounts(n)
    for bit in range(n):
        has = (C >> bit) & 1
        inversions += has * pc[A >> (bit + 1)]
    signs = np.where(inversions % 2 == 0, 1, -1).astype(np.int8)
    signs[(A & C) != 0] = 0
    signs.flags.writeable = False
    return signs


def mask_of(indices: Iterable[int]) -> int:
    """Bitmask of a set of 1-based indices (order is ignored)."""
    mask = 0
    for i in indices:
        if i < 1:
            raise ValueError("basis indices are 1-based")
        mask |= 1 << (i - 1)
    return mask


def indices_of(mask: int) -> tuple[int, ...]:
    """Ascending 1-based indices contained in ``mask``."""
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def ordered_sign(indices: Sequence[int]) -> int:
    """Sign of ``e^{i1} ^ ... ^ e^{ik}`` relative to the ascending monomial; 0 on repeats."""
    if len(set(indices)) != len(indices):
        return 0
    inv = 0
    for a in range(len(indices)):
        for b in range(a + 1, len(indices)):
            if indices[a] > indices[b]:
                inv += 1
    return -1 if inv % 2 else 1


def _support(flat: np.ndarray) -> np.ndarray:
    if flat.ndim == 1:
        return np.flatnonzero(flat)
    return np.flatnonzero(np.any(flat != 0, axis=tuple(range(flat.ndim - 1))))


def _scatter_sum(prod: np.ndarray, target: np.ndarray, size: int) -> np.ndarray:
    """Sum the columns of ``prod`` into ``size`` output columns by ``target`` index."""
    out = np.zeros(prod.shape[:-1] + (size,))
    if target.size == 0:
        return out
    order = np.argsort(target, kind="stable")
    t_sorted = target[order]
    starts = np.flatnonzero(np.r_[True, t_sorted[1:] != t_sorted[:-1]])
    sums = np.add.reduceat(prod[..., order], starts, axis=-1)
    out[..., t_sorted[starts]] = sums
    return out


def wedge_arrays(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Wedge product on coefficient arrays of shape ``(..., 2**n)`` (broadcasting)."""
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    sa, sb = _support(a), _support(b)
    I, J = np.meshgrid(sa, sb, indexing="ij")
    I, J = I.ravel(), J.ravel()
    sign = wedge_signs(n)[I, J]
    keep = sign != 0
    I, J, sign = I[keep], J[keep], sign[keep]
    prod = a[..., I] * b[..., J] * sign
    return _scatter_sum(prod, I | J, 1 << n)


def bimul_arrays(x: np.ndarray, y: np.ndarray, n: int) -> np.ndarray:
    """Super tensor product on arrays of shape ``(..., 2**n, 2**n)``.

    ``(a (x) b)(c (x) d) = (-1)^(deg b * deg c) (a ^ c) (x) (b ^ d)``.
    """
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    size = 1 << n
    batch = x.shape[:-2]
    fx = x.reshape(batch + (size * size,))
    fy = y.reshape(batch + (size * size,))
    sx, sy = _support(fx), _support(fy)
    I, J = np.meshgrid(sx, sy, indexing="ij")
    I, J = I.ravel(), J.ravel()
    A, B = I >> n, I & (size - 1)
    C, D = J >> n, J & (size - 1)
    ws = wedge_signs(n)
    pc = popcounts(n)
    sign = ws[A, C].astype(np.int64) * ws[B, D] * np.where((pc[B] * pc[C]) % 2, -1, 1)
    keep = sign != 0
    I, J, sign = I[keep], J[keep], sign[keep]
    target = ((A[keep] | C[keep]) << n) | (B[keep] | D[keep])
    prod = fx[..., I] * fy[..., J] * sign
    return _scatter_sum(prod, target, size * size).reshape(batch + (size, size))


@dataclass(frozen=True, eq=False)
class ExteriorElement:
    """Element of the exterior algebra of R^dim."""

    dim: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        _check_dim(self.dim)
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (1 << self.dim,):
            raise ValueError(f"expected {1 << self.dim} coefficients, got shape {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, dim: int) -> ExteriorElement:
        return cls(dim, np.zeros(1 << dim))

    @classmethod
    def scalar(cls, dim: int, value: float = 1.0) -> ExteriorElement:
        c = np.zeros(1 << dim)
        c[0] = value
        return cls(dim, c)

    @classmethod
    def basis(cls, dim: int, *indices: int, coeff: float = 1.0) -> ExteriorElement:
        """``coeff * e^{i1} ^ e^{i2} ^ ...`` for 1-based indices in any order."""
        c = np.zeros(1 << dim)
        sign = ordered_sign(indices)
        if any(i > dim for i in indices):
            raise ValueError(f"index out of range for dimension {dim}")
        c[mask_of(indices)] = sign * coeff
        return cls(dim, c)

    @classmethod
    def vector(cls, v: Sequence[float]) -> ExteriorElement:
        v = np.asarray(v, float)
        c = np.zeros(1 << len(v))
        c[1 << np.arange(len(v))] = v
        return cls(len(v), c)

    @classmethod
    def from_dict(cls, dim: int, terms: Mapping[tuple[int, ...], float]) -> ExteriorElement:
        c = np.zeros(1 << dim)
        for idx, val in terms.items():
            c[mask_of(idx)] += ordered_sign(idx) * val
        return cls(dim, c)

    def to_dict(self, tol: float = 0.0) -> dict[tuple[int, ...], float]:
        return {indices_of(m): float(v) for m, v in enumerate(self.coeffs) if abs(v) > tol}

    def degree_part(self, k: int) -> ExteriorElement:
        keep = popcounts(self.dim) == k
        return ExteriorElement(self.dim, np.where(keep, self.coeffs, 0.0))

    def is_even(self, tol: float = 0.0) -> bool:
        odd = popcounts(self.dim) % 2 == 1
        return bool(np.all(np.abs(self.coeffs[odd]) <= tol))

    def allclose(self, other: ExteriorElement, atol: float = 1e-12) -> bool:
        return self.dim == other.dim and np.allclose(self.coeffs, other.coeffs, rtol=0, atol=atol)

    def __add__(self, other: ExteriorElement) -> ExteriorElement:
        _same_dim(self, other)
        return ExteriorElement(self.dim, self.coeffs + other.coeffs)

    def __sub__(self, other: ExteriorElement) -> ExteriorElement:
        _same_dim(self, other)
        return ExteriorElement(self.dim, self.coeffs - other.coeffs)

    def __neg__(self) -> ExteriorElement:
        return ExteriorElement(self.dim, -self.coeffs)

    def __mul__(self, s: float) -> ExteriorElement:
        return ExteriorElement(self.dim, self.coeffs * s)

    __rmul__ = __mul__

    def __xor__(self, other: ExteriorElement) -> ExteriorElement:
        return wedge(self, other)


def _same_dim(a, b) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def wedge(a: ExteriorElement, b: ExteriorElement) -> ExteriorElement:
    """Exterior product ``a ^ b``."""
    _same_dim(a, b)
    return ExteriorElement(a.dim, wedge_arrays(a.coeffs, b.coeffs, a.dim))


@dataclass(frozen=True, eq=False)
class BiForm:
    """Element of the super tensor product of two copies of the exterior algebra."""

    dim: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        _check_dim(self.dim)
        size = 1 << self.dim
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (size, size):
            raise ValueError(f"expected shape {(size, size)}, got {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, dim: int) -> BiForm:
        size = 1 << dim
        return cls(dim, np.zeros((size, size)))

    @classmethod
    def unit(cls, dim: int) -> BiForm:
        size = 1 << dim
        c = np.zeros((size, size))
        c[0, 0] = 1.0
        return cls(dim, c)

    @classmethod
    def basis(cls, dim: int, left: Sequence[int], right: Sequence[int], coeff: float = 1.0) -> BiForm:
        """``coeff * (e^left) (x) (e^right)`` with 1-based index tuples in any order."""
        size = 1 << dim
        c = np.zeros((size, size))
        if any(i > dim for i in (*left, *right)):
            raise ValueError(f"index out of range for dimension {dim}")
        c[mask_of(left), mask_of(right)] = ordered_sign(left) * ordered_sign(right) * coeff
        return cls(dim, c)

    @classmethod
    def tensor(cls, a: ExteriorElement, b: ExteriorElement) -> BiForm:
        _same_dim(a, b)
        return cls(a.dim, np.outer(a.coeffs, b.coeffs))

    @classmethod
    def vol_vol(cls, dim: int) -> BiForm:
        top = tuple(range(1, dim + 1))
        return cls.basis(dim, top, top)

    def to_dict(self, tol: float = 0.0) -> dict[tuple[tuple[int, ...], tuple[int, ...]], float]:
        A, B = np.nonzero(np.abs(self.coeffs) > tol)
        return {(indices_of(a), indices_of(b)): float(self.coeffs[a, b]) for a, b in zip(A, B)}

    def allclose(self, other: BiForm, atol: float = 1e-12) -> bool:
        return self.dim == other.dim and np.allclose(self.coeffs, other.coeffs, rtol=0, atol=atol)

    def __add__(self, other: BiForm) -> BiForm:
        _same_dim(self, other)
        return BiForm(self.dim, self.coeffs + other.coeffs)

    def __sub__(self, other: BiForm) -> BiForm:
        _same_dim(self, other)
        return BiForm(self.dim, self.coeffs - other.coeffs)

    def __neg__(self) -> BiForm:
        return BiForm(self.dim, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, BiForm):
            return biform_mul(self, other)
        return BiForm(self.dim, self.coeffs * other)

    def __rmul__(self, s: float) -> BiForm:
        return BiForm(self.dim, self.coeffs * s)


def biform_mul(x: BiForm, y: BiForm) -> BiForm:
    """Product in the super tensor algebra (Koszul sign rule)."""
    _same_dim(x, y)
    return BiForm(x.dim, bimul_arrays(x.coeffs, y.coeffs, x.dim))


def bipower_arrays(x: np.ndarray, k: int, n: int) -> np.ndarray:
    """``x**k`` for stacked bi-forms."""
    if k == 0:
        out = np.zeros(np.shape(x))
        out[..., 0, 0] = 1.0
        return out
    out = np.asarray(x, float)
    for _ in range(k - 1):
        out = bimul_arrays(out, x, n)
    return out


def biexp_arrays(x: np.ndarray, n: int) -> np.ndarray:
    """Terminating exponential series of nilpotent stacked bi-forms."""
    if np.any(x[..., 0, 0] != 0):
        raise ValueError("bi-form exponential needs a zero (0,0)-part; factor the scalar out first")
    out = np.zeros(x.shape)
    out[..., 0, 0] = 1.0
    term = out
    for k in range(1, n + 1):
        term = bimul_arrays(term, x, n) / k
        if not np.any(term):
            break
        out = out + term
    return out


def biform_exp(x: BiForm) -> BiForm:
    """``sum_k x^k / k!`` for a bi-form without scalar part; finite since x is nilpotent."""
    return BiForm(x.dim, biexp_arrays(x.coeffs, x.dim))


def top_pairing(x: BiForm) -> float:
    """Coefficient of ``vol (x) vol``."""
    return float(x.coeffs[-1, -1])


def part(x: BiForm, k: int, l: int) -> BiForm:
    """The (k, l) multidegree component."""
    if not (0 <= k <= x.dim and 0 <= l <= x.dim):
        raise ValueError(f"degrees ({k}, {l}) out of range for dimension {x.dim}")
    pc = popcounts(x.dim)
    keep = (pc[:, None] == k) & (pc[None, :] == l)
    return BiForm(x.dim, np.where(keep, x.coeffs, 0.0))


class EvenFormMatrix:
    """Square matrix whose entries are even-degree exterior forms.

    Even forms commute, so this is a matrix algebra over a commutative ring.
    ``entries`` has shape ``(size, size, 2**dim)``.
    """

    def __init__(self, entries: np.ndarray, dim: int, check: bool = True):
        _check_dim(dim)
        entries = np.array(entries, dtype=float)
        if entries.ndim != 3 or entries.shape[0] != entries.shape[1] or entries.shape[2] != 1 << dim:
            raise ValueError(f"bad entry array shape {entries.shape} for form dimension {dim}")
        if check:
            odd = popcounts(dim) % 2 == 1
            if np.any(entries[..., odd] != 0):
                raise ValueError("EvenFormMatrix entries must have no odd-degree part")
        self.entries = entries
        self.dim = dim

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_elements(cls, rows: Sequence[Sequence[ExteriorElement]]) -> EvenFormMatrix:
        dim = rows[0][0].dim
        return cls(np.array([[e.coeffs for e in row] for row in rows]), dim)

    @classmethod
    def identity(cls, size: int, dim: int) -> EvenFormMatrix:
        e = np.zeros((size, size, 1 << dim))
        e[np.arange(size), np.arange(size), 0] = 1.0
        return cls(e, dim, check=False)

    def __getitem__(self, ij) -> ExteriorElement:
        return ExteriorElement(self.dim, self.entries[ij])

    def __add__(self, other: EvenFormMatrix) -> EvenFormMatrix:
        return EvenFormMatrix(self.entries + other.entries, self.dim, check=False)

    def __sub__(self, other: EvenFormMatrix) -> EvenFormMatrix:
        return EvenFormMatrix(self.entries - other.entries, self.dim, check=False)

    def scale(self, s: float) -> EvenFormMatrix:
        return EvenFormMatrix(self.entries * s, self.dim, check=False)

    def __matmul__(self, other: EvenFormMatrix) -> EvenFormMatrix:
        prod = wedge_arrays(self.entries[:, :, None, :], other.entries[None, :, :, :], self.dim)
        return EvenFormMatrix(prod.sum(axis=1), self.dim, check=False)

    def trace(self) -> ExteriorElement:
        return ExteriorElement(self.dim, np.trace(self.entries, axis1=0, axis2=1))

    def scalar_part(self) -> np.ndarray:
        return self.entries[..., 0]

    def is_antisymmetric(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.entries + self.entries.transpose(1, 0, 2)) <= tol))


def form_series(x: ExteriorElement, coeffs: Sequence[float]) -> ExteriorElement:
    """``sum_k coeffs[k] x^k`` for nilpotent ``x`` (zero scalar part), truncated by nilpotency."""
    if x.coeffs[0] != 0:
        raise ValueError("form series needs an argument with zero scalar part")
    out = np.zeros_like(x.coeffs)
    power = np.zeros_like(x.coeffs)
    power[0] = 1.0
    for k, c in enumerate(coeffs):
        if k > 0:
            power = wedge_arrays(power, x.coeffs, x.dim)
            if not np.any(power):
                break
        out = out + c * power
    return ExteriorElement(x.dim, out)


def form_exp(x: ExteriorElement) -> ExteriorElement:
    """Exponential of an even form; the scalar part factors out as an ordinary exponential."""
    s = x.coeffs[0]
    nil = ExteriorElement(x.dim, np.r_[0.0, x.coeffs[1:]])
    series = form_series(nil, [1.0 / factorial(k) for k in range(x.dim + 1)])
    return series * float(np.exp(s))
