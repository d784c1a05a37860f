"""Clifford multiplications on the exterior algebra as explicit matrices.

``End(Lambda R^n)`` is realized as ``2**n x 2**n`` real matrices acting on the
bitmask basis of :mod:`interpchi.exterior`.  This module is the brute-force
counterpart of the bi-form algebra: every bi-form identity used for the
integrand can be checked here by plain matrix arithmetic.

Sign conventions, checked against direct matrix products in the tests:

* ``str(Xi) = tr(id) = 2**n``.
* ``Xi = (-1)**ceil(n/2) c^1...c^n b^1...b^n``.  For even n this is
  ``(-1)**(n/2)``; for odd n the sign ``(-1)**floor(n/2)`` would be wrong.
* Hence ``str(A) = (-1)**ceil(n/2) * 2**n * <sigma_{n,n}(A), vol (x) vol>``.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .exterior import BiForm, indices_of, mask_of, popcounts

ORDER_TOL = 1e-9
RECONSTRUCTION_TOL = 1e-9


class CliffordOrderError(ValueError):
    """An endomorphism has a monomial above the requested bi-order."""


@lru_cache(maxsize=None)
def _ext_int(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Exterior and interior multiplication by each basis covector, shape (n, 2^n, 2^n)."""
    size = 1 << n
    eps = np.zeros((n, size, size))
    iota = np.zeros((n, size, size))
    pc = popcounts(n)
    for i in range(n):
        bit = 1 << i
        for S in range(size):
            sign = -1.0 if pc[S & (bit - 1)] % 2 else 1.0
            if S & bit:
                iota[i, S ^ bit, S] = sign
            else:
                eps[i, S | bit, S] = sign
    eps.flags.writeable = False
    iota.flags.writeable = False
    return eps, iota


def _vec(v: Sequence[float]) -> np.ndarray:
    v = np.asarray(v, float)
    if v.ndim != 1:
        raise ValueError("expected a vector")
    return v


def c_op(v: Sequence[float]) -> np.ndarray:
    """``c(v) = eps(v) - iota(v)``."""
    v = _vec(v)
    eps, iota = _ext_int(len(v))
    return np.tensordot(v, eps - iota, axes=1)


def b_op(v: Sequence[float]) -> np.ndarray:
    """``b(v) = eps(v) + iota(v)``."""
    v = _vec(v)
    eps, iota = _ext_int(len(v))
    return np.tensordot(v, eps + iota, axes=1)


@lru_cache(maxsize=None)
def generators(n: int) -> tuple[np.ndarray, np.ndarray]:
    """``(c^1..c^n, b^1..b^n)`` stacked, each of shape (n, 2^n, 2^n)."""
    eps, iota = _ext_int(n)
    c, b = eps - iota, eps + iota
    c.flags.writeable = False
    b.flags.writeable = False
    return c, b


def grading(n: int) -> np.ndarray:
    """Diagonal parity operator: +1 on even forms, -1 on odd forms."""
    return np.diag(np.where(popcounts(n) % 2 == 0, 1.0, -1.0))


def top_sign(n: int) -> int:
    """``(-1)^ceil(n/2)``: the (n, n) monomial coefficient of the grading operator."""
    return -1 if ((n + 1) // 2) % 2 else 1


def grading_product(n: int, sign: int | None = None) -> np.ndarray:
    """``sign * c^1 ... c^n b^1 ... b^n`` by direct multiplication (default sign ``top_sign(n)``)."""
    c, b = generators(n)
    out = np.eye(1 << n)
    for i in range(n):
        out = out @ c[i]
    for i in range(n):
        out = out @ b[i]
    return (top_sign(n) if sign is None else sign) * out


def supertrace(A: np.ndarray) -> float:
    """``tr(Xi A)``; stacked matrices give an array."""
    A = np.asarray(A)
    n = int(np.log2(A.shape[-1]))
    parity = np.where(popcounts(n) % 2 == 0, 1.0, -1.0)
    vals = np.einsum("i,...ii->...", parity, A)
    if vals.ndim == 0:
        return complex(vals) if np.iscomplexobj(vals) else float(vals)
    return vals


@lru_cache(maxsize=None)
def monomial_basis(n: int) -> np.ndarray:
    """All ``c^I b^J`` with I, J strictly increasing; array [I_mask, J_mask, :, :]."""
    c, b = generators(n)
    size = 1 << n
    cI = np.empty((size, size, size))
    bJ = np.empty((size, size, size))
    for mask in range(size):
        mc = np.eye(size)
        mb = np.eye(size)
        for i in indices_of(mask):
            mc = mc @ c[i - 1]
            mb = mb @ b[i - 1]
        cI[mask] = mc
        bJ[mask] = mb
    basis = np.einsum("iab,jbc->ijac", cI, bJ)
    basis.flags.writeable = False
    return basis


def monomial(n: int, I: Sequence[int], J: Sequence[int]) -> np.ndarray:
    """``c^{i1}...c^{ik} b^{j1}...b^{jl}`` in the given (not necessarily sorted) order."""
    c, b = generators(n)
    out = np.eye(1 << n)
    for i in I:
        out = out @ c[i - 1]
    for j in J:
        out = out @ b[j - 1]
    return out


def monomial_coefficients(A: np.ndarray) -> np.ndarray:
    """Coefficients ``A_IJ`` indexed by masks so that ``A = sum A_IJ c^I b^J``.

    Monomials are orthonormal for ``<A, B> = tr(A^T B) / 2^n``.
    """
    A = np.asarray(A, float)
    size = A.shape[-1]
    n = int(np.log2(size))
    basis = monomial_basis(n)
    coeffs = np.einsum("ijab,...ab->...ij", basis, A) / size
    recon = np.einsum("ijab,...ij->...ab", basis, coeffs)
    resid = np.max(np.abs(recon - A)) if A.size else 0.0
    if resid > RECONSTRUCTION_TOL * max(1.0, np.max(np.abs(A))):
        raise RuntimeError(f"monomial reconstruction residual {resid:.3e}; basis or sign table is broken")
    return coeffs


def monomial_expand(A: np.ndarray, tol: float = 0.0) -> dict[tuple[tuple[int, ...], tuple[int, ...]], float]:
    """Nonzero coefficients keyed by 1-based increasing multi-indices ``(I, J)``."""
    coeffs = monomial_coefficients(A)
    I, J = np.nonzero(np.abs(coeffs) > tol)
    return {(indices_of(i), indices_of(j)): float(coeffs[i, j]) for i, j in zip(I, J)}


def reconstruct(coeffs: np.ndarray) -> np.ndarray:
    n = int(np.log2(coeffs.shape[-1]))
    return np.einsum("ijab,...ij->...ab", monomial_basis(n), coeffs)


def bisymbol(A: np.ndarray, k: int, l: int, tol: float = ORDER_TOL) -> BiForm:
    """Clifford bi-symbol ``sigma_{k,l}(A)``; A must have bi-order at most (k, l)."""
    coeffs = monomial_coefficients(A)
    n = int(np.log2(coeffs.shape[0]))
    pc = popcounts(n)
    too_high = (pc[:, None] > k) | (pc[None, :] > l)
    bad = np.abs(np.where(too_high, coeffs, 0.0)) > tol
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise CliffordOrderError(
            f"monomial c^{indices_of(i)} b^{indices_of(j)} has coefficient {coeffs[i, j]:.3e}, "
            f"above bi-order ({k}, {l})"
        )
    keep = (pc[:, None] == k) & (pc[None, :] == l)
    return BiForm(n, np.where(keep, coeffs, 0.0))


def supertrace_via_symbol(A: np.ndarray) -> float:
    """``(-1)^ceil(n/2) 2^n <sigma_{n,n}(A), vol (x) vol>``; equals :func:`supertrace`."""
    A = np.asarray(A, float)
    size = A.shape[0]
    n = int(np.log2(size))
    top = np.einsum("ab,ab->", monomial_basis(n)[-1, -1], A) / size
    return float(top_sign(n) * size * top)


def series_coefficients(
    fn: Callable[[np.ndarray], np.ndarray],
    max_order: Sequence[int],
    radius: Sequence[float],
    points: int = 16,
) -> np.ndarray:
    """Taylor coefficients of an entire function of several complex variables.

    ``fn`` maps an array of shape ``(P, d)`` of complex arguments to values of
    shape ``(P, ...)``.  Coefficients are read off by the discrete Cauchy
    integral on a torus of the given radii; returns ``c[k1, ..., kd, ...]`` for
    ``0 <= k_i <= max_order[i]``.
    """
    d = len(max_order)
    if points <= max(max_order):
        raise ValueError("need more contour points than the highest requested order")
    theta = 2 * np.pi * np.arange(points) / points
    grids = np.meshgrid(*([theta] * d), indexing="ij")
    args = np.stack([r * np.exp(1j * g.ravel()) for r, g in zip(radius, grids)], axis=-1)
    vals = np.asarray(fn(args))
    vals = vals.reshape((points,) * d + vals.shape[1:])
    coef = np.fft.fftn(vals, axes=tuple(range(d))) / points**d
    sl = tuple(slice(0, k + 1) for k in max_order)
    coef = coef[sl]
    for axis, r in enumerate(radius):
        shape = [1] * coef.ndim
        shape[axis] = max_order[axis] + 1
        coef = coef / (r ** np.arange(max_order[axis] + 1)).reshape(shape)
    return coef


def mask_key(I: Sequence[int], J: Sequence[int]) -> tuple[int, int]:
    return mask_of(I), mask_of(J)
