"""The interpolation integrand built from curvature and the covariant derivative of a one-form.

With ``F2 = -1/8 sum R_ijkl e^i e^j (x) e^k e^l`` and ``W1 = sum w_ij e^i (x) e^j``
the coefficient functions are

    alpha_j = (-1)^j / ((n/2 - j)! (2j)!) * top(F2^(n/2 - j) W1^(2j)),

and the integrand is ``pi^(-n/2) sum_j t^j alpha_j exp(-t |xi|^2)`` times the
volume density.  ``alpha_(n/2) = det w`` and ``2^(n/2) alpha_0`` is the
Lipschitz-Killing curvature.

:func:`alpha_via_matrix` recomputes the same numbers from the matrix
exponential of ``-(p W + q F)`` acting on the exterior algebra, which is the
independent oracle used in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
import scipy.linalg

from .clifford import generators, series_coefficients, supertrace
from .exterior import BiForm, bimul_arrays, bipower_arrays, popcounts, wedge_signs
from .geometry import FramePointData

COMMUTATOR_TOL = 1e-10


class IntegrandError(RuntimeError):
    pass


def _even(n: int) -> int:
    if n % 2:
        raise ValueError(f"the integrand is defined in even dimension only, got n={n}")
    return n // 2


@lru_cache(maxsize=None)
def _f_map(n: int) -> np.ndarray:
    """Linear map from flattened R_ijkl (n^4) to bi-form coefficients (4^n)."""
    size = 1 << n
    ws = wedge_signs(n)
    M = np.zeros((n, n, n, n, size * size))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            L = (1 << i) | (1 << j)
            sl = ws[1 << i, 1 << j]
            for k in range(n):
                for l in range(n):
                    if k == l:
                        continue
                    Rm = (1 << k) | (1 << l)
                    M[i, j, k, l, L * size + Rm] = -0.125 * sl * ws[1 << k, 1 << l]
    M = M.reshape(n**4, size * size)
    M.flags.writeable = False
    return M


def f_arrays(R: np.ndarray) -> np.ndarray:
    """Stacked ``F2`` coefficients for ``R`` of shape (..., n, n, n, n)."""
    R = np.asarray(R, float)
    n = R.shape[-1]
    size = 1 << n
    flat = R.reshape(R.shape[:-4] + (n**4,)) @ _f_map(n)
    return flat.reshape(R.shape[:-4] + (size, size))


def w_arrays(w: np.ndarray) -> np.ndarray:
    """Stacked ``W1`` coefficients for ``w`` of shape (..., n, n)."""
    w = np.asarray(w, float)
    n = w.shape[-1]
    size = 1 << n
    out = np.zeros(w.shape[:-2] + (size, size))
    idx = 1 << np.arange(n)
    out[..., idx[:, None], idx[None, :]] = w
    return out


def f_biform(R: np.ndarray) -> BiForm:
    """``sigma_22(F) = -1/8 sum R_ijkl e^i e^j (x) e^k e^l``."""
    R = np.asarray(R, float)
    return BiForm(R.shape[-1], f_arrays(R))


def w_biform(w: np.ndarray) -> BiForm:
    """``sigma_11(W) = sum w_ij e^i (x) e^j``."""
    w = np.asarray(w, float)
    return BiForm(w.shape[-1], w_arrays(w))


@dataclass(frozen=True)
class AlphaVector:
    """``alpha_0 .. alpha_(n/2)`` at one point."""

    values: tuple[float, ...]
    n: int

    def __getitem__(self, j: int) -> float:
        return self.values[j]

    def __len__(self) -> int:
        return len(self.values)

    def polynomial(self, t):
        """``sum_j t^j alpha_j``."""
        t = np.asarray(t, float)
        return sum(a * t**j for j, a in enumerate(self.values))


def alpha_coefficient(j: int, n: int) -> float:
    h = _even(n)
    return (-1) ** j / (factorial(h - j) * factorial(2 * j))


def alpha_arrays(F: np.ndarray, W: np.ndarray, n: int, check: bool = True) -> np.ndarray:
    """``alpha_j`` for stacked bi-forms; returns shape (..., n/2 + 1)."""
    h = _even(n)
    if check:
        resid = bimul_arrays(F, W, n) - bimul_arrays(W, F, n)
        worst = float(np.max(np.abs(resid))) if resid.size else 0.0
        if worst > COMMUTATOR_TOL:
            raise IntegrandError(f"F2 and W1 do not commute (residual {worst:.3e})")
    Wp = [bipower_arrays(W, 0, n)]
    for _ in range(2 * h):
        Wp.append(bimul_arrays(Wp[-1], W, n))
    Fp = [bipower_arrays(F, 0, n)]
    for _ in range(h):
        Fp.append(bimul_arrays(Fp[-1], F, n))
    out = []
    for j in range(h + 1):
        top = _top_of_product(Fp[h - j], Wp[2 * j], n)
        out.append(alpha_coefficient(j, n) * top)
    return np.stack(out, axis=-1)


def _top_of_product(x: np.ndarray, y: np.ndarray, n: int) -> np.ndarray:
    """``top(x y)`` without forming the whole product."""
    size = 1 << n
    full = size - 1
    A = np.arange(size)
    # (a (x) b)(c (x) d) lands on vol (x) vol iff c = ~a and d = ~b
    ws = wedge_signs(n)
    pc = popcounts(n)
    sgn_left = ws[A, full ^ A]
    koszul = np.where((pc[:, None] * pc[None, :]) % 2, -1.0, 1.0)  # (-1)^{|b||c|}, [b, c]
    # sign[a, b] = ws[a, ~a] * ws[b, ~b] * (-1)^{|b| |~a|}
    sign = sgn_left[:, None] * sgn_left[None, :] * koszul[A[None, :], (full ^ A)[:, None]]
    yc = y[..., full ^ A[:, None], full ^ A[None, :]]
    return np.einsum("...ab,ab->...", x * yc, sign)


def alpha(F2: BiForm, W1: BiForm, check: bool = True) -> AlphaVector:
    """The coefficient functions at one point."""
    if F2.dim != W1.dim:
        raise ValueError("dimension mismatch")
    vals = alpha_arrays(F2.coeffs, W1.coeffs, F2.dim, check)
    return AlphaVector(tuple(float(v) for v in vals), F2.dim)


def alpha_batch(R: np.ndarray, w: np.ndarray, check: bool = True) -> np.ndarray:
    """``alpha_j`` at many points; ``R`` (N, n, n, n, n), ``w`` (N, n, n) -> (N, n/2 + 1)."""
    n = np.shape(w)[-1]
    return alpha_arrays(f_arrays(R), w_arrays(w), n, check)


def alpha_of(data: FramePointData, check: bool = True) -> np.ndarray:
    return alpha_batch(data.R, data.w, check)


def interpolation_integrand(data: FramePointData, t, alphas: np.ndarray | None = None) -> np.ndarray:
    """``pi^(-n/2) sum_j t^j alpha_j exp(-t |xi|^2) vol``.

    Scalar ``t`` gives shape (N,); a sequence of ``t`` values gives (N, len(t)).
    """
    n = data.n
    h = _even(n)
    a = alpha_of(data) if alphas is None else alphas
    t_arr = np.atleast_1d(np.asarray(t, float))
    if np.any(t_arr < 0):
        raise ValueError("t must be non-negative")
    powers = t_arr[None, :] ** np.arange(h + 1)[:, None]  # (h+1, T)
    poly = a @ powers
    out = np.pi ** (-h) * poly * np.exp(-np.outer(data.xi_norm_sq, t_arr)) * data.vol_density[:, None]
    return out[:, 0] if np.ndim(t) == 0 else out


def lipschitz_killing(data: FramePointData) -> np.ndarray:
    """``K = 2^(n/2) alpha_0`` (for surfaces, the Gaussian curvature)."""
    h = _even(data.n)
    F = f_arrays(data.R)
    Fh = bipower_arrays(F, h, data.n)
    return 2.0**h * alpha_coefficient(0, data.n) * Fh[..., -1, -1]


def det_grad_field(data: FramePointData) -> np.ndarray:
    """``det_g(nabla xi)``: the determinant of the frame matrix ``w``."""
    return np.linalg.det(data.w)


# ---------------------------------------------------------------------------
# matrix oracle


def f_matrix(R: np.ndarray) -> np.ndarray:
    """``F = -1/8 sum R_ijkl c^i c^j b^k b^l`` as a 2^n x 2^n matrix."""
    R = np.asarray(R, float)
    n = R.shape[-1]
    c, b = generators(n)
    cc = np.einsum("iab,jbc->ijac", c, c)
    bb = np.einsum("kab,lbc->klac", b, b)
    C = np.einsum("ijkl,ijab->klab", R, cc)
    return -0.125 * np.einsum("klab,klbc->ac", C, bb)


def w_matrix(w: np.ndarray) -> np.ndarray:
    """``W = sum w_ij c^i b^j``."""
    w = np.asarray(w, float)
    c, b = generators(w.shape[-1])
    return np.einsum("ij,iab,jbc->ac", w, c, b)


def witten_exponent(R: np.ndarray, w: np.ndarray, xi_norm_sq: float, t: float, hbar: float = 1.0) -> np.ndarray:
    """``-t (|xi|^2 + hbar W + hbar^2 F)``."""
    size = 1 << np.shape(w)[-1]
    return -t * (xi_norm_sq * np.eye(size) + hbar * w_matrix(w) + hbar**2 * f_matrix(R))


def alpha_via_matrix(R: np.ndarray, w: np.ndarray, points: int = 16) -> np.ndarray:
    """``alpha_j = 2^-n [p^(2j) q^(n/2-j)] str exp(-(p W + q F))``.

    The double Taylor coefficient is read off by a Cauchy integral over a
    torus in the complex ``(p, q)`` planes; every exponential is a dense
    matrix exponential.
    """
    n = np.shape(w)[-1]
    h = _even(n)
    Wm, Fm = w_matrix(w), f_matrix(R)
    rw = 1.0 / (1.0 + np.linalg.norm(Wm, 2))
    rf = 1.0 / (1.0 + np.linalg.norm(Fm, 2))

    def fn(args):
        p, q = args[:, 0], args[:, 1]
        mats = -(p[:, None, None] * Wm + q[:, None, None] * Fm)
        return supertrace(scipy.linalg.expm(mats))

    coef = series_coefficients(fn, (2 * h, h), (rw, rf), points)
    return np.array([coef[2 * j, h - j].real for j in range(h + 1)]) / 2**n
