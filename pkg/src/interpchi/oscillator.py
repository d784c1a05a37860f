"""Mehler kernel of the curvature-twisted harmonic oscillator and its A-hat prefactor.

For an antisymmetric matrix ``R`` and ``s = t hbar^2`` the kernel is

    u = (4 pi s)^(-n/2) Ahat(s R) exp(-<X, (sR/2) coth(sR/2) X> / (4 s)),
    Ahat(M) = det^(1/2)((M/2) / sinh(M/2)),

and solves ``(d/dt + hbar^2 H) u = 0`` with
``H = -sum_i (d_i + 1/4 sum_j R_ij X^j)^2``.

Two evaluation modes:

* numeric: ``R`` real.  Its eigenvalues are ``+-i theta``, so the matrix
  functions become ``(theta/2)/sin(theta/2)`` and ``(theta/2) cot(theta/2)`` on
  each rotation block.  Evaluated in closed form from ``eigh(-M^2)``.
* form: ``R`` has even-form entries without scalar part (an
  :class:`EvenFormMatrix`).  The power series terminate by nilpotency.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.special

from .exterior import BiForm, EvenFormMatrix, ExteriorElement, bimul_arrays, biexp_arrays, form_exp
from .integrand import f_arrays, w_arrays

DOMAIN = np.pi


class MehlerDomainError(ValueError):
    pass


@lru_cache(maxsize=None)
def _bernoulli(count: int) -> np.ndarray:
    return scipy.special.bernoulli(count)


def log_ahat_coefficients(max_order: int) -> np.ndarray:
    """Taylor coefficients of ``log((x/2)/sinh(x/2)) = -sum B_2k x^2k / (2k (2k)!)``."""
    B = _bernoulli(max_order)
    c = np.zeros(max_order + 1)
    for k in range(1, max_order // 2 + 1):
        c[2 * k] = -B[2 * k] / (2 * k * scipy.special.factorial(2 * k))
    return c


def half_coth_coefficients(max_order: int) -> np.ndarray:
    """Taylor coefficients of ``(x/2) coth(x/2) = sum B_2k x^2k / (2k)!``."""
    B = _bernoulli(max_order)
    c = np.zeros(max_order + 1)
    for k in range(0, max_order // 2 + 1):
        c[2 * k] = B[2 * k] / scipy.special.factorial(2 * k)
    return c


def _check_antisymmetric(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError("R must be a square matrix")
    if np.max(np.abs(R + R.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(R), initial=0.0)):
        raise ValueError("R must be antisymmetric")
    return R


def _block_angles(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of ``-M^2 = M^T M``: values ``theta^2 >= 0`` and vectors."""
    lam, V = np.linalg.eigh(-M @ M)
    return np.sqrt(np.clip(lam, 0.0, None)), V


def _guard(M: np.ndarray) -> None:
    norm = np.linalg.norm(M, 2) if M.size else 0.0
    if norm >= DOMAIN:
        raise MehlerDomainError(f"|t hbar^2 R| = {norm:.4f} is outside the series domain (< pi)")


def a_hat(M):
    """``det^(1/2)((M/2)/sinh(M/2))`` for a real antisymmetric matrix or an :class:`EvenFormMatrix`."""
    if isinstance(M, EvenFormMatrix):
        return _a_hat_form(M)
    M = _check_antisymmetric(M)
    _guard(M)
    theta, _ = _block_angles(M)
    # every block angle appears twice among the eigenvalues, and det^(1/2) takes one of each pair
    return float(np.prod(1.0 / np.sinc(theta / (2 * np.pi))) ** 0.5)


def half_coth_matrix(M: np.ndarray) -> np.ndarray:
    """``(M/2) coth(M/2)`` for real antisymmetric ``M`` (a symmetric matrix)."""
    M = _check_antisymmetric(M)
    _guard(M)
    theta, V = _block_angles(M)
    vals = np.cos(theta / 2) / np.sinc(theta / (2 * np.pi))
    return (V * vals) @ V.T


def _matrix_series(M: EvenFormMatrix, coeffs: np.ndarray) -> EvenFormMatrix:
    out = EvenFormMatrix.identity(M.size, M.dim).scale(coeffs[0])
    power = EvenFormMatrix.identity(M.size, M.dim)
    for c in coeffs[1:]:
        power = power @ M
        if not np.any(power.entries):
            break
        out = out + power.scale(c)
    return out


def _check_form_matrix(M: EvenFormMatrix) -> None:
    if np.any(M.scalar_part() != 0):
        raise ValueError("form-valued R must have zero scalar part")
    if not M.is_antisymmetric(1e-12):
        raise ValueError("form-valued R must be antisymmetric")


def _a_hat_form(M: EvenFormMatrix) -> ExteriorElement:
    _check_form_matrix(M)
    # entries have degree >= 2, so M^k vanishes once 2k exceeds the form dimension
    coeffs = log_ahat_coefficients(M.dim)
    log_det = _matrix_series(M, coeffs).trace() * 0.5
    return form_exp(log_det - ExteriorElement.scalar(M.dim, log_det.coeffs[0]))


def mehler_u(R, t: float, hbar: float, X):
    """The Mehler kernel at ``X`` (numeric ``R``) or its form-valued version (``EvenFormMatrix``)."""
    if t <= 0 or hbar <= 0:
        raise ValueError("t and hbar must be positive")
    s = t * hbar**2
    X = np.asarray(X, float)
    n = len(X)
    pref = (4 * np.pi * s) ** (-n / 2)
    if isinstance(R, EvenFormMatrix):
        if R.size != n:
            raise ValueError("R and X have different sizes")
        M = R.scale(s)
        _check_form_matrix(M)
        hc = _matrix_series(M, half_coth_coefficients(M.dim))
        quad = np.einsum("i,ijk,j->k", X, hc.entries, X)
        expo = form_exp(ExteriorElement(R.dim, -quad / (4 * s)))
        return (_a_hat_form(M) ^ expo) * pref
    R = _check_antisymmetric(R)
    if R.shape[0] != n:
        raise ValueError("R and X have different sizes")
    M = s * R
    quad = X @ half_coth_matrix(M) @ X
    return pref * a_hat(M) * np.exp(-quad / (4 * s))


def mehler_series(R: np.ndarray, t: float, hbar: float, X, order: int = 60) -> float:
    """Numeric kernel from the truncated Taylor series in the matrix argument (the oracle path)."""
    R = _check_antisymmetric(R)
    s = t * hbar**2
    M = s * R
    X = np.asarray(X, float)
    n = len(X)
    powers = [np.eye(n)]
    for _ in range(order):
        powers.append(powers[-1] @ M)
    la = log_ahat_coefficients(order)
    hc = half_coth_coefficients(order)
    log_det = 0.5 * sum(c * np.trace(P) for c, P in zip(la, powers))
    H = sum(c * P for c, P in zip(hc, powers))
    return float((4 * np.pi * s) ** (-n / 2) * np.exp(log_det) * np.exp(-(X @ H @ X) / (4 * s)))


def oscillator_apply(u, R: np.ndarray, X: np.ndarray, h: float) -> float:
    """``H u`` at ``X`` by central differences, ``H = -sum (d_i + a_i)^2``, ``a = R X / 4``."""
    X = np.asarray(X, float)
    n = len(X)
    a = 0.25 * R @ X
    u0 = u(X)
    lap = 0.0
    grad = np.zeros(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        up, um = u(X + e), u(X - e)
        lap += (up - 2 * u0 + um) / h**2
        grad[i] = (up - um) / (2 * h)
    # (d_i + a_i)^2 u = d_i^2 u + 2 a_i d_i u + (d_i a_i) u + a_i^2 u, and d_i a_i = R_ii / 4 = 0
    return -(lap + 2 * a @ grad + (a @ a) * u0)


def heat_residual(R: np.ndarray, t: float, hbar: float, X, h: float) -> float:
    """``|(d/dt + hbar^2 H) u|`` at ``(X, t)``; both derivatives by central differences of step ``h``."""
    R = _check_antisymmetric(R)
    X = np.asarray(X, float)
    dt = (mehler_u(R, t + h, hbar, X) - mehler_u(R, t - h, hbar, X)) / (2 * h)
    Hu = oscillator_apply(lambda Y: mehler_u(R, t, hbar, Y), R, X, h)
    return float(abs(dt + hbar**2 * Hu))


def total_mass(R: np.ndarray, t: float, hbar: float, half_width: float, nodes: int = 64) -> float:
    """``int u dX`` over the cube ``[-half_width, half_width]^n`` by Gauss-Legendre."""
    from .quadrature import axis_rule, pairwise_sum

    R = _check_antisymmetric(R)
    n = R.shape[0]
    x, w = axis_rule("legendre", nodes, -half_width, half_width)
    mesh = np.meshgrid(*([x] * n), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    W = np.ones(1)
    for _ in range(n):
        W = np.multiply.outer(W, w).ravel()
    s = t * hbar**2
    M = s * R
    H = half_coth_matrix(M)
    vals = (4 * np.pi * s) ** (-n / 2) * a_hat(M) * np.exp(-np.einsum("ni,ij,nj->n", pts, H, pts) / (4 * s))
    return float(pairwise_sum(W * vals))


def curvature_form_matrix(R: np.ndarray) -> EvenFormMatrix:
    """``Omega_ij = 1/2 sum_kl R_klij e^k e^l``: the curvature as a matrix of 2-forms."""
    R = np.asarray(R, float)
    n = R.shape[-1]
    entries = np.zeros((n, n, 1 << n))
    for k in range(n):
        for l in range(k + 1, n):
            entries[:, :, (1 << k) | (1 << l)] = R[k, l]
    return EvenFormMatrix(entries, n)


def top_symbol_consistency(R: np.ndarray, w: np.ndarray, xi_norm_sq: float, t: float) -> float:
    """Top pairing of ``exp(-t W1 - t F2)`` with and without the ``Ahat (x) 1`` factor.

    Returns the difference of the two ``vol (x) vol`` coefficients (including
    the common ``exp(-t |xi|^2)``).
    """
    R = np.asarray(R, float)
    n = R.shape[-1]
    if n % 2:
        raise ValueError("n must be even")
    E = biexp_arrays(-t * (w_arrays(w) + f_arrays(R)), n)
    A = _a_hat_form(curvature_form_matrix(R).scale(t))
    AxI = BiForm.tensor(A, ExteriorElement.scalar(n)).coeffs
    g = np.exp(-t * xi_norm_sq)
    return float(g * (bimul_arrays(AxI, E, n)[-1, -1] - E[-1, -1]))
