import numpy as np
import pytest

from interpchi.exterior import EvenFormMatrix, ExteriorElement
from interpchi.geometry import random_curvature_tensor
from interpchi.oscillator import (
    MehlerDomainError,
    a_hat,
    curvature_form_matrix,
    half_coth_coefficients,
    half_coth_matrix,
    heat_residual,
    log_ahat_coefficients,
    mehler_series,
    mehler_u,
    top_symbol_consistency,
    total_mass,
)


def _antisym(n, rng, norm):
    A = rng.normal(size=(n, n))
    A = A - A.T
    return A * norm / np.linalg.norm(A, 2)


def _block(theta):
    return np.array([[0.0, theta], [-theta, 0.0]])


def test_coefficients_match_taylor_expansions():
    x = 0.3
    c = log_ahat_coefficients(30)
    assert np.polyval(c[::-1], x) == pytest.approx(np.log((x / 2) / np.sinh(x / 2)), abs=1e-15)
    h = half_coth_coefficients(30)
    assert np.polyval(h[::-1], x) == pytest.approx((x / 2) / np.tanh(x / 2), abs=1e-15)


def test_euclidean_kernel_at_zero_curvature():
    X = np.array([0.3, -0.7, 1.1])
    t, hbar = 0.4, 1.3
    s = t * hbar**2
    expected = (4 * np.pi * s) ** -1.5 * np.exp(-(X @ X) / (4 * s))
    assert mehler_u(np.zeros((3, 3)), t, hbar, X) == pytest.approx(expected, rel=1e-14)


def test_origin_value_is_prefactor_times_ahat():
    rng = np.random.default_rng(0)
    R = _antisym(4, rng, 2.0)
    t, hbar = 0.5, 1.0
    assert mehler_u(R, t, hbar, np.zeros(4)) == pytest.approx((4 * np.pi * t) ** -2 * a_hat(t * R), rel=1e-14)


def test_single_block_closed_forms():
    theta = 1.7
    M = _block(theta)
    # the eigenvalues of M are +-i theta, so the hyperbolic functions become trigonometric
    assert a_hat(M) == pytest.approx((theta / 2) / np.sin(theta / 2), rel=1e-14)
    np.testing.assert_allclose(half_coth_matrix(M), (theta / 2) / np.tan(theta / 2) * np.eye(2), rtol=1e-14)
    assert a_hat(np.zeros((2, 2))) == 1.0


@pytest.mark.parametrize("n", [2, 3, 4])
def test_closed_form_matches_series(n):
    rng = np.random.default_rng(n)
    R = _antisym(n, rng, 2.5)
    X = rng.normal(size=n)
    assert mehler_u(R, 0.8, 1.1, X) == pytest.approx(mehler_series(R, 0.8, 1.1, X), rel=1e-10)


def test_rotation_invariance():
    rng = np.random.default_rng(1)
    R = _antisym(4, rng, 1.5)
    X = rng.normal(size=4)
    Q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    assert mehler_u(Q @ R @ Q.T, 0.6, 1.0, Q @ X) == pytest.approx(mehler_u(R, 0.6, 1.0, X), rel=1e-12)


def test_domain_guard():
    with pytest.raises(MehlerDomainError):
        mehler_u(_block(4.0), 1.0, 1.0, np.zeros(2))
    with pytest.raises(ValueError):
        mehler_u(np.ones((2, 2)), 1.0, 1.0, np.zeros(2))
    with pytest.raises(ValueError):
        mehler_u(_block(1.0), 0.0, 1.0, np.zeros(2))


def test_heat_residual_flat():
    assert heat_residual(np.zeros((2, 2)), 0.7, 1.0, np.array([0.3, -0.2]), 1e-3) < 1e-6


@pytest.mark.parametrize("n", [2, 4])
def test_heat_residual_is_second_order(n):
    rng = np.random.default_rng(10 + n)
    R = _antisym(n, rng, 1.5)
    X = rng.normal(size=n)
    hs = [1e-2, 5e-3, 2.5e-3]
    res = [heat_residual(R, 0.7, 1.0, X, h) for h in hs]
    for a, b in zip(res, res[1:]):
        assert 3.5 <= a / b <= 4.5


def test_total_mass_tends_to_one():
    rng = np.random.default_rng(2)
    R = _antisym(2, rng, 1.0)
    assert total_mass(R, 0.01, 1.0, 2.0) == pytest.approx(1.0, abs=1e-3)
    masses = [total_mass(R, t, 1.0, 8.0) for t in (0.5, 0.1, 0.02)]
    assert abs(masses[-1] - 1) < abs(masses[0] - 1)


def test_form_mode_ahat_has_only_degrees_zero_and_four():
    rng = np.random.default_rng(3)
    for _ in range(5):
        A = a_hat(curvature_form_matrix(random_curvature_tensor(4, rng)))
        assert A.coeffs[0] == 1.0
        assert not np.any(A.degree_part(2).coeffs)
        assert np.any(A.degree_part(4).coeffs)


def test_form_mode_scalar_part_is_euclidean():
    rng = np.random.default_rng(4)
    Om = curvature_form_matrix(random_curvature_tensor(4, rng))
    X = rng.normal(size=4)
    u = mehler_u(Om, 0.5, 1.0, X)
    assert isinstance(u, ExteriorElement)
    assert u.coeffs[0] == pytest.approx((2 * np.pi) ** -2 * np.exp(-(X @ X) / 2), rel=1e-14)
    assert u.is_even(1e-15)


def test_form_mode_rejects_scalar_entries():
    e = np.zeros((2, 2, 4))
    e[0, 1, 0], e[1, 0, 0] = 1.0, -1.0
    with pytest.raises(ValueError):
        a_hat(EvenFormMatrix(e, 2))


def test_top_symbol_consistency():
    assert top_symbol_consistency(np.zeros((2,) * 4), np.eye(2), 0.1, 1.0) == 0.0
    rng = np.random.default_rng(5)
    for n in (2, 4):
        for _ in range(5):
            r = top_symbol_consistency(random_curvature_tensor(n, rng), rng.normal(size=(n, n)), 0.3, 0.8)
            assert abs(r) < 1e-10
