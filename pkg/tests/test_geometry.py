import numpy as np
import pytest

from interpchi import geometry as geo
from interpchi.geometry import GeometryError, builtin_catalog


def test_flat_torus_is_flat():
    spec = geo.flat_torus(2)
    u = np.array([[0.3, 1.2], [2.0, 5.0]])
    np.testing.assert_allclose(geo.christoffel(spec.patches[0], u), 0, atol=1e-12)
    np.testing.assert_allclose(geo.riemann_frame(spec.patches[0], u), 0, atol=1e-10)


def test_sphere_christoffel_analytic():
    patch = geo.sphere().patches[0]
    th = np.array([0.4, 1.1, 2.5])
    u = np.stack([th, np.full(3, 0.7)], axis=1)
    gamma = geo.christoffel(patch, u)
    np.testing.assert_allclose(gamma[:, 0, 1, 1], -np.sin(th) * np.cos(th), atol=1e-8)
    np.testing.assert_allclose(gamma[:, 1, 0, 1], np.cos(th) / np.sin(th), atol=1e-8)
    np.testing.assert_allclose(gamma[:, 0, 0, 0], 0, atol=1e-8)


def test_unit_sphere_curvature_sign():
    # frozen convention: <R(e_1, e_2) e_1, e_2> = -1 on the unit sphere
    patch = geo.sphere().patches[0]
    R = geo.riemann_frame(patch, np.array([[0.9, 2.0], [2.1, 0.3]]))
    np.testing.assert_allclose(np.abs(R[:, 0, 1, 0, 1]), 1, atol=1e-7)
    np.testing.assert_allclose(R[:, 0, 1, 0, 1], -1, atol=1e-7)
    r2 = geo.riemann_frame(geo.sphere(r=2.0).patches[0], np.array([[1.0, 1.0]]))
    assert r2[0, 0, 1, 0, 1] == pytest.approx(-0.25, abs=1e-7)


def test_torus_gaussian_curvature():
    R0, r = 2.0, 1.0
    patch = geo.embedded_torus(R0, r).patches[0]
    v = np.array([0.0, 1.0, np.pi / 2, np.pi])
    u = np.stack([np.full(4, 0.5), v], axis=1)
    K = -geo.riemann_frame(patch, u)[:, 0, 1, 0, 1]
    np.testing.assert_allclose(K, np.cos(v) / (r * (R0 + r * np.cos(v))), atol=1e-7)


def test_curvature_symmetries_and_rotation_invariance():
    rng = np.random.default_rng(0)
    spec = geo.product_manifold(geo.sphere(), geo.sphere(r=1.5))
    patch = spec.patches[0]
    u = np.array([[1.0, 0.5, 2.0, 4.0]])
    R = geo.riemann_frame(patch, u)
    assert geo.curvature_symmetry_residual(R[0]) < 1e-7
    Q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    Rq = geo.riemann_frame(patch, u, rotation=Q)
    expected, _ = geo.rotate_frame_data(R, np.zeros((1, 4, 4)), Q)
    np.testing.assert_allclose(Rq, expected, atol=1e-9)


def test_random_curvature_tensor_has_symmetries():
    rng = np.random.default_rng(1)
    for n in (2, 3, 4):
        R = geo.random_curvature_tensor(n, rng)
        assert geo.curvature_symmetry_residual(R) < 1e-12
    # 0.5 * (id (.) id) is the unit sphere, matching the chart computation above
    R = 0.5 * geo.kulkarni_nomizu(np.eye(2), np.eye(2))
    assert R[0, 1, 0, 1] == pytest.approx(-1.0, abs=1e-15)


def test_constant_field_has_zero_one_form():
    spec = geo.sphere()
    patch = spec.patches[0]
    data = geo.frame_point_data(patch, lambda u: np.full(len(u), 3.0), np.array([[1.0, 1.0], [2.0, 3.0]]))
    np.testing.assert_allclose(data.w, 0, atol=1e-9)
    np.testing.assert_allclose(data.xi_norm_sq, 0, atol=1e-12)


def test_height_covariant_hessian_on_sphere():
    # for z on the unit sphere, nabla^2 z = -z g
    spec = geo.sphere()
    u = np.array([[0.7, 0.2], [2.2, 1.3]])
    data = geo.frame_point_data(spec.patches[0], spec.field("height").per_patch[0], u)
    z = np.cos(u[:, 0])
    np.testing.assert_allclose(data.w, -z[:, None, None] * np.eye(2), atol=1e-7)
    np.testing.assert_allclose(data.xi_norm_sq, np.sin(u[:, 0]) ** 2, atol=1e-9)


def test_singular_metric_is_rejected():
    spec = geo.user_manifold([["0", "0"], ["0", "1"]], [0, 0], [1, 1], [True, True])
    with pytest.raises(GeometryError, match="positive definite"):
        geo.riemann_frame(spec.patches[0], np.array([[0.5, 0.5]]))


def test_user_manifold_round_sphere():
    spec = geo.user_manifold([["1", "0"], ["0", "sin(u1)^2"]], [0, 0], [np.pi, 2 * np.pi], [False, True])
    R = geo.riemann_frame(spec.patches[0], np.array([[1.0, 2.0]]))
    assert R[0, 0, 1, 0, 1] == pytest.approx(-1, abs=1e-7)


def test_product_of_flat_tori_is_flat():
    spec = builtin_catalog("product", factors=[("flat_torus", {}), ("flat_torus", {})])
    assert spec.n == 4
    R = geo.riemann_frame(spec.patches[0], np.array([[0.1, 0.2, 0.3, 0.4]]))
    np.testing.assert_allclose(R, 0, atol=1e-10)
    assert spec.euler_characteristic == 0


def test_product_field_resolution():
    spec = builtin_catalog("product", factors=[("sphere", {}), ("sphere", {})])
    u = np.array([[1.0, 0.0, 2.0, 0.0]])
    second = spec.field({"factors": [None, "height"]}).per_patch[0](u)
    both = spec.field("height").per_patch[0](u)
    assert second[0] == pytest.approx(np.cos(2.0))
    assert both[0] == pytest.approx(np.cos(1.0) + np.cos(2.0))
    expr = spec.field({"expr": "z2"}).per_patch[0](u)
    assert expr[0] == pytest.approx(np.cos(2.0))


def test_catalog_errors():
    with pytest.raises(GeometryError):
        builtin_catalog("klein_bottle")
    with pytest.raises(GeometryError):
        builtin_catalog("embedded_torus", R=1.0, r=2.0)
    with pytest.raises(GeometryError):
        geo.sphere().field("nope")
    with pytest.raises(GeometryError):
        geo.sphere().field({"factors": [None, "height"]})


def test_sphere_charts_agree_on_embedding():
    spec = geo.sphere()
    p0, p1 = spec.patches
    # the north pole is (pi/2, pi/2) in chart 1
    np.testing.assert_allclose(p1.embed_at(np.array([[np.pi / 2, np.pi / 2]])), [[0, 0, 1]], atol=1e-15)
    np.testing.assert_allclose(p0.embed_at(np.array([[0.0, 0.0]])), [[0, 0, 1]], atol=1e-15)
