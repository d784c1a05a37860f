import numpy as np
import pytest

from interpchi import geometry as geo
from interpchi.morse import (
    CoverageError,
    CriticalPointDecl,
    CriticalStratum,
    DegenerateCriticalPoint,
    MorseError,
    StratumError,
    gauss_equation_check,
    hessian_identity,
    morse_bott_sum,
    point_index,
    poincare_hopf_sum,
    stationary_phase_check,
    stratum_index,
)

PI = np.pi
NORTH = CriticalPointDecl([PI / 2, PI / 2], patch=1)
SOUTH = CriticalPointDecl([PI / 2, 3 * PI / 2], patch=1)
STANDING = [CriticalPointDecl(u) for u in ([0, 0], [0, PI], [PI, PI], [PI, 0])]


def _circle(name, embed, nu=None, chi=None, patch=0):
    return CriticalStratum(1, patch, embed=embed, lower=[0.0], upper=[2 * PI], periodic=[True], nu=nu, chi=chi, name=name)


def _equator():
    return _circle("equator", lambda s: np.stack([np.full(len(s), PI / 2), s[:, 0]], axis=1), nu=0, chi=0)


def test_sphere_pole_indices():
    spec = geo.sphere()
    fld = spec.field("height")
    north = point_index(spec, fld, NORTH)
    south = point_index(spec, fld, SOUTH)
    assert (north.nu, north.sign) == (2, 1)
    assert (south.nu, south.sign) == (0, 1)


def test_standing_torus_indices():
    spec = geo.embedded_torus(orientation="standing")
    res = poincare_hopf_sum(spec, "height", STANDING)
    assert sorted(p.nu for p in res.points) == [0, 1, 1, 2]
    assert res.total == 0


def test_sphere_poincare_hopf():
    assert poincare_hopf_sum(geo.sphere(), "height", [NORTH, SOUTH]).total == 2


def test_product_poincare_hopf():
    spec = geo.builtin_catalog("product", factors=[("sphere", {}), ("sphere", {})])
    poles = [[PI / 2, PI / 2], [PI / 2, 3 * PI / 2]]
    decls = [CriticalPointDecl(a + b, patch=3) for a in poles for b in poles]
    res = poincare_hopf_sum(spec, "height", decls)
    assert res.total == 4
    assert sorted(p.nu for p in res.points) == [0, 2, 2, 4]


def test_undeclared_zero_is_reported():
    with pytest.raises(CoverageError, match="undeclared zero"):
        poincare_hopf_sum(geo.sphere(), "height", [SOUTH])


def test_declaration_errors():
    spec = geo.sphere()
    fld = spec.field("height")
    with pytest.raises(MorseError, match="not a zero"):
        point_index(spec, fld, CriticalPointDecl([1.0, 1.0]))
    with pytest.raises(MorseError, match="declared index"):
        point_index(spec, fld, CriticalPointDecl([PI / 2, PI / 2], patch=1, expected_index=0))
    with pytest.raises(DegenerateCriticalPoint, match="Morse-Bott"):
        point_index(spec, spec.field("z_squared"), CriticalPointDecl([PI / 2, 1.0]))


def test_stationary_phase_on_sphere():
    res = stationary_phase_check(geo.sphere(), "height", [1, 4, 16, 64], [NORTH, SOUTH])
    assert res.target == 2
    assert abs(res.values[-1] - 2) < 0.05
    assert res.monotone
    assert max(res.hessian_residuals) < 1e-5
    assert max(res.determinant_residuals) < 1e-4


def test_stationary_phase_on_torus():
    res = stationary_phase_check(geo.embedded_torus(), "height", [4, 64], STANDING)
    assert res.target == 0 and abs(res.values[-1]) < 0.05


def test_hessian_identity_only_at_zeros():
    spec = geo.sphere()
    phi = spec.field("height").per_patch[0]
    lhs, rhs = hessian_identity(spec.patches[0], phi, np.array([[1.0, 0.3]]))
    assert np.max(np.abs(lhs - rhs)) > 1e-2
    phi1 = spec.field("height").per_patch[1]
    lhs, rhs = hessian_identity(spec.patches[1], phi1, NORTH.u[None, :])
    np.testing.assert_allclose(lhs, rhs, atol=1e-5)
    np.testing.assert_allclose(rhs[0], 2 * np.eye(2), atol=1e-6)


def test_sphere_z_squared_morse_bott():
    spec = geo.sphere()
    strata = [
        CriticalStratum(0, 1, point=NORTH.u, nu=2, chi=1, name="N"),
        CriticalStratum(0, 1, point=SOUTH.u, nu=2, chi=1, name="S"),
        _equator(),
    ]
    res = morse_bott_sum(spec, "z_squared", strata)
    assert res.total == 2
    assert [c.contribution for c in res.strata] == [1, 1, 0]


def test_lying_torus_morse_bott():
    spec = geo.embedded_torus(orientation="lying")
    top = _circle("top", lambda s: np.stack([s[:, 0], np.full(len(s), PI / 2)], axis=1))
    bottom = _circle("bottom", lambda s: np.stack([s[:, 0], np.full(len(s), 3 * PI / 2)], axis=1))
    res = morse_bott_sum(spec, "height", [top, bottom])
    assert res.total == 0
    assert sorted(c.nu for c in res.strata) == [0, 1]
    assert all(c.chi == 0 for c in res.strata)


def test_points_as_strata_agree_with_poincare_hopf():
    spec = geo.embedded_torus()
    strata = [CriticalStratum(0, 0, point=d.u, name=str(k)) for k, d in enumerate(STANDING)]
    assert morse_bott_sum(spec, "height", strata).total == poincare_hopf_sum(spec, "height", STANDING).total


def test_product_sphere_strata():
    spec = geo.builtin_catalog("product", factors=[("sphere", {}), ("sphere", {})])
    strata = [
        CriticalStratum(
            2,
            1,
            embed=lambda s, p=p: np.column_stack([s, np.full(len(s), PI / 2), np.full(len(s), p)]),
            lower=[0, 0],
            upper=[PI, 2 * PI],
            periodic=[False, True],
            rules=["legendre_cos", "periodic"],
            name=f"S2 x {p:.2f}",
        )
        for p in (PI / 2, 3 * PI / 2)
    ]
    res = morse_bott_sum(spec, {"factors": [None, "height"]}, strata)
    assert res.total == 4
    assert [c.chi for c in res.strata] == [2, 2]
    assert all(abs(c.chi_estimate - 2) < 1e-3 for c in res.strata)


def test_missing_stratum_fails_coverage():
    with pytest.raises(CoverageError):
        morse_bott_sum(geo.sphere(), "z_squared", [_equator()])


def test_stratum_declaration_errors():
    spec = geo.sphere()
    fld = spec.field("z_squared")
    off = _circle("off", lambda s: np.stack([np.full(len(s), 1.0), s[:, 0]], axis=1))
    with pytest.raises(StratumError, match="not critical"):
        stratum_index(spec, fld, off)
    wrong = _circle("eq", _equator().embed, nu=1)
    with pytest.raises(StratumError, match="declared index"):
        stratum_index(spec, fld, wrong)
    with pytest.raises(StratumError):
        CriticalStratum(1, 0, name="no embedding")
    with pytest.raises(StratumError):
        CriticalStratum(0, 0, name="no point")


def test_gauss_equation_on_equator():
    # m = 1: every curvature component vanishes, the check reduces to II and the Hessian identity
    rep = gauss_equation_check(geo.sphere(), "z_squared", _equator())
    assert rep.residual < 1e-3
    np.testing.assert_allclose(rep.second_fundamental_form, 0, atol=1e-6)
    assert rep.normal_eigenvalues == [pytest.approx(2.0, abs=1e-6)]
    assert rep.hessian_identity_residual < 1e-4


def _unit_sphere_in_flat_t3():
    spec = geo.flat_torus(3)
    field = {"expr": "((u1-pi)^2 + (u2-pi)^2 + (u3-pi)^2 - 1)^2"}

    def embed(s):
        th, ph = s[:, 0], s[:, 1]
        return np.stack([PI + np.sin(th) * np.cos(ph), PI + np.sin(th) * np.sin(ph), PI + np.cos(th)], axis=1)

    stratum = CriticalStratum(
        2, 0, embed=embed, lower=[0, 0], upper=[PI, 2 * PI], periodic=[False, True], rules=["legendre_cos", "periodic"]
    )
    return spec, field, stratum


def test_gauss_equation_round_sphere_in_flat_space():
    # level set |x| = 1 of (|x|^2 - 1)^2: lambda = 8, II = -I, S_1212 = 1, intrinsic curvature -1
    spec, field, stratum = _unit_sphere_in_flat_t3()
    rep = gauss_equation_check(spec, field, stratum, s0=[1.0, 0.5])
    assert rep.normal_eigenvalues == [pytest.approx(8.0, rel=1e-5)]
    np.testing.assert_allclose(rep.R_tangential, 0, atol=1e-8)
    assert abs(rep.S[0, 1, 0, 1]) == pytest.approx(1.0, abs=1e-3)
    assert rep.R_intrinsic[0, 1, 0, 1] == pytest.approx(-1.0, abs=1e-3)
    assert rep.residual < 1e-3
    assert stratum_index(spec, spec.field(field), stratum).chi == 2


def test_gauss_equation_flat_stratum_in_flat_ambient():
    spec = geo.flat_torus(3)
    stratum = CriticalStratum(
        2,
        0,
        embed=lambda s: np.column_stack([np.zeros(len(s)), s]),
        lower=[0, 0],
        upper=[2 * PI, 2 * PI],
        periodic=[True, True],
    )
    rep = gauss_equation_check(spec, {"expr": "cos(u1)"}, stratum)
    for T in (rep.R_tangential, rep.S, rep.R_tilde, rep.R_intrinsic):
        np.testing.assert_allclose(T, 0, atol=1e-6)
    assert rep.residual < 1e-6


def test_gauss_equation_rejects_points():
    with pytest.raises(StratumError):
        gauss_equation_check(geo.sphere(), "height", CriticalStratum(0, 1, point=NORTH.u))
