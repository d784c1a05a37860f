"""The eight acceptance criteria at their stated tolerances.

Each test records its sub-checks through the ``criterion`` fixture; the
terminal summary prints one PASS/FAIL line per criterion.  Run on its own with
``pytest tests/test_acceptance.py -v``.
"""

import time

import numpy as np
import pytest

from interpchi import clifford as cl
from interpchi import geometry as geo
from interpchi.evaluate import gauss_bonnet_chern, interpolation_integral
from interpchi.geometry import random_curvature_tensor
from interpchi.integrand import alpha_batch, alpha_of, alpha_via_matrix
from interpchi.morse import (
    CriticalPointDecl,
    CriticalStratum,
    gauss_equation_check,
    hessian_identity,
    morse_bott_sum,
    poincare_hopf_sum,
    stationary_phase_check,
)
from interpchi.oscillator import a_hat, curvature_form_matrix, heat_residual, top_symbol_consistency

PI = np.pi
SEED = 20240521
SPHERE_POLES = [CriticalPointDecl([PI / 2, PI / 2], patch=1), CriticalPointDecl([PI / 2, 3 * PI / 2], patch=1)]
TORUS_POINTS = [CriticalPointDecl(u) for u in ([0, 0], [0, PI], [PI, PI], [PI, 0])]


def _product():
    return geo.builtin_catalog("product", factors=[("sphere", {}), ("sphere", {})])


def _circle(name, embed):
    return CriticalStratum(1, 0, embed=embed, lower=[0.0], upper=[2 * PI], periodic=[True], name=name)


def _equator():
    return _circle("equator", lambda s: np.stack([np.full(len(s), PI / 2), s[:, 0]], axis=1))


def _random_rotation(n, rng):
    Q, R = np.linalg.qr(rng.normal(size=(n, n)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1
    return Q


# ---------------------------------------------------------------------------
# 1. Gauss-Bonnet-Chern


@pytest.mark.parametrize(
    "label,make,target,tol",
    [
        ("S2", geo.sphere, 2, 1e-5),
        ("T2 embedded", geo.embedded_torus, 0, 1e-5),
        ("S2xS2", _product, 4, 1e-3),
    ],
)
def test_criterion_1_gauss_bonnet_chern(criterion, label, make, target, tol):
    t0 = time.perf_counter()
    chi = gauss_bonnet_chern(make())
    elapsed = time.perf_counter() - t0
    err = abs(chi - target)
    ok = err < tol and elapsed < 60
    criterion(1, "GBC reproduction", ok, f"{label} chi={chi:.10f} |err|={err:.2e}<{tol:g}, {elapsed:.1f}s<60s")
    assert err < tol
    assert elapsed < 60


# ---------------------------------------------------------------------------
# 2. t-independence


@pytest.mark.parametrize(
    "label,make,target",
    [("S2 height", geo.sphere, 2), ("embedded torus height", geo.embedded_torus, 0)],
)
def test_criterion_2_t_independence(criterion, label, make, target):
    t = [0.25, 1.0, 4.0, 16.0]
    vals = np.asarray(interpolation_integral(make(), "height", t))
    spread = float(vals.max() - vals.min())
    err = float(np.max(np.abs(vals - target)))
    ok = spread < 2e-3 and err < 2e-3
    criterion(2, "t-independence", ok, f"{label} t={t} spread={spread:.2e} max|I-{target}|={err:.2e} (<2e-3)")
    assert spread < 2e-3
    assert err < 2e-3


# ---------------------------------------------------------------------------
# 3. Poincare-Hopf and stationary phase


@pytest.mark.parametrize(
    "label,make,decls,table,target",
    [
        ("S2", geo.sphere, SPHERE_POLES, [0, 2], 2),
        ("standing torus", geo.embedded_torus, TORUS_POINTS, [0, 1, 1, 2], 0),
    ],
)
def test_criterion_3_poincare_hopf(criterion, label, make, decls, table, target):
    spec = make()
    ph = poincare_hopf_sum(spec, "height", decls)
    nus = sorted(p.nu for p in ph.points)
    sp = stationary_phase_check(spec, "height", [64.0], decls)
    sp_err = abs(sp.values[-1] - ph.total)
    ok = nus == table and ph.total == target and sp_err < 0.05
    criterion(
        3,
        "Poincare-Hopf",
        ok,
        f"{label} indices={nus} sum={ph.total} (want {table}, {target}); "
        f"stationary phase t=64: {sp.values[-1]:.4f}, |diff|={sp_err:.3f}<0.05",
    )
    assert nus == table
    assert ph.total == target
    assert sp_err < 0.05


# ---------------------------------------------------------------------------
# 4. Morse-Bott


def test_criterion_4_morse_bott_sphere(criterion):
    strata = [
        CriticalStratum(0, 1, point=SPHERE_POLES[0].u, name="north"),
        CriticalStratum(0, 1, point=SPHERE_POLES[1].u, name="south"),
        _equator(),
    ]
    res = morse_bott_sum(geo.sphere(), "z_squared", strata)
    equator = res.strata[2].contribution
    ok = res.total == 2 and equator == 0
    criterion(4, "Morse-Bott", ok, f"S2 z^2 sum={res.total} (want 2), equator contributes {equator}")
    assert res.total == 2
    assert equator == 0


def test_criterion_4_morse_bott_lying_torus(criterion):
    spec = geo.embedded_torus(orientation="lying")
    top = _circle("top", lambda s: np.stack([s[:, 0], np.full(len(s), PI / 2)], axis=1))
    bottom = _circle("bottom", lambda s: np.stack([s[:, 0], np.full(len(s), 3 * PI / 2)], axis=1))
    res = morse_bott_sum(spec, "height", [top, bottom])
    ok = res.total == 0 and len(res.strata) == 2
    nus = [c.nu for c in res.strata]
    criterion(4, "Morse-Bott", ok, f"lying torus sum={res.total} (want 0) from circles with nu={nus}, chi=0")
    assert res.total == 0


# ---------------------------------------------------------------------------
# 5. Oracle equivalence


def test_criterion_5_supertrace_formula(criterion):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for k in range(1000):
        n = (2, 3, 4)[k % 3]
        A = rng.normal(size=(1 << n, 1 << n))
        worst = max(worst, abs(cl.supertrace(A) - cl.supertrace_via_symbol(A)))
    ok = worst < 1e-9
    criterion(5, "oracle equivalence", ok, f"supertrace vs symbol path, 1000 matrices n=2,3,4: max|diff|={worst:.2e}<1e-9")
    assert worst < 1e-9


def _geometric_points(rng):
    """100 frame data samples from curved manifolds with nonzero fields: 50 with n = 2, 50 with n = 4."""
    out = []
    for spec, count in ((geo.sphere(), 25), (geo.embedded_torus(), 25), (_product(), 50)):
        patch = spec.patches[0]
        u = patch.lower + rng.uniform(0.05, 0.95, size=(count, patch.n)) * patch.lengths
        data = geo.frame_point_data(patch, spec.field("height").per_patch[0], u)
        out.extend(zip(data.R, data.w))
    return out


def test_criterion_5_integrand_matrix_oracle(criterion):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for R, w in _geometric_points(rng):
        a = alpha_batch(R[None], w[None])[0]
        b = alpha_via_matrix(R, w)
        worst = max(worst, float(np.max(np.abs(a - b)) / np.max(np.abs(b))))
    ok = worst < 1e-8
    criterion(5, "oracle equivalence", ok, f"bi-form vs matrix exponential, 100 geometric points n=2,4: max rel err={worst:.2e}<1e-8")
    assert worst < 1e-8


# ---------------------------------------------------------------------------
# 6. Algebraic invariants


def test_criterion_6_clifford_relations(criterion):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for n in range(1, 5):
        I = np.eye(1 << n)
        for _ in range(100):
            v, w = rng.normal(size=n), rng.normal(size=n)
            cv, cw, bv, bw = cl.c_op(v), cl.c_op(w), cl.b_op(v), cl.b_op(w)
            worst = max(
                worst,
                np.max(np.abs(cv @ cw + cw @ cv + 2 * (v @ w) * I)),
                np.max(np.abs(bv @ bv - (v @ v) * I)),
                np.max(np.abs(bv @ bw + bw @ bv - 2 * (v @ w) * I)),
                np.max(np.abs(cv @ bw + bw @ cv)),
            )
    grading = max(float(np.max(np.abs(cl.grading_product(n) - cl.grading(n)))) for n in range(1, 7))
    ok = worst < 1e-12 and grading < 1e-12
    criterion(
        6,
        "algebraic invariants",
        ok,
        f"Clifford relations n=1..4: {worst:.1e}<1e-12; grading product with sign (-1)^ceil(n/2), n=1..6: {grading:.1e}",
    )
    assert worst < 1e-12
    assert grading < 1e-12


def test_criterion_6_frame_invariance(criterion):
    rng = np.random.default_rng(SEED + 1)
    worst = 0.0
    for spec in (geo.sphere(), geo.embedded_torus(), _product()):
        patch = spec.patches[0]
        phi = spec.field("height").per_patch[0]
        u = patch.lower + rng.uniform(0.1, 0.9, size=(5, patch.n)) * patch.lengths
        base = alpha_of(geo.frame_point_data(patch, phi, u))
        for _ in range(5):
            Q = _random_rotation(patch.n, rng)
            rotated = alpha_of(geo.frame_point_data(patch, phi, u, rotation=Q))
            worst = max(worst, float(np.max(np.abs(rotated - base))))
    ok = worst < 1e-8
    criterion(6, "algebraic invariants", ok, f"alpha_j under random frame rotations: max|diff|={worst:.2e}<1e-8")
    assert worst < 1e-8


def test_criterion_6_hessian_identity(criterion):
    poles = [[PI / 2, PI / 2], [PI / 2, 3 * PI / 2]]
    cases = [
        (geo.sphere(), SPHERE_POLES),
        (geo.embedded_torus(), TORUS_POINTS),
        (_product(), [CriticalPointDecl(a + b, patch=3) for a in poles for b in poles]),
    ]
    worst = 0.0
    for spec, decls in cases:
        fld = spec.field("height")
        for d in decls:
            lhs, rhs = hessian_identity(spec.patches[d.patch], fld.per_patch[d.patch], d.u[None, :])
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    ok = worst < 1e-4
    criterion(6, "algebraic invariants", ok, f"Hessian identity at 10 critical points: max residual={worst:.2e}<1e-4")
    assert worst < 1e-4


# ---------------------------------------------------------------------------
# 7. Mehler suite


@pytest.mark.parametrize("n", [2, 4])
def test_criterion_7_heat_residual_order(criterion, n):
    rng = np.random.default_rng(SEED + n)
    A = rng.normal(size=(n, n))
    R = (A - A.T) * 1.5 / np.linalg.norm(A - A.T, 2)
    X = rng.normal(size=n)
    r1, r2 = heat_residual(R, 0.7, 1.0, X, 1e-2), heat_residual(R, 0.7, 1.0, X, 5e-3)
    ratio = r1 / r2
    ok = 3.5 <= ratio <= 4.5
    criterion(7, "Mehler suite", ok, f"n={n} heat residual ratio at h=1e-2 -> 5e-3: {ratio:.3f} in [3.5, 4.5]")
    assert 3.5 <= ratio <= 4.5


def test_criterion_7_ahat_and_top_symbol(criterion):
    rng = np.random.default_rng(SEED)
    deg2 = 0.0
    tsc = 0.0
    for _ in range(20):
        R = random_curvature_tensor(4, rng)
        deg2 = max(deg2, float(np.max(np.abs(a_hat(curvature_form_matrix(R)).degree_part(2).coeffs))))
        tsc = max(tsc, abs(top_symbol_consistency(R, rng.normal(size=(4, 4)), 0.3, 0.8)))
    ok = deg2 == 0.0 and tsc < 1e-10
    criterion(7, "Mehler suite", ok, f"A-hat degree-2 part (form mode) max={deg2:g} (exact 0); top_symbol_consistency={tsc:.1e}<1e-10")
    assert deg2 == 0.0
    assert tsc < 1e-10


# ---------------------------------------------------------------------------
# 8. Gauss equation


def test_criterion_8_gauss_equation(criterion):
    rep = gauss_equation_check(geo.sphere(), "z_squared", _equator())
    ok = rep.residual < 1e-3
    criterion(
        8,
        "Gauss equation",
        ok,
        f"S2 equator under z^2: residual={rep.residual:.2e}<1e-3 (m=1, every 4-tensor vanishes), "
        f"normal lambda={rep.normal_eigenvalues[0]:.6f}, max|II|={np.max(np.abs(rep.second_fundamental_form)):.1e}",
    )
    assert rep.residual < 1e-3


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
