"""Built-in oracle suites for the algebra and the Mehler kernel (a few seconds in total)."""

from __future__ import annotations

import numpy as np

from . import clifford as cl
from .exterior import BiForm, ExteriorElement, biform_exp, biform_mul, popcounts, wedge
from .geometry import random_curvature_tensor
from .integrand import alpha_batch, alpha_via_matrix, f_arrays, f_matrix, w_arrays, w_matrix
from .oscillator import a_hat, curvature_form_matrix, heat_residual, mehler_series, mehler_u, top_symbol_consistency
from .report import Check, bounded

SEED = 20240521


def exterior_suite(rng) -> list[Check]:
    worst_comm = 0.0
    for n in range(1, 5):
        pc = popcounts(n)
        for A in range(1 << n):
            for B in range(1 << n):
                a = ExteriorElement(n, np.eye(1 << n)[A])
                b = ExteriorElement(n, np.eye(1 << n)[B])
                sign = (-1) ** (pc[A] * pc[B])
                worst_comm = max(worst_comm, np.max(np.abs(wedge(a, b).coeffs - sign * wedge(b, a).coeffs)))
    worst_assoc = 0.0
    for n in range(1, 5):
        for _ in range(5):
            x, y, z = (BiForm(n, rng.normal(size=(1 << n, 1 << n))) for _ in range(3))
            lhs = biform_mul(biform_mul(x, y), z).coeffs
            rhs = biform_mul(x, biform_mul(y, z)).coeffs
            worst_assoc = max(worst_assoc, np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(lhs))))
    n = 4
    R = random_curvature_tensor(n, rng)
    w = rng.normal(size=(n, n))
    F, W = BiForm(n, f_arrays(R)), BiForm(n, w_arrays(w))
    split = biform_mul(biform_exp(F), biform_exp(W)).coeffs - biform_exp(F + W).coeffs
    return [
        bounded("selftest:exterior.supercommutativity", worst_comm, 1e-15),
        bounded("selftest:exterior.associativity", worst_assoc, 1e-12),
        bounded("selftest:exterior.exp_of_commuting_sum", float(np.max(np.abs(split))), 1e-10),
    ]


def clifford_suite(rng) -> list[Check]:
    worst_rel = 0.0
    for n in range(1, 5):
        I = np.eye(1 << n)
        for _ in range(10):
            v, u = rng.normal(size=n), rng.normal(size=n)
            cv, cu, bv, bu = cl.c_op(v), cl.c_op(u), cl.b_op(v), cl.b_op(u)
            worst_rel = max(
                worst_rel,
                np.max(np.abs(cv @ cu + cu @ cv + 2 * (v @ u) * I)),
                np.max(np.abs(bv @ bu + bu @ bv - 2 * (v @ u) * I)),
                np.max(np.abs(cv @ bu + bu @ cv)),
            )
    worst_grading = max(np.max(np.abs(cl.grading_product(n) - cl.grading(n))) for n in range(1, 7))
    worst_str = 0.0
    for n in (2, 3, 4):
        for _ in range(20):
            A = rng.normal(size=(1 << n, 1 << n))
            worst_str = max(worst_str, abs(cl.supertrace(A) - cl.supertrace_via_symbol(A)))
    return [
        bounded("selftest:clifford.anticommutation", worst_rel, 1e-12),
        bounded("selftest:clifford.grading_product", worst_grading, 1e-12),
        bounded("selftest:clifford.supertrace_formula", worst_str, 1e-9),
    ]


def integrand_suite(rng) -> list[Check]:
    worst = 0.0
    worst_sym = 0.0
    for n in (2, 4):
        for _ in range(5):
            R = random_curvature_tensor(n, rng)
            w = rng.normal(size=(n, n))
            a = alpha_batch(R[None], w[None])[0]
            b = alpha_via_matrix(R, w)
            worst = max(worst, np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))
            worst_sym = max(
                worst_sym,
                np.max(np.abs(cl.bisymbol(f_matrix(R), 2, 2).coeffs - f_arrays(R))),
                np.max(np.abs(cl.bisymbol(w_matrix(w), 1, 1).coeffs - w_arrays(w))),
            )
    return [
        bounded("selftest:integrand.matrix_exponential_oracle", worst, 1e-8),
        bounded("selftest:integrand.bisymbols_of_F_and_W", worst_sym, 1e-12),
    ]


def _antisym(n: int, rng, norm: float) -> np.ndarray:
    A = rng.normal(size=(n, n))
    A = A - A.T
    return A * norm / np.linalg.norm(A, 2)


def oscillator_suite(rng) -> list[Check]:
    checks = []
    for n in (2, 4):
        R = _antisym(n, rng, 1.5)
        X = rng.normal(size=n)
        r1, r2 = heat_residual(R, 0.7, 1.0, X, 1e-2), heat_residual(R, 0.7, 1.0, X, 5e-3)
        checks.append(bounded(f"selftest:oscillator.residual_order_n{n}", abs(r1 / r2 - 4.0), 0.5))
        checks.append(
            bounded(f"selftest:oscillator.series_oracle_n{n}", abs(mehler_u(R, 0.7, 1.0, X) - mehler_series(R, 0.7, 1.0, X)), 1e-10)
        )
    deg2 = 0.0
    for _ in range(5):
        Om = curvature_form_matrix(random_curvature_tensor(4, rng))
        A = a_hat(Om)
        deg2 = max(deg2, float(np.max(np.abs(A.degree_part(2).coeffs))))
    checks.append(Check("selftest:oscillator.ahat_degree2_vanishes", deg2, 0.0, deg2 == 0.0))
    tsc = max(
        abs(top_symbol_consistency(random_curvature_tensor(4, rng), rng.normal(size=(4, 4)), 0.3, 0.8)) for _ in range(5)
    )
    checks.append(bounded("selftest:oscillator.top_symbol_consistency", tsc, 1e-10))
    return checks


SUITES = {
    "exterior": exterior_suite,
    "clifford": clifford_suite,
    "integrand": integrand_suite,
    "oscillator": oscillator_suite,
}


def run(suites=None, seed: int = SEED) -> list[Check]:
    rng = np.random.default_rng(seed)
    out = []
    for name in suites or SUITES:
        out.extend(SUITES[name](rng))
    return out
