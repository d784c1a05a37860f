"""Poincare-Hopf and Morse-Bott counts, stationary phase, and the Gauss equation on strata.

Critical points and critical submanifolds are declared by the user and then
verified: the declared locus must be critical, nondegenerate in the normal
directions, and must account for every zero of ``d phi`` found by scanning the
quadrature grids of all patches (followed by a local polish of the smallest
grid minima).  Distances are measured in each patch's embedded picture so that
declarations in one chart cover nodes of another.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.optimize
from scipy.spatial import cKDTree

from .geometry import (
    Field,
    ManifoldPatch,
    ManifoldSpec,
    _christoffel_from,
    _derivatives,
    covariant_oneform,
    frame_point_data,
    gradient,
    metric_derivatives,
    orthonormal_frame,
    riemann_frame,
    third_derivatives,
)
from .integrand import alpha_of
from .quadrature import QuadratureGrid, integrate_patches

log = logging.getLogger(__name__)

ZERO_AT_DECL = 1e-10
ZERO_SCAN = 1e-6
BALL_RADIUS = 0.1
EIG_TOL = 1e-8
STRATUM_EIG_TOL = 1e-6
LAMBDA_TOL = 1e-6
HESSIAN_REL_STEP = 1e-3
THIRD_REL_STEP = 1e-2


class MorseError(ValueError):
    pass


class DegenerateCriticalPoint(MorseError):
    pass


class CoverageError(MorseError):
    pass


class StratumError(MorseError):
    pass


@dataclass
class CriticalPointDecl:
    u: np.ndarray
    patch: int = 0
    expected_index: int | None = None

    def __post_init__(self) -> None:
        self.u = np.asarray(self.u, float)


@dataclass
class CriticalStratum:
    """A declared connected critical submanifold ``s -> u(s)`` in one ambient patch.

    ``m = 0`` strata have no parameters; give the point as ``point``.
    """

    m: int
    patch: int = 0
    embed: Callable[[np.ndarray], np.ndarray] | None = None
    lower: Sequence[float] = ()
    upper: Sequence[float] = ()
    periodic: Sequence[bool] = ()
    rules: Sequence[str] | None = None
    point: Sequence[float] | None = None
    nu: int | None = None
    chi: int | None = None
    name: str = "C"

    def __post_init__(self) -> None:
        if self.m == 0:
            if self.point is None:
                raise StratumError(f"0-dimensional stratum {self.name!r} needs a point")
            pt = np.asarray(self.point, float)
            self.embed = lambda s, pt=pt: np.broadcast_to(pt, (len(np.atleast_2d(s)), len(pt))).copy()
            self.lower, self.upper, self.periodic = (), (), ()
        elif self.embed is None or len(self.lower) != self.m or len(self.upper) != self.m:
            raise StratumError(f"stratum {self.name!r}: m={self.m} needs an embedding and an m-dimensional box")
        if len(self.periodic) != len(self.lower):
            self.periodic = (False,) * len(self.lower)

    def map(self, s: np.ndarray) -> np.ndarray:
        s = np.atleast_2d(np.asarray(s, float))
        return np.asarray(self.embed(s), float)

    def samples(self, count: int, rng: np.random.Generator | None = None) -> np.ndarray:
        """Parameter samples in the interior of the box (fixed seed by default)."""
        if self.m == 0:
            return np.zeros((1, 0))
        rng = np.random.default_rng(0) if rng is None else rng
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        pad = np.where(np.asarray(self.periodic), 0.0, 0.1 * (hi - lo))
        return lo + pad + rng.random((count, self.m)) * (hi - lo - 2 * pad)

    def dense(self, per_axis: int | None = None) -> np.ndarray:
        """Dense parameter grid (closed box) for coverage tests."""
        if self.m == 0:
            return np.zeros((1, 0))
        per_axis = per_axis or {1: 4096, 2: 256}.get(self.m, 24)
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


# ---------------------------------------------------------------------------
# points


def _frame_hessian(patch: ManifoldPatch, phi: Callable, u: np.ndarray):
    w, xi2 = covariant_oneform(patch, phi, u)
    return 0.5 * (w + w.transpose(0, 2, 1)), xi2


@dataclass
class PointIndex:
    u: list
    patch: int
    nu: int
    sign: int
    xi_norm_sq: float
    eigenvalues: list


def point_index(spec: ManifoldSpec, field: Field, decl: CriticalPointDecl) -> PointIndex:
    """``nu`` = number of negative eigenvalues of ``nabla xi`` at a declared zero."""
    patch = spec.patches[decl.patch]
    w, xi2 = _frame_hessian(patch, field.per_patch[decl.patch], decl.u[None, :])
    if xi2[0] >= ZERO_AT_DECL:
        raise MorseError(f"declared critical point u={decl.u.tolist()} has |xi|^2 = {xi2[0]:.3e}, not a zero")
    eig = np.linalg.eigvalsh(w[0])
    if np.min(np.abs(eig)) < EIG_TOL:
        raise DegenerateCriticalPoint(
            f"critical point u={decl.u.tolist()} is degenerate (eigenvalue {eig[np.argmin(np.abs(eig))]:.2e}); "
            "declare it as part of a critical stratum and use the Morse-Bott count"
        )
    nu = int(np.sum(eig < 0))
    if decl.expected_index is not None and decl.expected_index != nu:
        raise MorseError(f"critical point u={decl.u.tolist()}: declared index {decl.expected_index}, found {nu}")
    return PointIndex(decl.u.tolist(), decl.patch, nu, (-1) ** nu, float(xi2[0]), eig.tolist())


# ---------------------------------------------------------------------------
# coverage


def _xi_norm_sq(patch: ManifoldPatch, phi: Callable, u: np.ndarray) -> np.ndarray:
    u = np.atleast_2d(u)
    ginv = np.linalg.inv(patch.metric_at(u))
    grad = gradient(phi, u, patch.steps)
    return np.einsum("ni,nij,nj->n", grad, ginv, grad)


def _grid_local_minima(vals: np.ndarray, shape: tuple[int, ...], periodic: Sequence[bool]) -> np.ndarray:
    v = vals.reshape(shape)
    is_min = np.ones(shape, bool)
    for axis, per in enumerate(periodic):
        for shift in (1, -1):
            nb = np.roll(v, shift, axis=axis)
            ok = v <= nb
            if not per:
                edge = [slice(None)] * len(shape)
                edge[axis] = 0 if shift == 1 else -1
                ok[tuple(edge)] = True
            is_min &= ok
    return np.flatnonzero(is_min.ravel())


def check_coverage(
    spec: ManifoldSpec,
    field: Field,
    covered: np.ndarray,
    nodes: int | None = None,
    threshold: float = ZERO_SCAN,
    radius: float = BALL_RADIUS,
    polish: int = 16,
) -> None:
    """Raise :class:`CoverageError` if ``|xi|^2 <= threshold`` anywhere away from ``covered``.

    ``covered`` holds embedded coordinates of the declared critical set.
    """
    tree = cKDTree(np.atleast_2d(covered)) if len(covered) else None

    def uncovered(pts_embedded):
        if tree is None:
            return np.ones(len(pts_embedded), bool)
        d, _ = tree.query(pts_embedded, k=1, distance_upper_bound=radius)
        return ~np.isfinite(d)

    for k, patch in enumerate(spec.patches):
        phi = field.per_patch[k]
        grid = QuadratureGrid.for_patch(patch, nodes)
        pts = grid.nodes()
        xi2 = np.concatenate([_xi_norm_sq(patch, phi, c) for c in np.array_split(pts, max(1, len(pts) // 4096))])
        free = uncovered(patch.embed_at(pts))
        bad = np.flatnonzero(free & (xi2 <= threshold))
        if bad.size:
            i = bad[np.argmin(xi2[bad])]
            raise CoverageError(
                f"undeclared zero of the one-form near u={np.round(pts[i], 6).tolist()} on patch {k} "
                f"(|xi|^2 = {xi2[i]:.3e})"
            )
        if not polish:
            continue
        minima = _grid_local_minima(xi2, grid.counts, patch.periodic)
        minima = minima[free[minima]]
        minima = minima[np.argsort(xi2[minima], kind="stable")][:polish]
        lo = patch.lower + np.where(patch.periodic, -np.inf, 1e-3 * patch.lengths)
        hi = patch.upper - np.where(patch.periodic, -np.inf, 1e-3 * patch.lengths)
        for i in minima:
            res = scipy.optimize.minimize(
                lambda x: float(_xi_norm_sq(patch, phi, np.clip(x, lo, hi)[None, :])[0]),
                pts[i],
                method="Nelder-Mead",
                options={"xatol": 1e-9, "fatol": 1e-16, "maxiter": 400 * patch.n},
            )
            x = np.clip(res.x, lo, hi)
            if res.fun <= threshold and uncovered(patch.embed_at(x[None, :]))[0]:
                raise CoverageError(
                    f"undeclared zero of the one-form at u={np.round(x, 6).tolist()} on patch {k} "
                    f"(|xi|^2 = {res.fun:.3e}, found from grid node u={np.round(pts[i], 6).tolist()})"
                )


def _decl_embedded(spec: ManifoldSpec, decls: Sequence[CriticalPointDecl]) -> np.ndarray:
    if not decls:
        return np.zeros((0, 1))
    return np.concatenate([spec.patches[d.patch].embed_at(d.u[None, :]) for d in decls])


@dataclass
class PoincareHopfResult:
    total: int
    points: list[PointIndex]


def poincare_hopf_sum(
    spec: ManifoldSpec,
    field,
    decls: Sequence[CriticalPointDecl],
    nodes: int | None = None,
    check: bool = True,
) -> PoincareHopfResult:
    """``sum_p (-1)^nu(p)`` after verifying that the declared points are all the zeros."""
    fld = spec.field(field)
    table = [point_index(spec, fld, d) for d in decls]
    if check:
        check_coverage(spec, fld, _decl_embedded(spec, decls), nodes)
    return PoincareHopfResult(int(sum(p.sign for p in table)), table)


# ---------------------------------------------------------------------------
# stationary phase


def hessian_identity(patch: ManifoldPatch, phi: Callable, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Frame Hessian of ``|d phi|^2`` and ``2 w w^T`` at the points ``u``.

    At a zero of ``xi = d phi`` these agree; away from it they differ by the
    ``<xi, nabla^3 phi>`` term.
    """
    u = np.atleast_2d(np.asarray(u, float))
    g, dg, _ = metric_derivatives(patch, u)
    _, _, gamma = _christoffel_from(g, dg)
    E = orthonormal_frame(g)
    f = lambda x: _xi_norm_sq(patch, phi, x)
    _, grad, hess = _derivatives(f, u, HESSIAN_REL_STEP * patch.lengths)
    H = hess - np.einsum("nkij,nk->nij", gamma, grad)
    lhs = np.einsum("nia,nij,njb->nab", E, H, E)
    w, _ = covariant_oneform(patch, phi, u)
    return lhs, 2 * np.einsum("nac,nbc->nab", w, w)


@dataclass
class StationaryPhaseResult:
    t: list[float]
    values: list[float]
    target: int
    hessian_residuals: list[float]
    determinant_residuals: list[float]

    @property
    def monotone(self) -> bool:
        err = np.abs(np.asarray(self.values) - self.target)
        return bool(np.all(np.diff(err) <= 1e-12))


def stationary_phase_check(
    spec: ManifoldSpec,
    field,
    t_list: Sequence[float],
    decls: Sequence[CriticalPointDecl],
    nodes: int | None = None,
) -> StationaryPhaseResult:
    """``pi^(-n/2) t^(n/2) int alpha_(n/2) exp(-t |xi|^2)`` against the Poincare-Hopf sum."""
    fld = spec.field(field)
    h = spec.n // 2
    t_arr = np.asarray(t_list, float)
    if t_arr.ndim != 1 or len(t_arr) == 0 or np.any(t_arr <= 0):
        raise ValueError("t_list must be a non-empty list of positive numbers")
    patches, fs = [], []
    for k in spec.quadrature_patches:
        patch, phi = spec.patches[k], fld.per_patch[k]

        def f(u, patch=patch, phi=phi):
            d = frame_point_data(patch, phi, u)
            top = alpha_of(d, check=False)[:, h]
            return (top * d.vol_density)[:, None] * np.exp(-np.outer(d.xi_norm_sq, t_arr))

        patches.append(patch)
        fs.append(f)
    vals = np.asarray(integrate_patches(patches, fs, nodes)) * (t_arr / np.pi) ** h
    ph = poincare_hopf_sum(spec, fld, decls, check=False)
    hess_res, det_res = [], []
    for d in decls:
        lhs, rhs = hessian_identity(spec.patches[d.patch], fld.per_patch[d.patch], d.u[None, :])
        hess_res.append(float(np.max(np.abs(lhs - rhs))))
        w, _ = covariant_oneform(spec.patches[d.patch], fld.per_patch[d.patch], d.u[None, :])
        det_res.append(float(abs(np.linalg.det(lhs[0]) - 2**spec.n * np.linalg.det(w[0]) ** 2)))
    return StationaryPhaseResult(t_arr.tolist(), vals.tolist(), ph.total, hess_res, det_res)


# ---------------------------------------------------------------------------
# strata


def stratum_jacobian(stratum: CriticalStratum, s: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """``J[N, a, i] = d u^a / d s^i`` by Richardson-extrapolated central differences."""
    s = np.atleast_2d(np.asarray(s, float))
    N, m = s.shape
    out = []
    for i in range(m):
        e = np.zeros(m)
        e[i] = h
        d1 = (stratum.map(s + e) - stratum.map(s - e)) / (2 * h)
        d2 = (stratum.map(s + e / 2) - stratum.map(s - e / 2)) / h
        out.append((4 * d2 - d1) / 3)
    return np.stack(out, axis=-1)


def stratum_patch(spec: ManifoldSpec, stratum: CriticalStratum) -> ManifoldPatch:
    """The stratum as a manifold in its own right, with the induced metric."""
    ambient = spec.patches[stratum.patch]

    def metric(s):
        s = np.atleast_2d(s)
        J = stratum_jacobian(stratum, s)
        g = ambient.metric_at(stratum.map(s))
        out = np.einsum("nai,nab,nbj->nij", J, g, J)
        return 0.5 * (out + out.transpose(0, 2, 1))

    patch = ManifoldPatch(
        n=stratum.m,
        lower=stratum.lower,
        upper=stratum.upper,
        periodic=tuple(stratum.periodic),
        metric=metric,
        rules=tuple(stratum.rules) if stratum.rules else None,
        embed=lambda s: ambient.embed_at(stratum.map(s)),
        name=stratum.name,
        # nested differences: the metric already carries a finite-difference Jacobian
        rel_step=HESSIAN_REL_STEP,
    )
    return patch


@dataclass
class StratumIndex:
    name: str
    m: int
    nu: int
    chi: int
    chi_estimate: float
    sign: int
    normal_eigenvalues: list

    @property
    def contribution(self) -> int:
        return self.sign * self.chi


def stratum_index(
    spec: ManifoldSpec,
    field: Field,
    stratum: CriticalStratum,
    samples: int = 10,
    nodes: int | None = None,
) -> StratumIndex:
    """Normal index ``nu(C)`` (checked at several points) and ``chi(C)``."""
    patch = spec.patches[stratum.patch]
    phi = field.per_patch[stratum.patch]
    s = stratum.samples(samples)
    u = stratum.map(s)
    w, xi2 = _frame_hessian(patch, phi, u)
    if np.max(xi2) >= ZERO_AT_DECL:
        i = int(np.argmax(xi2))
        raise StratumError(
            f"stratum {stratum.name!r} is not critical at u={np.round(u[i], 6).tolist()} (|xi|^2 = {xi2[i]:.3e})"
        )
    eig = np.linalg.eigvalsh(w)
    order = np.argsort(np.abs(eig), axis=1, kind="stable")
    sorted_abs = np.take_along_axis(eig, order, axis=1)
    tangential, normal = sorted_abs[:, : stratum.m], sorted_abs[:, stratum.m :]
    if stratum.m and np.max(np.abs(tangential)) > STRATUM_EIG_TOL:
        raise StratumError(
            f"stratum {stratum.name!r}: Hessian has fewer than m={stratum.m} zero eigenvalues "
            f"(smallest tangential |eig| = {np.max(np.abs(tangential)):.2e})"
        )
    if normal.size and np.min(np.abs(normal)) <= STRATUM_EIG_TOL:
        raise DegenerateCriticalPoint(f"stratum {stratum.name!r}: normal Hessian is degenerate")
    nus = np.sum(normal < 0, axis=1)
    if np.any(nus != nus[0]):
        raise StratumError(f"stratum {stratum.name!r}: index varies along the stratum ({sorted(set(nus.tolist()))})")
    nu = int(nus[0])
    if stratum.nu is not None and stratum.nu != nu:
        raise StratumError(f"stratum {stratum.name!r}: declared index {stratum.nu}, found {nu}")
    if stratum.m == 0:
        chi_est = 1.0
    elif stratum.m % 2:
        chi_est = 0.0
    else:
        chi_est = stratum_euler_characteristic(spec, stratum, nodes)
    chi = int(round(chi_est))
    if abs(chi_est - chi) > 1e-3:
        raise StratumError(f"stratum {stratum.name!r}: Gauss-Bonnet-Chern gave non-integer {chi_est:.6f}")
    if stratum.chi is not None and stratum.chi != chi:
        raise StratumError(f"stratum {stratum.name!r}: declared chi {stratum.chi}, found {chi}")
    return StratumIndex(stratum.name, stratum.m, nu, chi, chi_est, (-1) ** nu, normal[0].tolist())


def stratum_euler_characteristic(spec: ManifoldSpec, stratum: CriticalStratum, nodes: int | None = None) -> float:
    from .evaluate import gauss_bonnet_chern

    sub = ManifoldSpec(name=stratum.name, n=stratum.m, patches=[stratum_patch(spec, stratum)])
    return gauss_bonnet_chern(sub, nodes)


@dataclass
class MorseBottResult:
    total: int
    strata: list[StratumIndex]


def morse_bott_sum(
    spec: ManifoldSpec,
    field,
    strata: Sequence[CriticalStratum],
    nodes: int | None = None,
    check: bool = True,
) -> MorseBottResult:
    """``sum_C (-1)^nu(C) chi(C)`` after checking that the strata cover every zero."""
    fld = spec.field(field)
    table = [stratum_index(spec, fld, c, nodes=nodes) for c in strata]
    if check:
        covered = [spec.patches[c.patch].embed_at(c.map(c.dense())) for c in strata]
        covered = np.concatenate(covered) if covered else np.zeros((0, 1))
        check_coverage(spec, fld, covered, nodes)
    return MorseBottResult(int(sum(c.contribution for c in table)), table)


# ---------------------------------------------------------------------------
# Gauss equation


@dataclass
class GaussEquationReport:
    s: list
    u: list
    normal_eigenvalues: list
    second_fundamental_form: np.ndarray  # II[i, j, k]: tangent i, j; normal k
    S: np.ndarray
    R_tangential: np.ndarray
    R_tilde: np.ndarray
    R_intrinsic: np.ndarray
    residual: float
    hessian_identity_residual: float


def third_covariant(patch: ManifoldPatch, phi: Callable, u: np.ndarray) -> np.ndarray:
    """Coordinate components of ``nabla^3 phi`` at critical points ``u``."""
    u = np.atleast_2d(u)
    g, dg, _ = metric_derivatives(patch, u)
    _, _, gamma = _christoffel_from(g, dg)
    _, grad, hess = _derivatives(phi, u, patch.steps)
    d3 = third_derivatives(phi, u, THIRD_REL_STEP * patch.lengths)
    H = hess - np.einsum("nkij,nk->nij", gamma, grad)
    # nabla_c H_ab with d_c(Gamma^d_ab d_d phi) = Gamma^d_ab phi_dc at a critical point
    return (
        d3
        - np.einsum("ndab,ndc->nabc", gamma, hess)
        - np.einsum("ndca,ndb->nabc", gamma, H)
        - np.einsum("ndcb,nad->nabc", gamma, H)
    )


def gauss_equation_check(spec: ManifoldSpec, field, stratum: CriticalStratum, s0: Sequence[float] | None = None) -> GaussEquationReport:
    """Compare ``R - S`` on ``TC`` with the intrinsic curvature of the induced metric.

    Works in an orthonormal basis adapted to the stratum: the kernel of the
    Hessian is ``TC`` and the remaining eigenvectors diagonalize the normal
    Hessian with eigenvalues ``lambda_k``.
    """
    fld = spec.field(field)
    m = stratum.m
    if m < 1:
        raise StratumError("the Gauss equation needs a stratum of dimension m >= 1")
    patch = spec.patches[stratum.patch]
    phi = fld.per_patch[stratum.patch]
    n = patch.n
    s0 = stratum.samples(1)[0] if s0 is None else np.asarray(s0, float)
    u0 = stratum.map(s0[None, :])
    g = patch.metric_at(u0)
    E = orthonormal_frame(g)[0]
    w, _ = _frame_hessian(patch, phi, u0)
    lam, V = np.linalg.eigh(w[0])
    order = np.argsort(np.abs(lam), kind="stable")
    lam, V = lam[order], V[:, order]
    if np.max(np.abs(lam[:m]), initial=0) > STRATUM_EIG_TOL:
        raise StratumError(f"stratum {stratum.name!r}: Hessian kernel is smaller than m={m}")
    normal_lam = lam[m:]
    if normal_lam.size and np.min(np.abs(normal_lam)) < LAMBDA_TOL:
        raise DegenerateCriticalPoint(f"stratum {stratum.name!r}: normal eigenvalue {normal_lam.min():.2e} too small")
    Q = E @ V  # columns: coordinate components of the adapted orthonormal basis
    phi3 = np.einsum("abc,ai,bj,ck->ijk", third_covariant(patch, phi, u0)[0], Q, Q, Q)
    T, N = slice(0, m), slice(m, n)
    p3 = phi3[T, T, N]  # phi_{ij u}: tangent i, j; normal u
    II = -p3 / normal_lam[None, None, :]
    inv2 = 1.0 / normal_lam**2
    pk = phi3[T, T, N]
    S = np.einsum("u,iku,jlu->ijkl", inv2, pk, pk) - np.einsum("u,jku,ilu->ijkl", inv2, pk, pk)
    R_amb = np.einsum("abcd,ai,bj,ck,dl->ijkl", riemann_frame(patch, u0)[0], V, V, V, V)
    R_tan = R_amb[T, T, T, T]
    R_tilde = R_tan - S
    # intrinsic side: Cholesky frame of the induced metric, rotated into the tangent eigenbasis
    sub = stratum_patch(spec, stratum)
    R_int = riemann_frame(sub, s0[None, :])[0] if m >= 2 else np.zeros((m,) * 4)
    gC = sub.metric_at(s0[None, :])
    P = stratum_jacobian(stratum, s0[None, :])[0] @ orthonormal_frame(gC)[0]  # (n, m)
    O = (Q[:, T]).T @ g[0] @ P  # O[i, a] = <t_i, p_a>
    R_int_T = np.einsum("abcd,ia,jb,kc,ld->ijkl", R_int, O, O, O, O)
    resid = float(np.max(np.abs(R_tilde - R_int_T))) if m >= 2 else 0.0
    lhs, rhs = hessian_identity(patch, phi, u0)
    return GaussEquationReport(
        s0.tolist(),
        u0[0].tolist(),
        normal_lam.tolist(),
        II,
        S,
        R_tan,
        R_tilde,
        R_int_T,
        resid,
        float(np.max(np.abs(lhs - rhs))),
    )
