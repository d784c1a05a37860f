"""Chart-based compact Riemannian manifolds and pointwise curvature data.

All evaluators are vectorized: coordinates are arrays of shape ``(N, n)``.
Derivatives of metrics and fields come from central finite differences with
one Richardson step.

Curvature convention: ``R_ijkl = <R(e_i, e_j) e_k, e_l>`` with
``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y]``.  The unit sphere then has
``R_1212 = -1`` in an orthonormal frame, which is the sign that makes the
Gauss-Bonnet-Chern integral of the round sphere equal to +2.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .expr import compile_expression

Evaluator = Callable[[np.ndarray], np.ndarray]

DEFAULT_REL_STEP = 1e-4
RULES = ("periodic", "legendre", "legendre_cos")


class GeometryError(ValueError):
    pass


@dataclass
class ManifoldPatch:
    """One coordinate chart: a parameter box with a metric evaluator.

    ``rules`` names the quadrature rule per axis: ``periodic`` (trapezoid),
    ``legendre`` (Gauss-Legendre) or ``legendre_cos`` (Gauss-Legendre in
    ``cos u`` on ``[0, pi]``, which never samples the endpoints).
    ``weight`` is an optional partition-of-unity factor, ``embed`` maps chart
    points to a Euclidean picture used to compare points across charts, and
    ``coords`` returns named ambient coordinates (``x``, ``y``, ``z``, ...) for
    field expressions.  Finite-difference steps are ``rel_step`` times the axis
    lengths.
    """

    n: int
    lower: np.ndarray
    upper: np.ndarray
    periodic: tuple[bool, ...]
    metric: Evaluator
    rules: tuple[str, ...] | None = None
    weight: Evaluator | None = None
    embed: Evaluator | None = None
    coords: Callable[[np.ndarray], dict] | None = None
    name: str = "patch"
    rel_step: float = DEFAULT_REL_STEP

    def __post_init__(self) -> None:
        self.lower = np.asarray(self.lower, float)
        self.upper = np.asarray(self.upper, float)
        self.periodic = tuple(bool(p) for p in self.periodic)
        if not (len(self.lower) == len(self.upper) == len(self.periodic) == self.n):
            raise GeometryError("domain bounds and periodicity flags must have length n")
        if self.rules is None:
            self.rules = tuple("periodic" if p else "legendre" for p in self.periodic)
        self.rules = tuple(self.rules)
        for r in self.rules:
            if r not in RULES:
                raise GeometryError(f"unknown quadrature rule {r!r}")

    @property
    def lengths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def steps(self) -> np.ndarray:
        return self.rel_step * self.lengths

    def metric_at(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.metric(np.atleast_2d(u)), float)

    def weight_at(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        if self.weight is None:
            return np.ones(len(u))
        return np.asarray(self.weight(u), float)

    def vol_density(self, u: np.ndarray) -> np.ndarray:
        """``sqrt(det g)`` times the partition-of-unity weight."""
        g = self.metric_at(u)
        return np.sqrt(np.linalg.det(g)) * self.weight_at(u)

    def embed_at(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        return u if self.embed is None else np.asarray(self.embed(u), float)

    def env(self, u: np.ndarray) -> dict:
        """Variables available to expressions: ``u1..un`` plus named coordinates."""
        u = np.atleast_2d(u)
        env = {f"u{i + 1}": u[:, i] for i in range(self.n)}
        if self.coords is not None:
            env.update(self.coords(u))
        return env

    def variable_names(self) -> list[str]:
        probe = 0.5 * (self.lower + self.upper)
        return list(self.env(probe[None, :]).keys())


@dataclass
class ScalarField:
    """A function on one patch."""

    phi: Evaluator
    name: str = "phi"

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.phi(np.atleast_2d(u)), float)


@dataclass
class Field:
    """A function on the manifold, given on every patch."""

    name: str
    per_patch: list[Evaluator]

    def on(self, index: int) -> ScalarField:
        return ScalarField(self.per_patch[index], f"{self.name}@{index}")


@dataclass
class ManifoldSpec:
    """A compact manifold as a list of patches plus a library of named fields.

    Quadrature runs over ``quadrature_patches``; the rest exist so that points
    on a chart-singular locus (e.g. sphere poles) can be evaluated elsewhere.
    """

    name: str
    n: int
    patches: list[ManifoldPatch]
    fields: dict[str, Field] = field(default_factory=dict)
    quadrature_patches: tuple[int, ...] = (0,)
    factors: tuple["ManifoldSpec", ...] = ()
    patch_pairs: tuple[tuple[int, int], ...] = ()
    params: dict = field(default_factory=dict)
    euler_characteristic: int | None = None

    def field(self, spec) -> Field:
        """Resolve a field spec: a library name, ``{"expr": ...}``, ``{"sum": [...]}``
        or, for products, ``{"factors": [spec_a | None, spec_b | None]}``."""
        if spec is None:
            return Field("zero", [lambda u: np.zeros(len(u)) for _ in self.patches])
        if isinstance(spec, Field):
            return spec
        if isinstance(spec, str):
            if spec not in self.fields:
                raise GeometryError(f"unknown field {spec!r} on {self.name}; known: {sorted(self.fields)}")
            return self.fields[spec]
        if isinstance(spec, Mapping):
            if "expr" in spec:
                return expression_field(self, spec["expr"])
            if "sum" in spec:
                parts = [self.field(s) for s in spec["sum"]]
                return Field(
                    "+".join(p.name for p in parts),
                    [_sum_evaluators([p.per_patch[i] for p in parts]) for i in range(len(self.patches))],
                )
            if "factors" in spec:
                if not self.factors:
                    raise GeometryError(f"{self.name} is not a product manifold")
                subs = [f.field(s) for f, s in zip(self.factors, spec["factors"])]
                return _lift_product_field(self, subs)
        raise GeometryError(f"cannot interpret field spec {spec!r}")


def _sum_evaluators(evals: Sequence[Evaluator]) -> Evaluator:
    def total(u):
        return sum(np.asarray(e(u), float) for e in evals)

    return total


def expression_field(spec: ManifoldSpec, src: str) -> Field:
    evaluators = []
    for patch in spec.patches:
        fn = compile_expression(src, patch.variable_names())
        evaluators.append(lambda u, fn=fn, patch=patch: fn(patch.env(u)))
    return Field(src, evaluators)


# ---------------------------------------------------------------------------
# finite differences


def _derivatives(f: Evaluator, u: np.ndarray, h: np.ndarray, richardson: bool = True):
    """Value, gradient and Hessian of ``f`` by central differences.

    ``f`` maps (M, n) to (M, ...).  Returns arrays of shape (N, ...),
    (N, n, ...), (N, n, n, ...).
    """
    u = np.atleast_2d(np.asarray(u, float))
    N, n = u.shape
    h = np.broadcast_to(np.asarray(h, float), (n,))
    scales = (1.0, 0.5) if richardson else (1.0,)
    offsets = [np.zeros(n)]
    for s in scales:
        for a in range(n):
            e = np.zeros(n)
            e[a] = s * h[a]
            offsets += [e, -e]
        for a, b in itertools.combinations(range(n), 2):
            for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                e = np.zeros(n)
                e[a] = sa * s * h[a]
                e[b] = sb * s * h[b]
                offsets.append(e)
    offsets = np.array(offsets)
    pts = (u[None, :, :] + offsets[:, None, :]).reshape(-1, n)
    vals = np.asarray(f(pts), float)
    vals = vals.reshape((len(offsets), N) + vals.shape[1:])
    f0 = vals[0]
    tail = vals.shape[2:]
    results = []
    pos = 1
    for s in scales:
        d1 = np.empty((N, n) + tail)
        d2 = np.empty((N, n, n) + tail)
        for a in range(n):
            fp, fm = vals[pos], vals[pos + 1]
            pos += 2
            ha = s * h[a]
            d1[:, a] = (fp - fm) / (2 * ha)
            d2[:, a, a] = (fp - 2 * f0 + fm) / ha**2
        for a, b in itertools.combinations(range(n), 2):
            fpp, fpm, fmp, fmm = vals[pos : pos + 4]
            pos += 4
            d2[:, a, b] = d2[:, b, a] = (fpp - fpm - fmp + fmm) / (4 * s * h[a] * s * h[b])
        results.append((d1, d2))
    if richardson:
        (d1h, d2h), (d1s, d2s) = results
        return f0, (4 * d1s - d1h) / 3, (4 * d2s - d2h) / 3
    return f0, results[0][0], results[0][1]


def gradient(f: Evaluator, u: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Coordinate gradient (N, n) by Richardson-extrapolated central differences."""
    u = np.atleast_2d(np.asarray(u, float))
    N, n = u.shape
    h = np.broadcast_to(np.asarray(h, float), (n,))
    offsets = []
    for s in (1.0, 0.5):
        for a in range(n):
            e = np.zeros(n)
            e[a] = s * h[a]
            offsets += [e, -e]
    offsets = np.array(offsets)
    vals = np.asarray(f((u[None, :, :] + offsets[:, None, :]).reshape(-1, n)), float).reshape(len(offsets), N)
    d = (vals[0::2] - vals[1::2]).reshape(2, n, N) / (2 * h[None, :, None] * np.array([1.0, 0.5])[:, None, None])
    return ((4 * d[1] - d[0]) / 3).T


def third_derivatives(f: Evaluator, u: np.ndarray, h: np.ndarray, richardson: bool = True) -> np.ndarray:
    """All third partials ``d_a d_b d_c f`` (N, n, n, n) by central differences of Hessians."""
    u = np.atleast_2d(np.asarray(u, float))
    N, n = u.shape
    h = np.broadcast_to(np.asarray(h, float), (n,))

    def at_scale(s):
        hs = s * h
        out = np.empty((N, n, n, n))
        for c in range(n):
            e = np.zeros(n)
            e[c] = hs[c]
            _, _, Hp = _derivatives(f, u + e, hs, richardson=False)
            _, _, Hm = _derivatives(f, u - e, hs, richardson=False)
            out[:, :, :, c] = (Hp - Hm) / (2 * hs[c])
        # symmetrize: the stencil is exact-symmetric only in the first two slots
        perms = list(itertools.permutations(range(3)))
        return sum(out.transpose((0,) + tuple(p + 1 for p in perm)) for perm in perms) / len(perms)

    if not richardson:
        return at_scale(1.0)
    return (4 * at_scale(0.5) - at_scale(1.0)) / 3


# ---------------------------------------------------------------------------
# curvature


def metric_derivatives(patch: ManifoldPatch, u: np.ndarray, h=None, richardson: bool = True):
    """``g``, ``dg[N, a, i, j] = d_a g_ij`` and ``ddg[N, a, b, i, j]``."""
    h = patch.steps if h is None else h
    return _derivatives(patch.metric_at, u, h, richardson)


def _christoffel_from(g: np.ndarray, dg: np.ndarray):
    ginv = np.linalg.inv(g)
    # first[N, i, j, l] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    first = 0.5 * (dg + dg.transpose(0, 2, 1, 3) - dg.transpose(0, 2, 3, 1))
    gamma = np.einsum("nkl,nijl->nkij", ginv, first)
    return ginv, first, gamma


def _check_metric(g: np.ndarray, u: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(g)
        bad = np.flatnonzero(eig.min(axis=-1) <= 0)
        where = u[bad[0]] if bad.size else u[0]
        raise GeometryError(f"metric is not positive definite at u={np.round(where, 6).tolist()}") from None


def christoffel(patch: ManifoldPatch, u: np.ndarray) -> np.ndarray:
    """``Gamma[N, k, i, j]`` of the Levi-Civita connection."""
    u = np.atleast_2d(u)
    g, dg, _ = metric_derivatives(patch, u)
    _check_metric(g, u)
    return _christoffel_from(g, dg)[2]


def _riemann_coords(g, dg, ddg):
    ginv, first, gamma = _christoffel_from(g, dg)
    # d_m first_{ijl} = 1/2 (d_m d_i g_jl + d_m d_j g_il - d_m d_l g_ij)
    dfirst = 0.5 * (ddg + ddg.transpose(0, 1, 3, 2, 4) - ddg.transpose(0, 1, 3, 4, 2))
    dginv = -np.einsum("nka,nmab,nbl->nmkl", ginv, dg, ginv)
    dgamma = np.einsum("nmkl,nijl->nmkij", dginv, first) + np.einsum("nkl,nmijl->nmkij", ginv, dfirst)
    # R^l_ijk = d_i G^l_jk - d_j G^l_ik + G^m_jk G^l_im - G^m_ik G^l_jm
    Rup = dgamma.transpose(0, 1, 3, 4, 2) - dgamma.transpose(0, 3, 1, 4, 2)
    Rup = Rup + np.einsum("nmjk,nlim->nijkl", gamma, gamma) - np.einsum("nmik,nljm->nijkl", gamma, gamma)
    return np.einsum("nijkp,npl->nijkl", Rup, g), gamma


def orthonormal_frame(g: np.ndarray) -> np.ndarray:
    """``E[N, i, a]`` with ``e_a = sum_i E_ia d_i`` orthonormal (Cholesky frame)."""
    L = np.linalg.cholesky(g)
    return np.linalg.inv(L).transpose(0, 2, 1)


def riemann_coordinates(patch: ManifoldPatch, u: np.ndarray) -> np.ndarray:
    u = np.atleast_2d(u)
    g, dg, ddg = metric_derivatives(patch, u)
    _check_metric(g, u)
    return _riemann_coords(g, dg, ddg)[0]


def to_frame4(R: np.ndarray, E: np.ndarray) -> np.ndarray:
    return np.einsum("nijkl,nia,njb,nkc,nld->nabcd", R, E, E, E, E, optimize=True)


def riemann_frame(patch: ManifoldPatch, u: np.ndarray, rotation: np.ndarray | None = None) -> np.ndarray:
    """Orthonormal-frame components ``R_abcd`` at each point."""
    u = np.atleast_2d(u)
    g, dg, ddg = metric_derivatives(patch, u)
    _check_metric(g, u)
    R, _ = _riemann_coords(g, dg, ddg)
    E = orthonormal_frame(g)
    if rotation is not None:
        E = E @ rotation
    return to_frame4(R, E)


@dataclass
class FramePointData:
    """Per-point geometric payload, stacked over N points.

    ``R[N, a, b, c, d]`` frame curvature, ``w[N, a, b] = (nabla_{e_a} xi)(e_b)``,
    ``xi_norm_sq[N]``, ``vol_density[N]`` and the chart coordinates ``u[N, n]``.
    """

    R: np.ndarray
    w: np.ndarray
    xi_norm_sq: np.ndarray
    vol_density: np.ndarray
    u: np.ndarray

    @property
    def n(self) -> int:
        return self.w.shape[-1]

    def __len__(self) -> int:
        return len(self.xi_norm_sq)

    def point(self, i: int) -> FramePointData:
        s = slice(i, i + 1)
        return FramePointData(self.R[s], self.w[s], self.xi_norm_sq[s], self.vol_density[s], self.u[s])


def field_derivatives(field: ScalarField | Evaluator, u: np.ndarray, h: np.ndarray):
    """Value, coordinate gradient and coordinate second partials of a scalar field."""
    return _derivatives(field, u, h)


def covariant_oneform(
    patch: ManifoldPatch,
    field: ScalarField | Evaluator,
    u: np.ndarray,
    rotation: np.ndarray | None = None,
):
    """Frame components of ``nabla xi`` for ``xi = d phi`` and ``|xi|^2``."""
    u = np.atleast_2d(u)
    g, dg, _ = metric_derivatives(patch, u)
    _check_metric(g, u)
    ginv, _, gamma = _christoffel_from(g, dg)
    return _oneform_data(field, u, patch.steps, g, ginv, gamma, rotation)


def _oneform_data(field, u, h, g, ginv, gamma, rotation):
    _, grad, hess = field_derivatives(field, u, h)
    H = hess - np.einsum("nkij,nk->nij", gamma, grad)
    E = orthonormal_frame(g)
    if rotation is not None:
        E = E @ rotation
    w = np.einsum("nia,nij,njb->nab", E, H, E)
    xi2 = np.einsum("ni,nij,nj->n", grad, ginv, grad)
    return w, xi2


def frame_point_data(
    patch: ManifoldPatch,
    field: ScalarField | Evaluator | None,
    u: np.ndarray,
    rotation: np.ndarray | None = None,
) -> FramePointData:
    u = np.atleast_2d(np.asarray(u, float))
    g, dg, ddg = metric_derivatives(patch, u)
    _check_metric(g, u)
    R, gamma = _riemann_coords(g, dg, ddg)
    E = orthonormal_frame(g)
    if rotation is not None:
        E = E @ rotation
    R = to_frame4(R, E)
    if field is None:
        w = np.zeros((len(u), patch.n, patch.n))
        xi2 = np.zeros(len(u))
    else:
        ginv = np.linalg.inv(g)
        w, xi2 = _oneform_data(field, u, patch.steps, g, ginv, gamma, rotation)
    vol = np.sqrt(np.linalg.det(g)) * patch.weight_at(u)
    return FramePointData(R, w, xi2, vol, u)


def random_curvature_tensor(n: int, rng: np.random.Generator, terms: int = 3, scale: float = 1.0) -> np.ndarray:
    """Random algebraic curvature tensor (all symmetries and first Bianchi).

    Sums of Kulkarni-Nomizu products ``h (.) k`` of symmetric matrices, with the
    factor 1/2 chosen so that ``h = k = id`` gives the unit sphere.
    """
    R = np.zeros((n,) * 4)
    for _ in range(terms):
        h = rng.normal(size=(n, n))
        h = (h + h.T) / 2
        k = rng.normal(size=(n, n))
        k = (k + k.T) / 2
        R += 0.5 * kulkarni_nomizu(h, k)
    return scale * R


def kulkarni_nomizu(h: np.ndarray, k: np.ndarray) -> np.ndarray:
    """``(h (.) k)_ijkl = h_il k_jk + h_jk k_il - h_ik k_jl - h_jl k_ik``."""
    return (
        np.einsum("il,jk->ijkl", h, k)
        + np.einsum("jk,il->ijkl", h, k)
        - np.einsum("ik,jl->ijkl", h, k)
        - np.einsum("jl,ik->ijkl", h, k)
    )


def curvature_symmetry_residual(R: np.ndarray) -> float:
    """Largest violation of the algebraic curvature symmetries and first Bianchi identity."""
    ax = lambda *p: R.transpose((0,) + tuple(q + 1 for q in p)) if R.ndim == 5 else R.transpose(p)
    res = [
        R + ax(1, 0, 2, 3),
        R + ax(0, 1, 3, 2),
        R - ax(2, 3, 0, 1),
        R + ax(0, 2, 3, 1) + ax(0, 3, 1, 2),
    ]
    return float(max(np.max(np.abs(r)) for r in res))


def rotate_frame_data(R: np.ndarray, w: np.ndarray, Q: np.ndarray):
    """Re-express frame components after rotating the frame by ``Q`` (``e'_a = e_b Q_ba``)."""
    R2 = np.einsum("...ijkl,ia,jb,kc,ld->...abcd", R, Q, Q, Q, Q, optimize=True)
    w2 = np.einsum("...ij,ia,jb->...ab", w, Q, Q)
    return R2, w2


# ---------------------------------------------------------------------------
# catalog


def _diag_metric(fn: Callable[[np.ndarray], Sequence[np.ndarray]], n: int) -> Evaluator:
    def metric(u):
        u = np.atleast_2d(u)
        g = np.zeros((len(u), n, n))
        for i, d in enumerate(fn(u)):
            g[:, i, i] = d
        return g

    return metric


def _library(patches: Sequence[ManifoldPatch], named: Mapping[str, Callable[[np.ndarray, dict], np.ndarray]]):
    out = {}
    for name, fn in named.items():
        out[name] = Field(name, [lambda u, p=p, fn=fn: np.asarray(fn(u, p.env(u)), float) for p in patches])
    return out


def sphere(r: float = 1.0, mode: str = "poles_excluded") -> ManifoldSpec:
    """Round 2-sphere in spherical coordinates plus a rotated chart.

    Patch 0 uses ``(theta, phi)`` about the z axis; patch 1 the same chart about
    the x axis, regular at the z poles.  ``mode="poles_excluded"`` integrates
    patch 0 alone with Gauss-Legendre nodes in ``cos theta`` (the poles are
    never sampled); ``mode="pou"`` splits the integral between both patches
    with a smooth partition of unity.
    """
    r = float(r)
    if r <= 0:
        raise GeometryError("sphere radius must be positive")
    metric = _diag_metric(lambda u: (np.full(len(u), r * r), (r * np.sin(u[:, 0])) ** 2), 2)

    def xyz0(u):
        st = np.sin(u[:, 0])
        return r * st * np.cos(u[:, 1]), r * st * np.sin(u[:, 1]), r * np.cos(u[:, 0])

    def xyz1(u):
        st = np.sin(u[:, 0])
        return r * np.cos(u[:, 0]), r * st * np.cos(u[:, 1]), r * st * np.sin(u[:, 1])

    def pou(xyz, own):
        x, y, z = xyz
        s0 = (x * x + y * y) ** 2
        s1 = (y * y + z * z) ** 2
        return (s0 if own == 0 else s1) / (s0 + s1)

    patches = []
    for k, xyz in enumerate((xyz0, xyz1)):
        weight = None
        if mode == "pou":
            weight = lambda u, xyz=xyz, k=k: pou(xyz(u), k)
        elif mode != "poles_excluded":
            raise GeometryError(f"unknown sphere mode {mode!r}")
        patches.append(
            ManifoldPatch(
                n=2,
                lower=[0.0, 0.0],
                upper=[np.pi, 2 * np.pi],
                periodic=(False, True),
                metric=metric,
                rules=("legendre_cos", "periodic"),
                weight=weight,
                embed=lambda u, xyz=xyz: np.stack(xyz(u), axis=-1),
                coords=lambda u, xyz=xyz: dict(zip("xyz", xyz(u))),
                name=f"sphere-chart{k}",
            )
        )
    fields = _library(
        patches,
        {
            "height": lambda u, e: e["z"],
            "z_squared": lambda u, e: e["z"] ** 2,
            "cos_angle": lambda u, e: e["z"] / r,
        },
    )
    return ManifoldSpec(
        name="sphere",
        n=2,
        patches=patches,
        fields=fields,
        quadrature_patches=(0,) if mode == "poles_excluded" else (0, 1),
        params={"r": r, "mode": mode},
        euler_characteristic=2,
    )


def flat_torus(n: int = 2, radii: Sequence[float] | float = 1.0) -> ManifoldSpec:
    """Flat torus ``prod_i (R / 2 pi radii_i Z)`` on the periodic box ``[0, 2 pi)^n``."""
    radii = np.broadcast_to(np.asarray(radii, float), (n,)).copy()
    metric = _diag_metric(lambda u: [np.full(len(u), a * a) for a in radii], n)

    def embed(u):
        return np.concatenate([radii * np.cos(u), radii * np.sin(u)], axis=-1)

    patch = ManifoldPatch(
        n=n,
        lower=np.zeros(n),
        upper=np.full(n, 2 * np.pi),
        periodic=(True,) * n,
        metric=metric,
        embed=embed,
        name="flat-torus",
    )
    cos_sum = lambda u, e: np.cos(u).sum(axis=-1)
    fields = _library(
        [patch],
        {
            "cos_angle": lambda u, e: np.cos(u[:, 0]),
            "cos_sum": cos_sum,
            # no global height function on a flat torus; use the cosine Morse function
            "height": cos_sum,
        },
    )
    return ManifoldSpec(
        name="flat_torus",
        n=n,
        patches=[patch],
        fields=fields,
        params={"n": n, "radii": radii.tolist()},
        euler_characteristic=0,
    )


def embedded_torus(R: float = 2.0, r: float = 1.0, orientation: str = "standing") -> ManifoldSpec:
    """Torus of revolution in R^3 with chart ``(u, v)``, both periodic.

    ``orientation="lying"`` has its symmetry axis along z (the height has two
    critical circles); ``"standing"`` has the axis horizontal (four critical
    points of the height).  ``z`` is always the height coordinate.
    """
    R, r = float(R), float(r)
    if not R > r > 0:
        raise GeometryError("embedded torus needs R > r > 0")
    metric = _diag_metric(lambda u: ((R + r * np.cos(u[:, 1])) ** 2, np.full(len(u), r * r)), 2)

    def xyz(u):
        rho = R + r * np.cos(u[:, 1])
        a, b, c = rho * np.cos(u[:, 0]), rho * np.sin(u[:, 0]), r * np.sin(u[:, 1])
        if orientation == "lying":
            return a, b, c
        if orientation == "standing":
            return b, c, a
        raise GeometryError(f"unknown torus orientation {orientation!r}")

    xyz(np.zeros((1, 2)))
    patch = ManifoldPatch(
        n=2,
        lower=[0.0, 0.0],
        upper=[2 * np.pi, 2 * np.pi],
        periodic=(True, True),
        metric=metric,
        embed=lambda u: np.stack(xyz(u), axis=-1),
        coords=lambda u: dict(zip("xyz", xyz(u))),
        name=f"torus-{orientation}",
    )
    fields = _library(
        [patch],
        {
            "height": lambda u, e: e["z"],
            "z_squared": lambda u, e: e["z"] ** 2,
            "cos_angle": lambda u, e: np.cos(u[:, 0]),
        },
    )
    return ManifoldSpec(
        name="embedded_torus",
        n=2,
        patches=[patch],
        fields=fields,
        params={"R": R, "r": r, "orientation": orientation},
        euler_characteristic=0,
    )


def product_manifold(a: ManifoldSpec, b: ManifoldSpec) -> ManifoldSpec:
    """Riemannian product; patches are all pairs, fields present on both factors add."""
    na, nb = a.n, b.n
    patches, pairs = [], []
    for i, pa in enumerate(a.patches):
        for j, pb in enumerate(b.patches):
            pairs.append((i, j))
            patches.append(_product_patch(pa, pb))
    quad = tuple(
        k for k, (i, j) in enumerate(pairs) if i in a.quadrature_patches and j in b.quadrature_patches
    )
    spec = ManifoldSpec(
        name=f"{a.name}x{b.name}",
        n=na + nb,
        patches=patches,
        quadrature_patches=quad,
        factors=(a, b),
        patch_pairs=tuple(pairs),
        params={"factors": [a.params, b.params]},
        euler_characteristic=(
            a.euler_characteristic * b.euler_characteristic
            if a.euler_characteristic is not None and b.euler_characteristic is not None
            else None
        ),
    )
    for name in sorted(set(a.fields) & set(b.fields)):
        spec.fields[name] = _lift_product_field(spec, [a.fields[name], b.fields[name]])
    return spec


def _lift_product_field(spec: ManifoldSpec, subs: Sequence[Field]) -> Field:
    a, b = spec.factors
    na = a.n
    evaluators = []
    for i, j in spec.patch_pairs:
        fa, fb = subs[0].per_patch[i], subs[1].per_patch[j]
        evaluators.append(lambda u, fa=fa, fb=fb: np.asarray(fa(u[:, :na]), float) + np.asarray(fb(u[:, na:]), float))
    return Field(f"({subs[0].name})+({subs[1].name})", evaluators)


def _product_patch(pa: ManifoldPatch, pb: ManifoldPatch) -> ManifoldPatch:
    na, nb = pa.n, pb.n
    n = na + nb

    def metric(u):
        u = np.atleast_2d(u)
        g = np.zeros((len(u), n, n))
        g[:, :na, :na] = pa.metric_at(u[:, :na])
        g[:, na:, na:] = pb.metric_at(u[:, na:])
        return g

    weight = None
    if pa.weight is not None or pb.weight is not None:
        weight = lambda u: pa.weight_at(u[:, :na]) * pb.weight_at(u[:, na:])

    def coords(u):
        out = {}
        for k, (p, part) in enumerate(((pa, u[:, :na]), (pb, u[:, na:]))):
            if p.coords is not None:
                out.update({f"{key}{k + 1}": val for key, val in p.coords(part).items()})
        return out

    return ManifoldPatch(
        n=n,
        lower=np.r_[pa.lower, pb.lower],
        upper=np.r_[pa.upper, pb.upper],
        periodic=pa.periodic + pb.periodic,
        metric=metric,
        rules=pa.rules + pb.rules,
        weight=weight,
        embed=lambda u: np.concatenate([pa.embed_at(u[:, :na]), pb.embed_at(u[:, na:])], axis=-1),
        coords=coords,
        name=f"{pa.name}x{pb.name}",
    )


def user_manifold(
    metric: Sequence[Sequence[str]],
    lower: Sequence[float],
    upper: Sequence[float],
    periodic: Sequence[bool],
    rules: Sequence[str] | None = None,
    name: str = "user",
) -> ManifoldSpec:
    """Single-patch manifold whose metric entries are expressions in ``u1..un``."""
    n = len(lower)
    if len(metric) != n or any(len(row) != n for row in metric):
        raise GeometryError(f"metric must be an {n}x{n} matrix of expressions")
    names = [f"u{i + 1}" for i in range(n)]
    comp = [[compile_expression(metric[i][j], names) for j in range(n)] for i in range(n)]

    def g(u):
        u = np.atleast_2d(u)
        env = {f"u{i + 1}": u[:, i] for i in range(n)}
        out = np.empty((len(u), n, n))
        for i in range(n):
            for j in range(n):
                out[:, i, j] = comp[i][j](env)
        return 0.5 * (out + out.transpose(0, 2, 1))

    patch = ManifoldPatch(
        n=n, lower=lower, upper=upper, periodic=tuple(periodic), metric=g, rules=rules, name=name
    )
    return ManifoldSpec(name=name, n=n, patches=[patch], params={"metric": [list(r) for r in metric]})


CATALOG = {
    "sphere": sphere,
    "flat_torus": flat_torus,
    "embedded_torus": embedded_torus,
}


def builtin_catalog(name: str, **params) -> ManifoldSpec:
    """Look up a catalog manifold; ``product`` takes ``factors=[(name, params), ...]``."""
    if name == "product":
        factors = params.pop("factors", None)
        if not factors or len(factors) < 2:
            raise GeometryError("product needs at least two factors")
        specs = [f if isinstance(f, ManifoldSpec) else builtin_catalog(f[0], **dict(f[1])) for f in factors]
        out = specs[0]
        for s in specs[1:]:
            out = product_manifold(out, s)
        return out
    if name not in CATALOG:
        raise GeometryError(f"unknown manifold {name!r}; known: {sorted(CATALOG) + ['product']}")
    return CATALOG[name](**params)
