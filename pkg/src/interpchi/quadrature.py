"""Deterministic tensor-product quadrature over chart boxes.

Node contributions are stored by node index and reduced with pairwise
summation, so results are bit-identical whether chunks are evaluated serially
or on a thread pool.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .geometry import ManifoldPatch

log = logging.getLogger(__name__)

CHUNK = 4096
DEFAULT_NODES = {2: 64, 4: 24}


class QuadratureError(ValueError):
    pass


@lru_cache(maxsize=None)
def _leggauss(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def axis_rule(rule: str, m: int, lower: float, upper: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a 1-d rule on ``[lower, upper]``."""
    if m < 1:
        raise QuadratureError("node count must be positive")
    L = upper - lower
    if rule == "periodic":
        return lower + L * np.arange(m) / m, np.full(m, L / m)
    if rule == "legendre":
        x, w = _leggauss(m)
        return lower + 0.5 * L * (x + 1), 0.5 * L * w
    if rule == "legendre_cos":
        # d theta = dx / sin theta with x = cos theta; exact for f(theta) sin theta polynomial in cos theta
        if abs(lower) > 1e-12 or abs(upper - np.pi) > 1e-12:
            raise QuadratureError("legendre_cos is only defined on [0, pi]")
        x, w = _leggauss(m)
        theta = np.arccos(x[::-1])
        return theta, w[::-1] / np.sin(theta)
    raise QuadratureError(f"unknown rule {rule!r}")


@dataclass
class QuadratureGrid:
    """Product rule: one 1-d rule per axis."""

    rules: tuple[str, ...]
    counts: tuple[int, ...]
    axis_nodes: list[np.ndarray] = field(repr=False)
    axis_weights: list[np.ndarray] = field(repr=False)

    @classmethod
    def for_patch(cls, patch: ManifoldPatch, nodes: int | Sequence[int] | None = None) -> QuadratureGrid:
        if nodes is None:
            nodes = DEFAULT_NODES.get(patch.n, 24)
        counts = tuple(int(c) for c in np.broadcast_to(np.asarray(nodes), (patch.n,)))
        pairs = [axis_rule(r, m, lo, hi) for r, m, lo, hi in zip(patch.rules, counts, patch.lower, patch.upper)]
        return cls(tuple(patch.rules), counts, [p[0] for p in pairs], [p[1] for p in pairs])

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axis_nodes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def weights(self) -> np.ndarray:
        w = self.axis_weights[0]
        for a in self.axis_weights[1:]:
            w = np.multiply.outer(w, a)
        return w.ravel()


def pairwise_sum(values: np.ndarray) -> np.ndarray:
    """Tree reduction along axis 0 in a fixed order."""
    a = np.asarray(values, float)
    if a.shape[0] == 0:
        return np.zeros(a.shape[1:])
    while a.shape[0] > 1:
        if a.shape[0] % 2:
            a = np.concatenate([a, np.zeros((1,) + a.shape[1:])])
        a = a[0::2] + a[1::2]
    return a[0]


def evaluate_nodes(f: Callable[[np.ndarray], np.ndarray], nodes: np.ndarray, workers: int = 1) -> np.ndarray:
    """``f`` on every node, chunked; the output is ordered by node index."""
    starts = range(0, len(nodes), CHUNK)
    chunks = [nodes[s : s + CHUNK] for s in starts]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: np.asarray(f(c), float), chunks))
    else:
        parts = [np.asarray(f(c), float) for c in chunks]
    vals = np.concatenate(parts, axis=0)
    if vals.shape[0] != len(nodes):
        raise QuadratureError(f"integrand returned {vals.shape[0]} values for {len(nodes)} nodes")
    return vals


def integrate(
    patch: ManifoldPatch,
    f: Callable[[np.ndarray], np.ndarray],
    grid: QuadratureGrid | None = None,
    workers: int = 1,
) -> np.ndarray | float:
    """``sum_k w_k f(u_k)``; ``f`` may return shape (N,) or (N, m) for m integrands at once.

    ``f`` is integrated against ``du`` only: include the volume density yourself.
    """
    grid = QuadratureGrid.for_patch(patch) if grid is None else grid
    nodes = grid.nodes()
    vals = evaluate_nodes(f, nodes, workers)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        k = np.flatnonzero(bad.reshape(len(nodes), -1).any(axis=1))[0]
        raise QuadratureError(f"non-finite integrand value at node u={nodes[k].tolist()}")
    w = grid.weights()
    total = pairwise_sum(w.reshape((-1,) + (1,) * (vals.ndim - 1)) * vals)
    return float(total) if total.ndim == 0 else total


def integrate_patches(
    patches: Sequence[ManifoldPatch],
    fs: Sequence[Callable[[np.ndarray], np.ndarray]],
    nodes: int | Sequence[int] | None = None,
    workers: int = 1,
):
    """Sum of :func:`integrate` over several patches (e.g. a partition of unity)."""
    parts = [integrate(p, f, QuadratureGrid.for_patch(p, nodes), workers) for p, f in zip(patches, fs)]
    return pairwise_sum(np.array(parts)) if len(parts) > 1 else parts[0]


def area(patches: ManifoldPatch | Sequence[ManifoldPatch], nodes=None) -> float:
    """Riemannian volume (weights included)."""
    patches = [patches] if isinstance(patches, ManifoldPatch) else list(patches)
    return float(integrate_patches(patches, [p.vol_density for p in patches], nodes))


@dataclass
class RefineResult:
    value: np.ndarray | float
    change: float
    nodes: int
    converged: bool
    history: list[tuple[int, float | list]]

    @property
    def warning(self) -> str | None:
        if self.converged:
            return None
        return f"tolerance not reached at {self.nodes} nodes per axis (last change {self.change:.3e})"


def refine_until(
    patch: ManifoldPatch | Sequence[ManifoldPatch],
    f: Callable | Sequence[Callable],
    tol: float,
    max_nodes: int = 256,
    start_nodes: int = 8,
    workers: int = 1,
) -> RefineResult:
    """Double the nodes per axis until successive estimates differ by less than ``tol``.

    Hitting ``max_nodes`` is reported through ``converged=False`` and
    :attr:`RefineResult.warning`, never raised.
    """
    if not tol > 0:
        raise QuadratureError("tol must be positive")
    patches = [patch] if isinstance(patch, ManifoldPatch) else list(patch)
    fs = [f] if callable(f) else list(f)
    m = int(start_nodes)
    prev = integrate_patches(patches, fs, m, workers)
    history = [(m, np.asarray(prev).tolist())]
    change = np.inf
    while 2 * m <= max_nodes:
        m *= 2
        cur = integrate_patches(patches, fs, m, workers)
        change = float(np.max(np.abs(np.asarray(cur) - np.asarray(prev))))
        history.append((m, np.asarray(cur).tolist()))
        log.debug("refine: %d nodes/axis, change %.3e", m, change)
        prev = cur
        if change < tol:
            return RefineResult(cur, change, m, True, history)
    return RefineResult(prev, change, m, False, history)
