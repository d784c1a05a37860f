"""Manifold-level integrals of the pointwise quantities in :mod:`interpchi.integrand`."""

from __future__ import annotations

import logging
from typing import Callable

import numpy as np

from .geometry import Field, ManifoldSpec, frame_point_data
from .integrand import alpha_of, interpolation_integrand, lipschitz_killing
from .quadrature import QuadratureGrid, refine_until, integrate_patches

log = logging.getLogger(__name__)


def _per_patch(spec: ManifoldSpec, field: Field | None, pointwise: Callable) -> tuple[list, list]:
    patches, fs = [], []
    for k in spec.quadrature_patches:
        patch = spec.patches[k]
        phi = None if field is None else field.per_patch[k]

        def f(u, patch=patch, phi=phi):
            return pointwise(frame_point_data(patch, phi, u))

        patches.append(patch)
        fs.append(f)
    return patches, fs


def interpolation_integral(spec: ManifoldSpec, field, t, nodes=None, workers: int = 1):
    """``pi^(-n/2) sum_j t^j int alpha_j exp(-t |xi|^2)`` for one or several ``t``."""
    fld = spec.field(field)
    patches, fs = _per_patch(spec, fld, lambda d: interpolation_integrand(d, t))
    return integrate_patches(patches, fs, nodes, workers)


def gauss_bonnet_chern(spec: ManifoldSpec, nodes=None, workers: int = 1) -> float:
    """``(2 pi)^(-n/2) int K``."""
    h = spec.n // 2
    patches, fs = _per_patch(
        spec, None, lambda d: (2 * np.pi) ** (-h) * lipschitz_killing(d) * d.vol_density
    )
    return float(integrate_patches(patches, fs, nodes, workers))


def alpha_integrals(spec: ManifoldSpec, field, nodes=None, workers: int = 1) -> np.ndarray:
    """``int alpha_j vol`` for every ``j`` (no Gaussian factor)."""
    fld = spec.field(field)
    patches, fs = _per_patch(spec, fld, lambda d: alpha_of(d) * d.vol_density[:, None])
    return np.asarray(integrate_patches(patches, fs, nodes, workers))


def refine_interpolation(spec: ManifoldSpec, field, t, tol: float, max_nodes: int = 256, start_nodes: int = 16):
    fld = spec.field(field)
    patches, fs = _per_patch(spec, fld, lambda d: interpolation_integrand(d, t))
    return refine_until(patches, fs, tol, max_nodes, start_nodes)


def grid_nodes(spec: ManifoldSpec, nodes=None) -> list[np.ndarray]:
    """Quadrature nodes per quadrature patch (for coverage checks and plots)."""
    return [QuadratureGrid.for_patch(spec.patches[k], nodes).nodes() for k in spec.quadrature_patches]
