"""Obstacle worlds, the min-distance barrier, and sampled validity checks.

The built-in barrier is h(z) = min_i(||z - o_i|| - r_i) over circular
obstacles. Away from obstacle centers and equidistance loci its gradient is
the unit vector pointing from the nearest center to z, so the gradient bound
is exactly 1. Ties between equally near obstacles resolve to the lowest
obstacle index.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._vec import vdot, vnorm
from .errors import ConfigurationError, SingularGradientError


@dataclass(frozen=True)
class ObstacleField:
    """Circular obstacles in the plane: centers (P, 2) and radii (P,)."""

    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        centers = np.atleast_2d(np.array(self.centers, dtype=float))
        radii = np.atleast_1d(np.array(self.radii, dtype=float))
        if centers.ndim != 2 or centers.shape[1] != 2:
            raise ConfigurationError("obstacle centers must have shape (P, 2)")
        if centers.shape[0] < 1:
            raise ConfigurationError("at least one obstacle is required")
        if radii.shape != (centers.shape[0],):
            raise ConfigurationError("radii must match the number of obstacle centers")
        if not (np.all(np.isfinite(centers)) and np.all(np.isfinite(radii))):
            raise ConfigurationError("obstacle geometry must be finite")
        if not np.all(radii > 0):
            raise ConfigurationError("all obstacle radii must be positive")
        centers.flags.writeable = False
        radii.flags.writeable = False
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)

    @property
    def count(self) -> int:
        return self.centers.shape[0]

    def center_distances(self, z) -> np.ndarray:
        """Distances from z (..., 2) to every center, shape (..., P)."""
        z = np.asarray(z, dtype=float)
        return vnorm(z[..., None, :] - self.centers)

    def signed_margins(self, z) -> np.ndarray:
        """Distance-to-center minus radius per obstacle, shape (..., P)."""
        return self.center_distances(z) - self.radii

    def nearest(self, z) -> np.ndarray:
        """Index of the nearest obstacle by signed margin; ties take the lowest index."""
        return np.asarray(np.argmin(self.signed_margins(z), axis=-1))


@dataclass(frozen=True)
class BarrierFn:
    """A scalar safety function with its gradient map and gradient bound.

    ``value`` and ``gradient`` accept a single state (2,) or a batch (..., 2).
    ``grad_bound`` is the constant that turns tracking-error size into a bound
    on the barrier's rate of change.
    """

    value_fn: Callable
    gradient_fn: Callable
    grad_bound: float
    field: ObstacleField | None = None
    vg_fn: Callable | None = None

    def value(self, z):
        return self.value_fn(z)

    def gradient(self, z):
        return self.gradient_fn(z)

    def value_and_gradient(self, z):
        """Single-pass (value, gradient); falls back to the two separate maps."""
        if self.vg_fn is not None:
            return self.vg_fn(z)
        return self.value_fn(z), self.gradient_fn(z)


def min_distance_barrier(field: ObstacleField) -> BarrierFn:
    """Barrier h(z) = min over obstacles of (||z - center|| - radius).

    The gradient is the unit vector from the nearest center toward z, hence
    grad_bound = 1 exactly. In batch mode a state exactly at a center yields
    non-finite gradient entries for that row; the scalar path raises
    SingularGradientError instead.
    """

    def value(z):
        return np.min(field.signed_margins(z), axis=-1)

    def value_and_gradient(z):
        z = np.asarray(z, dtype=float)
        dists = field.center_distances(z)
        margins = dists - field.radii
        idx = np.asarray(np.argmin(margins, axis=-1))
        val = np.take_along_axis(margins, np.expand_dims(idx, -1), axis=-1)[..., 0]
        dist = np.take_along_axis(dists, np.expand_dims(idx, -1), axis=-1)[..., 0]
        diff = z - field.centers[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            grad = diff / np.expand_dims(dist, -1)
        return val, grad

    def gradient(z):
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            dists = field.center_distances(z)
            margins = dists - field.radii
            i = int(np.argmin(margins))
            dist = float(dists[i])
            if dist == 0.0:
                raise SingularGradientError(
                    f"gradient undefined at obstacle center {field.centers[i]}"
                )
            return (z - field.centers[i]) / dist
        return value_and_gradient(z)[1]

    return BarrierFn(
        value_fn=value,
        gradient_fn=gradient,
        grad_bound=1.0,
        field=field,
        vg_fn=value_and_gradient,
    )


def estimate_grad_bound(b: BarrierFn, points) -> float:
    """Empirical gradient bound: max sampled ||grad h||. A lower bound on the
    true constant; intended for user-supplied barriers without an analytic one."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return float(np.max(vnorm(b.gradient(points))))


@dataclass(frozen=True)
class ValidityReport:
    """Sampled check of the constraint max_v grad_h . f(z, v) + alpha h(z) >= 0."""

    alpha: float
    n_points: int
    n_valid: int
    margins: np.ndarray
    fail_indices: np.ndarray
    note: str = ""

    @property
    def all_valid(self) -> bool:
        return self.n_valid == self.n_points


def check_cbf_condition(b: BarrierFn, rom, alpha: float, grid, v_candidates) -> ValidityReport:
    """Evaluate the barrier decrease condition on sampled states and inputs.

    ``rom`` is either a reduced vector field f(z, v) or an object exposing one
    as ``rom_field``. For each grid state the best achievable margin
    max over candidates of grad_h(z) . f(z, v) + alpha h(z) is recorded; an
    empty candidate set gives margin -inf everywhere (nothing is achievable).
    """
    if alpha <= 0:
        raise ConfigurationError("alpha must be positive")
    f = getattr(rom, "rom_field", rom)
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    vs = np.asarray(v_candidates, dtype=float)
    h = b.value(grid)
    g = b.gradient(grid)
    if vs.size == 0:
        best = np.full(grid.shape[0], -np.inf)
    else:
        vs = np.atleast_2d(vs)
        # all (state, candidate) pairs at once: (G, C, n)
        zz = np.broadcast_to(grid[:, None, :], (grid.shape[0], vs.shape[0], grid.shape[1]))
        ff = f(zz, np.broadcast_to(vs[None, :, :], zz.shape))
        best = np.max(np.sum(g[:, None, :] * ff, axis=-1), axis=-1)
    margins = best + alpha * h
    valid = margins >= 0.0
    note = ""
    probe_v = np.array([0.7, -0.3])
    probe_out = np.asarray(f(grid[0], probe_v), dtype=float)
    if probe_out.shape == probe_v.shape and np.array_equal(probe_out, probe_v):
        note = (
            "reduced model acts as a single integrator with unconstrained input; "
            "the condition is satisfiable at any state by steering along grad_h"
        )
    return ValidityReport(
        alpha=float(alpha),
        n_points=int(grid.shape[0]),
        n_valid=int(np.count_nonzero(valid)),
        margins=margins,
        fail_indices=np.flatnonzero(~valid),
        note=note,
    )
