"""Exact-solution oracle, error norms, mass, symmetry and mode tracking.

All functions here are read-only analyses of immutable snapshots and
trajectories; they can run concurrently without restriction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .stepping import Trajectory

__all__ = [
    "Snapshot",
    "MpppPoint",
    "exact_levy_density",
    "error_norms",
    "total_mass",
    "mirror_check",
    "mppp",
    "snapshots_of",
    "window",
]


@dataclass(frozen=True)
class Snapshot:
    """Density values on the physical interior nodes at one time."""

    t: float
    x_nodes: np.ndarray
    p_values: np.ndarray

    def __post_init__(self) -> None:
        if self.x_nodes.shape != self.p_values.shape:
            raise ValueError("x_nodes and p_values must have equal shape")
        if np.any(np.diff(self.x_nodes) <= 0.0):
            raise ValueError("x_nodes must be strictly increasing")
        if not np.all(np.isfinite(self.p_values)):
            raise ValueError("p_values must be finite")


def snapshots_of(traj: Trajectory) -> list[Snapshot]:
    """View a trajectory's entries as physical-space snapshots."""
    return [Snapshot(t=e.t, x_nodes=traj.x_nodes, p_values=e.values)
            for e in traj.entries]


def window(snap: Snapshot, x_min: float, x_max: float) -> Snapshot:
    """Restrict a snapshot to nodes with x_min < x <= x_max."""
    keep = (snap.x_nodes > x_min) & (snap.x_nodes <= x_max)
    if not np.any(keep):
        raise ValueError("window contains no grid nodes")
    return Snapshot(t=snap.t, x_nodes=snap.x_nodes[keep], p_values=snap.p_values[keep])


def exact_levy_density(x, t: float):
    """Closed-form density of the fully skewed alpha = 1/2 process.

    p(x, t) = x^(-3/2) t / sqrt(2 pi) * exp(-t^2 / (2x)) for x > 0 and zero
    for x <= 0; it integrates to one over (0, inf) and peaks at x = t^2/3.
    """
    if t <= 0.0:
        raise ValueError(f"exact_levy_density requires t > 0, got {t}")
    x_arr = np.asarray(x, dtype=float)
    out = np.zeros_like(x_arr)
    pos = x_arr > 0.0
    xp = x_arr[pos]
    out[pos] = xp ** -1.5 * (t / math.sqrt(2.0 * math.pi)) * np.exp(-t * t / (2.0 * xp))
    return float(out) if np.isscalar(x) or x_arr.ndim == 0 else out


def error_norms(num: Snapshot, exact: Callable[[np.ndarray], np.ndarray]) -> tuple[float, float]:
    """(sup over nodes, trapezoidal L1) distance to a reference function."""
    diff = np.abs(num.p_values - np.asarray(exact(num.x_nodes), dtype=float))
    return float(diff.max()), float(np.trapezoid(diff, num.x_nodes))


def total_mass(snap: Snapshot) -> float:
    """Trapezoidal integral of the density over the represented nodes."""
    return float(np.trapezoid(snap.p_values, snap.x_nodes))


def mirror_check(traj_plus: Trajectory, traj_minus: Trajectory) -> float:
    """Largest violation of the reflection identity between two trajectories.

    traj_minus must come from the mirrored problem (-beta, x -> -f(-x),
    reflected initial state) on the same grid and schedule; returns
    max over snapshots of sup_j |V^(+)_j - V^(-)_{-j}|.
    """
    tp, tm = traj_plus.times, traj_minus.times
    if len(tp) != len(tm) or any(abs(a - b) > 1e-12 for a, b in zip(tp, tm)):
        raise ValueError("trajectories have different snapshot schedules")
    if traj_plus.x_nodes.shape != traj_minus.x_nodes.shape:
        raise ValueError("trajectories live on different grids")
    worst = 0.0
    for ep, em in zip(traj_plus.entries, traj_minus.entries):
        worst = max(worst, float(np.max(np.abs(ep.values - em.values[::-1]))))
    return worst


@dataclass(frozen=True)
class MpppPoint:
    """Location of the density maximum at one snapshot time.

    x_node is the raw argmax node (ties resolved toward smaller |x|, then
    smaller x); x_refined is the vertex of the parabola through the argmax
    and its neighbors.  defined is False for an all-zero snapshot.
    """

    t: float
    x_node: float
    x_refined: float
    defined: bool = True


def _argmax_small_abs(x: np.ndarray, v: np.ndarray) -> int:
    vmax = v.max()
    ties = np.flatnonzero(v == vmax)
    order = np.lexsort((x[ties], np.abs(x[ties])))
    return int(ties[order[0]])


def mppp(traj: Trajectory, refine: bool = True) -> list[MpppPoint]:
    """Most probable path: per-snapshot argmax of the density.

    Invariant under positive rescaling of the density.  The parabola
    refinement is reported alongside the raw node; degenerate cases
    (boundary argmax, flat neighbors) fall back to the node location.
    """
    if not traj.entries:
        raise ValueError("trajectory has no snapshots")
    x = traj.x_nodes
    h = float(x[1] - x[0])
    points = []
    for e in traj.entries:
        v = e.values
        if not np.any(v != 0.0):
            points.append(MpppPoint(t=e.t, x_node=math.nan, x_refined=math.nan,
                                    defined=False))
            continue
        k = _argmax_small_abs(x, v)
        xk = float(x[k])
        xr = xk
        if refine and 0 < k < len(x) - 1:
            denom = v[k - 1] - 2.0 * v[k] + v[k + 1]
            if denom < 0.0:
                xr = xk + 0.5 * h * float((v[k - 1] - v[k + 1]) / denom)
        points.append(MpppPoint(t=e.t, x_node=xk, x_refined=xr))
    return points
