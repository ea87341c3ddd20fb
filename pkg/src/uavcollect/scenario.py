"""Flight geometry: region, ground nodes, UAV kinematics and coverage."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class Region:
    """Axis-aligned flying rectangle with its corner at the origin."""

    x_max: float = 1000.0
    y_max: float = 1000.0

    def __post_init__(self):
        if not (self.x_max > 0 and self.y_max > 0):
            raise ValueError(f"region extents must be positive, got {self.x_max}, {self.y_max}")

    def contains(self, xy, tol: float = 0.0) -> bool:
        x, y = xy
        return -tol <= x <= self.x_max + tol and -tol <= y <= self.y_max + tol

    def clamp(self, xy) -> np.ndarray:
        return np.array([min(max(xy[0], 0.0), self.x_max), min(max(xy[1], 0.0), self.y_max)])

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.x_max, self.y_max))


@dataclass(frozen=True)
class GroundNode:
    id: int
    position: np.ndarray  # (2,) meters


@dataclass(frozen=True)
class KinematicLimits:
    v_min: float = 5.0
    v_max: float = 17.0
    a_max: float = 10.0
    slot_duration: float = 1.0
    n_slots: int = 30

    def __post_init__(self):
        if not 0 < self.v_min <= self.v_max:
            raise ValueError("need 0 < v_min <= v_max")
        if self.a_max <= 0 or self.slot_duration <= 0:
            raise ValueError("a_max and slot_duration must be positive")
        if self.n_slots < 1:
            raise ValueError("n_slots must be >= 1")


@dataclass(frozen=True)
class CoverageRule:
    d_threshold: float = 250.0
    use_3d: bool = True

    def __post_init__(self):
        if self.d_threshold <= 0:
            raise ValueError("d_threshold must be positive")


@dataclass(frozen=True)
class UavState:
    """UAV position/velocity at the start of ``slot``.

    ``velocity`` is the commanded velocity of the previous move and is
    ``None`` before the first move.
    """

    position: np.ndarray
    altitude: float = 50.0
    velocity: np.ndarray | None = None
    slot: int = 1


def place_nodes(region: Region, k: int, rng: np.random.Generator | None = None, positions=None):
    """Explicit coordinates when given, otherwise uniform placement over the region."""
    if positions is not None:
        pts = np.asarray(positions, dtype=float).reshape(-1, 2)
        if len(pts) != k:
            raise ValueError(f"expected {k} node positions, got {len(pts)}")
    else:
        if rng is None:
            raise ValueError("need an rng for random node placement")
        pts = rng.uniform([0.0, 0.0], [region.x_max, region.y_max], size=(k, 2))
    nodes = []
    for i, p in enumerate(pts):
        if not region.contains(p):
            raise ValueError(f"node {i} at {p} lies outside the region")
        nodes.append(GroundNode(i, np.array(p, dtype=float)))
    return nodes


def advance_uav(state: UavState, distance: float, heading: float, limits: KinematicLimits,
                region: Region):
    """Move by ``distance`` along ``heading``; returns ``(new_state, out_of_bounds)``.

    A move leaving the region is clamped onto the boundary and flagged. The
    recorded velocity is the commanded displacement over the slot duration.
    """
    if distance < 0:
        raise ValueError("distance must be non-negative")
    step = distance * np.array([np.cos(heading), np.sin(heading)])
    target = np.asarray(state.position, dtype=float) + step
    oob = not region.contains(target)
    pos = region.clamp(target) if oob else target
    new = replace(state, position=pos, velocity=step / limits.slot_duration, slot=state.slot + 1)
    return new, oob


def _violation(vel, prev_vel, limits: KinematicLimits) -> float:
    speed = np.hypot(*vel)
    v = max(0.0, limits.v_min - speed) + max(0.0, speed - limits.v_max)
    if prev_vel is not None:
        acc = np.hypot(*(vel - prev_vel)) / limits.slot_duration
        v += max(0.0, acc - limits.a_max)
    return v


def feasible_action_mask(state: UavState, distance_levels, heading_levels,
                         limits: KinematicLimits, tol: float = 1e-9) -> np.ndarray:
    """Boolean grid ``[distance, heading]`` of moves obeying speed and acceleration limits.

    The first move only has to respect the speed band. When no pair is
    feasible the least-violating one is enabled so an episode can always go on.
    """
    if state.slot < 1:
        raise ValueError("slot index starts at 1")
    d = np.asarray(distance_levels, dtype=float)
    th = np.asarray(heading_levels, dtype=float)
    tau = limits.slot_duration
    vx = d[:, None] * np.cos(th)[None, :] / tau
    vy = d[:, None] * np.sin(th)[None, :] / tau
    speed = np.hypot(vx, vy)
    viol = np.maximum(0.0, limits.v_min - speed) + np.maximum(0.0, speed - limits.v_max)
    if state.velocity is not None:
        pv = np.asarray(state.velocity, dtype=float)
        acc = np.hypot(vx - pv[0], vy - pv[1]) / tau
        viol = viol + np.maximum(0.0, acc - limits.a_max)
    mask = viol <= tol
    if not mask.any():
        mask[np.unravel_index(np.argmin(viol), viol.shape)] = True
    return mask


def kinematic_violations(velocities, limits: KinematicLimits, tol: float = 1e-9) -> int:
    """Count speed/acceleration violations along a sequence of per-move velocities."""
    count = 0
    prev = None
    for v in velocities:
        v = np.asarray(v, dtype=float)
        if _violation(v, prev, limits) > tol:
            count += 1
        prev = v
    return count


def node_distance(uav: UavState, node: GroundNode, use_3d: bool = True) -> float:
    dx, dy = np.asarray(uav.position) - node.position
    if use_3d:
        return float(np.sqrt(dx * dx + dy * dy + uav.altitude ** 2))
    return float(np.hypot(dx, dy))


def coverage_indicator(uav: UavState, node: GroundNode, rule: CoverageRule) -> int:
    return int(node_distance(uav, node, rule.use_3d) <= rule.d_threshold)


def scheduled_set(uav: UavState, nodes, rule: CoverageRule) -> list[int]:
    return [n.id for n in nodes if coverage_indicator(uav, n, rule)]
