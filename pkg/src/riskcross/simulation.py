"""Deterministic fixed-timestep longitudinal simulation on the intersection map.

Vehicles move along predefined paths (turn paths for the ego, lanes for the
others) with semi-implicit Euler integration, a 54 km/h speed cap and no
reversing. Collision detection uses oriented-rectangle footprints.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .geometry import OrientedRect, rects_overlap
from .intersection import IntersectionMap, MapConfigError

DT = 0.2
V_MAX = 15.0  # 54 km/h
A_MIN = -4.0
A_MAX = 5.0
MAX_EPISODE_TIME = 14.0


class Terminal(enum.Enum):
    RUNNING = "running"
    GOAL = "goal"
    COLLISION = "collision"
    TIMEOUT = "timeout"


class SimulationError(Exception):
    """Contract violation, e.g. stepping a terminal world."""


@dataclass(frozen=True)
class VehicleState:
    path_id: str
    s: float
    v: float
    a: float = 0.0
    length: float = 4.5
    width: float = 2.0

    def __post_init__(self):
        if not 0.0 <= self.v <= V_MAX + 1e-9:
            raise ValueError(f"speed {self.v} outside [0, {V_MAX}]")
        if not A_MIN - 1e-9 <= self.a <= A_MAX + 1e-9:
            raise ValueError(f"acceleration {self.a} outside [{A_MIN}, {A_MAX}]")


@dataclass(frozen=True)
class WorldState:
    t: float
    ego: VehicleState
    others: tuple[VehicleState, ...]
    terminal: Terminal = Terminal.RUNNING


def footprint(vs: VehicleState, imap: IntersectionMap) -> OrientedRect:
    """Oriented rectangle at the path point for arc length s (clamped at ends)."""
    poly = imap.polyline(vs.path_id)  # raises MapConfigError for unknown ids
    return OrientedRect(poly.point_at(vs.s), poly.heading_at(vs.s), vs.length, vs.width)


def _advance(vs: VehicleState, accel: float, imap: IntersectionMap) -> VehicleState:
    if not A_MIN - 1e-9 <= accel <= A_MAX + 1e-9:
        raise SimulationError(f"acceleration {accel} outside [{A_MIN}, {A_MAX}]")
    v_new = min(max(vs.v + accel * DT, 0.0), V_MAX)
    s_new = min(vs.s + v_new * DT, imap.polyline(vs.path_id).length)
    return replace(vs, s=s_new, v=v_new, a=accel)


def check_termination(
    world: WorldState, imap: IntersectionMap, max_time: float = MAX_EPISODE_TIME
) -> Terminal:
    """Collision takes precedence over goal; timeout only applies short of the goal."""
    ego_rect = footprint(world.ego, imap)
    for other in world.others:
        if rects_overlap(ego_rect, footprint(other, imap)):
            return Terminal.COLLISION
    goal_s = imap.ego_paths[world.ego.path_id].goal_s
    if world.ego.s >= goal_s - 1e-9:
        return Terminal.GOAL
    if world.t >= max_time - 1e-9:
        return Terminal.TIMEOUT
    return Terminal.RUNNING


def step(
    world: WorldState,
    ego_accel: float,
    other_accels: list[float],
    imap: IntersectionMap,
    max_time: float = MAX_EPISODE_TIME,
) -> WorldState:
    """Advance all vehicles one 0.2 s tick and re-evaluate termination."""
    if world.terminal is not Terminal.RUNNING:
        raise SimulationError("cannot step a terminal world")
    if len(other_accels) != len(world.others):
        raise SimulationError(
            f"expected {len(world.others)} accelerations, got {len(other_accels)}"
        )
    ego = _advance(world.ego, ego_accel, imap)
    others = tuple(
        _advance(vs, acc, imap) for vs, acc in zip(world.others, other_accels)
    )
    # keep t an exact multiple of DT despite float accumulation
    ticks = round(world.t / DT) + 1
    new_world = WorldState(t=ticks * DT, ego=ego, others=others)
    return replace(new_world, terminal=check_termination(new_world, imap, max_time))


def initial_world(ego: VehicleState, others: list[VehicleState]) -> WorldState:
    return WorldState(t=0.0, ego=ego, others=tuple(others))
