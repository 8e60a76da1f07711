"""Driving-style policies for the other participants.

Both styles follow the Intelligent Driver Model along their lane. A passive
driver additionally treats the ego vehicle as a leader when its footprint
blocks the lane corridor ahead; an aggressive driver never yields to the ego
and only keeps the gap to other lane traffic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .intersection import IntersectionMap
from .simulation import A_MAX, A_MIN, WorldState, footprint

EGO_INFLATION = 0.5  # footprint margin for the lane-occupancy test, meters
YIELD_HORIZON = 30.0  # how far ahead a passive driver reacts, meters


class BehaviorType(enum.Enum):
    PASSIVE = "passive"
    AGGRESSIVE = "aggressive"


@dataclass(frozen=True)
class TypeDistribution:
    """Sampling weights over behavior types; must sum to one."""

    weights: dict[BehaviorType, float]

    def __post_init__(self):
        if any(w < 0.0 for w in self.weights.values()):
            raise ValueError("type weights must be non-negative")
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"type weights sum to {total}, expected 1")

    @staticmethod
    def single() -> "TypeDistribution":
        return TypeDistribution({BehaviorType.AGGRESSIVE: 1.0})

    @staticmethod
    def mixed() -> "TypeDistribution":
        return TypeDistribution({BehaviorType.PASSIVE: 0.5, BehaviorType.AGGRESSIVE: 0.5})

    @staticmethod
    def named(name: str) -> "TypeDistribution":
        try:
            return {"single": TypeDistribution.single, "mixed": TypeDistribution.mixed}[name]()
        except KeyError:
            raise ValueError(f"unknown type distribution {name!r}") from None


@dataclass(frozen=True)
class IdmParams:
    v0: float  # desired speed, m/s
    T_headway: float = 1.5
    s0: float = 2.0
    a_max: float = 2.0
    b_comf: float = 2.0
    delta: float = 4.0

    def __post_init__(self):
        if min(self.v0, self.T_headway, self.s0, self.a_max, self.b_comf, self.delta) <= 0:
            raise ValueError("IDM parameters must be positive")
        if self.a_max > A_MAX or self.b_comf > -A_MIN:
            raise ValueError("IDM accelerations exceed the vehicle limits")


def idm_accel(ego_v: float, gap: float, lead_v: float, p: IdmParams) -> float:
    """IDM acceleration toward a leader at bumper gap `gap` with speed `lead_v`.

    gap = inf means free road (no interaction term). A non-positive gap is
    already in the contact region and returns full braking. The dynamic part
    of the desired gap is floored at zero so that a rapidly receding leader
    cannot increase the interaction term.
    """
    free = 1.0 - (ego_v / p.v0) ** p.delta
    if math.isinf(gap):
        return _clamp(p.a_max * free)
    if gap <= 0.0:
        return A_MIN
    dv = ego_v - lead_v
    s_star = p.s0 + max(0.0, ego_v * p.T_headway + ego_v * dv / (2.0 * math.sqrt(p.a_max * p.b_comf)))
    return _clamp(p.a_max * (free - (s_star / gap) ** 2))


def _clamp(a: float) -> float:
    return min(max(a, A_MIN), A_MAX)


def _same_lane_leader(world: WorldState, idx: int) -> tuple[float, float]:
    """(bumper gap, speed) of the nearest vehicle ahead on the same lane."""
    me = world.others[idx]
    gap, lead_v = math.inf, 0.0
    for j, other in enumerate(world.others):
        if j == idx or other.path_id != me.path_id or other.s <= me.s:
            continue
        g = other.s - me.s - 0.5 * (other.length + me.length)
        if g < gap:
            gap, lead_v = g, other.v
    return gap, lead_v


def _ego_as_leader(
    world: WorldState, idx: int, imap: IntersectionMap
) -> tuple[float, float]:
    """(bumper gap, projected speed) if the ego blocks this vehicle's corridor ahead.

    The ego footprint, inflated by 0.5 m, is intersected with the lane
    centerline samples within the forward horizon; the nearest captured
    sample marks where the blocked region begins. The leader speed is the
    ego speed projected on the lane direction (floored at zero), so a
    crossing ego acts like a near-stationary obstacle.
    """
    me = world.others[idx]
    lane_id = imap.lane_index(me.path_id)
    if lane_id == 0:
        return math.inf, 0.0
    ego_rect = footprint(world.ego, imap).inflated(EGO_INFLATION)
    s_all, pts = imap.lane_samples(lane_id)
    window = (s_all > me.s) & (s_all <= me.s + YIELD_HORIZON)
    if not window.any():
        return math.inf, 0.0
    inside = ego_rect.contains_points(pts[window])
    if not inside.any():
        return math.inf, 0.0
    s_block = float(s_all[window][inside].min())
    gap = s_block - me.s - 0.5 * me.length
    lane_poly = imap.polyline(me.path_id)
    ego_heading = imap.polyline(world.ego.path_id).heading_at(world.ego.s)
    proj = world.ego.v * math.cos(ego_heading - lane_poly.heading_at(s_block))
    return gap, max(proj, 0.0)


def policy_act(
    world: WorldState,
    vehicle_index: int,
    btype: BehaviorType,
    imap: IntersectionMap,
    params: IdmParams,
) -> float:
    """Acceleration command for one non-ego vehicle under its behavior type."""
    gap, lead_v = _same_lane_leader(world, vehicle_index)
    if btype is BehaviorType.PASSIVE:
        ego_gap, ego_v = _ego_as_leader(world, vehicle_index, imap)
        if ego_gap < gap:
            gap, lead_v = ego_gap, ego_v
    v = world.others[vehicle_index].v
    return idm_accel(v, gap, lead_v, params)


def _sample_type(dist: TypeDistribution, rng: np.random.Generator) -> BehaviorType:
    u = rng.random()
    acc = 0.0
    ordered = sorted(dist.weights.items(), key=lambda kv: kv[0].value)
    for btype, w in ordered:
        acc += w
        if u < acc:
            return btype
    return ordered[-1][0]


def sample_episode_types(dist: TypeDistribution, rng_seed: int) -> BehaviorType:
    """One behavior type for the whole episode, deterministic given the seed."""
    return _sample_type(dist, np.random.default_rng(rng_seed))
