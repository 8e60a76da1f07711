"""Observation encoders mapping a world state to a fixed-length feature vector.

Six encodings are supported, selected by index:

  1 world-frame x, y, v of the ego, then of each other vehicle
  2 encoding 1 plus a per-vehicle presence bit c
  3 per-other relative dx, dy, dvx, dvy (other minus ego)
  4 encoding 3 prefixed by the ego x, y, v
  5 ego x, y, v, then per-other distance, heading difference, speed, TTC
  6 per-other distance, signed speed and lane index

All real-valued features are affinely normalized into [-1, 1] using ranges
derived from the map. Missing vehicle slots emit zeroed features, except for
the explicit padding values: presence c = 0, TTC = -1 and lane = 0 (both
pre-normalization).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .intersection import IntersectionMap
from .simulation import V_MAX, VehicleState, WorldState

TTC_MAX = 20.0  # clip horizon for time-to-collision, seconds
TTC_NONE = -1.0  # paths do not conflict


class Encoding(enum.IntEnum):
    XYV = 1
    XYVC = 2
    RELATIVE = 3
    RELATIVE_PLUS_EGO = 4
    DIST_PHI_V_TTC = 5
    DIST_V_LANE = 6


@dataclass(frozen=True)
class Range:
    lo: float
    hi: float

    def normalize(self, value: float) -> float:
        x = 2.0 * (value - self.lo) / (self.hi - self.lo) - 1.0
        return min(max(x, -1.0), 1.0)


@dataclass(frozen=True)
class ObservationSpec:
    encoding: Encoding
    max_others: int
    x: Range
    y: Range
    v: Range
    dpos: Range
    dv: Range
    dist: Range
    ttc: Range
    phi: Range
    lane: Range

    @staticmethod
    def for_map(imap: IntersectionMap, encoding: Encoding | int, max_others: int) -> "ObservationSpec":
        xmin, ymin, xmax, ymax = imap.bounding_box()
        span = max(xmax - xmin, ymax - ymin)
        diag = math.hypot(xmax - xmin, ymax - ymin)
        return ObservationSpec(
            encoding=Encoding(encoding),
            max_others=max_others,
            x=Range(xmin, xmax),
            y=Range(ymin, ymax),
            v=Range(0.0, V_MAX),
            dpos=Range(-span, span),
            dv=Range(-V_MAX, V_MAX),
            dist=Range(0.0, diag),
            ttc=Range(TTC_NONE, TTC_MAX),
            phi=Range(-math.pi, math.pi),
            lane=Range(0.0, 4.0),
        )

    @property
    def dimension(self) -> int:
        k = self.max_others
        return {
            Encoding.XYV: 3 + 3 * k,
            Encoding.XYVC: 3 + 4 * k,
            Encoding.RELATIVE: 4 * k,
            Encoding.RELATIVE_PLUS_EGO: 3 + 4 * k,
            Encoding.DIST_PHI_V_TTC: 3 + 4 * k,
            Encoding.DIST_V_LANE: 3 * k,
        }[self.encoding]


def _pose(vs: VehicleState, imap: IntersectionMap) -> tuple[np.ndarray, float]:
    poly = imap.polyline(vs.path_id)
    return poly.point_at(vs.s), poly.heading_at(vs.s)


def ttc(ego: VehicleState, other: VehicleState, imap: IntersectionMap) -> float:
    """Time until the conflict-zone occupancy intervals of both vehicles overlap.

    Assumes constant speeds. Returns -1 when the paths have no conflict zone,
    inf when the occupancy intervals never overlap, and 0 when both vehicles
    are inside the zone now.
    """
    lane_id = imap.lane_index(other.path_id)
    if lane_id == 0 or ego.path_id not in imap.ego_paths:
        return TTC_NONE
    zone = imap.conflict_zone(ego.path_id, lane_id)
    if zone is None:
        return TTC_NONE
    ego_iv = _occupancy(ego.s, ego.v, zone.path_enter, zone.path_exit)
    oth_iv = _occupancy(other.s, other.v, zone.lane_enter, zone.lane_exit)
    if ego_iv is None or oth_iv is None:
        return math.inf
    t_in = max(ego_iv[0], oth_iv[0])
    t_out = min(ego_iv[1], oth_iv[1])
    return t_in if t_in <= t_out else math.inf


def _occupancy(s: float, v: float, enter: float, exit_: float) -> tuple[float, float] | None:
    """Time interval during which the vehicle center lies inside [enter, exit]."""
    if s > exit_:
        return None
    if s >= enter:
        return 0.0, math.inf if v <= 0.0 else (exit_ - s) / v
    if v <= 0.0:
        return None
    return (enter - s) / v, (exit_ - s) / v


def encode(world: WorldState, spec: ObservationSpec, imap: IntersectionMap) -> np.ndarray:
    """Fixed-length normalized feature vector for the chosen encoding."""
    if len(world.others) > spec.max_others:
        raise ValueError(
            f"{len(world.others)} other vehicles exceed the spec maximum {spec.max_others}"
        )
    ego_pt, ego_heading = _pose(world.ego, imap)
    ego_vel = world.ego.v * np.array([math.cos(ego_heading), math.sin(ego_heading)])
    ego_block = [spec.x.normalize(ego_pt[0]), spec.y.normalize(ego_pt[1]), spec.v.normalize(world.ego.v)]

    features: list[float] = []
    enc = spec.encoding
    if enc in (Encoding.XYV, Encoding.XYVC, Encoding.RELATIVE_PLUS_EGO, Encoding.DIST_PHI_V_TTC):
        features.extend(ego_block)

    for slot in range(spec.max_others):
        present = slot < len(world.others)
        if not present:
            features.extend(_padding_block(enc, spec))
            continue
        other = world.others[slot]
        pt, heading = _pose(other, imap)
        vel = other.v * np.array([math.cos(heading), math.sin(heading)])
        if enc is Encoding.XYV:
            features += [spec.x.normalize(pt[0]), spec.y.normalize(pt[1]), spec.v.normalize(other.v)]
        elif enc is Encoding.XYVC:
            features += [
                spec.x.normalize(pt[0]),
                spec.y.normalize(pt[1]),
                spec.v.normalize(other.v),
                1.0,
            ]
        elif enc in (Encoding.RELATIVE, Encoding.RELATIVE_PLUS_EGO):
            features += [
                spec.dpos.normalize(pt[0] - ego_pt[0]),
                spec.dpos.normalize(pt[1] - ego_pt[1]),
                spec.dv.normalize(vel[0] - ego_vel[0]),
                spec.dv.normalize(vel[1] - ego_vel[1]),
            ]
        elif enc is Encoding.DIST_PHI_V_TTC:
            d = math.hypot(pt[0] - ego_pt[0], pt[1] - ego_pt[1])
            dphi = _wrap_angle(heading - ego_heading)
            t = ttc(world.ego, other, imap)
            t = min(t, TTC_MAX)  # inf encodes as the range maximum
            features += [
                spec.dist.normalize(d),
                spec.phi.normalize(dphi),
                spec.v.normalize(other.v),
                spec.ttc.normalize(t),
            ]
        elif enc is Encoding.DIST_V_LANE:
            d = math.hypot(pt[0] - ego_pt[0], pt[1] - ego_pt[1])
            features += [
                spec.dist.normalize(d),
                spec.dv.normalize(_signed_speed(vel)),
                spec.lane.normalize(imap.lane_index(other.path_id)),
            ]
    return np.asarray(features, dtype=float)


def _padding_block(enc: Encoding, spec: ObservationSpec) -> list[float]:
    if enc is Encoding.XYV:
        return [0.0, 0.0, 0.0]
    if enc is Encoding.XYVC:
        return [0.0, 0.0, 0.0, 0.0]
    if enc in (Encoding.RELATIVE, Encoding.RELATIVE_PLUS_EGO):
        return [0.0, 0.0, 0.0, 0.0]
    if enc is Encoding.DIST_PHI_V_TTC:
        return [0.0, 0.0, 0.0, spec.ttc.normalize(TTC_NONE)]
    return [0.0, 0.0, spec.lane.normalize(0.0)]


def _signed_speed(vel: np.ndarray) -> float:
    """Speed signed by travel direction: positive left-to-right or bottom-to-top."""
    speed = float(np.hypot(vel[0], vel[1]))
    primary = vel[0] if abs(vel[0]) >= abs(vel[1]) else vel[1]
    return math.copysign(speed, primary) if speed > 0.0 else 0.0


def _wrap_angle(a: float) -> float:
    while a > math.pi:
        a -= 2.0 * math.pi
    while a < -math.pi:
        a += 2.0 * math.pi
    return a
