"""T-intersection map: lane and turn-path geometry, conflict zones and the
versioned plain-text map config.

The default map is a T-intersection with a two-lane main road (one lane per
direction) and a minor road from the south. The ego vehicle enters on the
minor road and follows one of two predefined turn paths onto the main road.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import OrientedRect, Polyline, arc_points, rect_overlaps_many

MAP_FORMAT = "riskcross-map/1"

LANE_WIDTH = 3.5
VEHICLE_LENGTH = 4.5
VEHICLE_WIDTH = 2.0

# sampling resolution for polylines and conflict-zone screening
SAMPLE_STEP = 0.5


@dataclass
class Lane:
    lane_id: int
    polyline: Polyline

    @property
    def path_id(self) -> str:
        return f"lane{self.lane_id}"


@dataclass
class EgoPath:
    name: str
    polyline: Polyline
    goal_s: float

    def __post_init__(self):
        if not 0.0 < self.goal_s <= self.polyline.length + 1e-9:
            raise ValueError(f"goal arc length {self.goal_s} outside path {self.name}")


@dataclass
class ConflictZone:
    """Arc-length intervals on an ego path and a lane whose footprints can overlap.

    Bounds are computed from footprint overlap, so they already account for
    vehicle dimensions: a vehicle whose center is inside its interval can
    collide with a vehicle inside the paired interval.
    """

    path_name: str
    lane_id: int
    path_enter: float
    path_exit: float
    lane_enter: float
    lane_exit: float


class MapConfigError(Exception):
    """Raised for unknown path references or malformed map configs."""


@dataclass
class IntersectionMap:
    lanes: dict[int, Lane]
    ego_paths: dict[str, EgoPath]
    _zones: dict[tuple[str, int], ConflictZone | None] = field(default_factory=dict, repr=False)
    _lane_samples: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict, repr=False)

    def polyline(self, path_id: str) -> Polyline:
        if path_id in self.ego_paths:
            return self.ego_paths[path_id].polyline
        lane = self._lane_for(path_id)
        if lane is not None:
            return lane.polyline
        raise MapConfigError(f"unknown path id {path_id!r}")

    def _lane_for(self, path_id: str) -> Lane | None:
        if path_id.startswith("lane"):
            try:
                return self.lanes[int(path_id[4:])]
            except (ValueError, KeyError):
                return None
        return None

    def lane_index(self, path_id: str) -> int:
        """Lane index 1..4 for lane paths, 0 for ego turn paths."""
        lane = self._lane_for(path_id)
        return lane.lane_id if lane is not None else 0

    def bounding_box(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) over all mapped geometry."""
        pts = np.vstack(
            [lane.polyline.points for lane in self.lanes.values()]
            + [p.polyline.points for p in self.ego_paths.values()]
        )
        return (
            float(pts[:, 0].min()),
            float(pts[:, 1].min()),
            float(pts[:, 0].max()),
            float(pts[:, 1].max()),
        )

    def lane_samples(self, lane_id: int) -> tuple[np.ndarray, np.ndarray]:
        """Cached (arc_lengths, points) along a lane centerline at 0.5 m spacing."""
        if lane_id not in self._lane_samples:
            poly = self.lanes[lane_id].polyline
            s = poly.sample(SAMPLE_STEP)
            self._lane_samples[lane_id] = (s, poly.points_at(s))
        return self._lane_samples[lane_id]

    def conflict_zone(self, path_name: str, lane_id: int) -> ConflictZone | None:
        key = (path_name, lane_id)
        if key not in self._zones:
            self._zones[key] = _compute_conflict_zone(
                self.ego_paths[path_name], self.lanes[lane_id]
            )
        return self._zones[key]


def _compute_conflict_zone(path: EgoPath, lane: Lane) -> ConflictZone | None:
    """Screen all pose pairs on the two polylines with footprint overlap tests."""
    ps = path.polyline.sample(SAMPLE_STEP)
    ls = lane.polyline.sample(SAMPLE_STEP)
    lane_pts = lane.polyline.points_at(ls)
    lane_head = np.array([lane.polyline.heading_at(s) for s in ls])

    path_hit = np.zeros(len(ps), dtype=bool)
    lane_hit = np.zeros(len(ls), dtype=bool)
    for i, s in enumerate(ps):
        rect = OrientedRect(
            path.polyline.point_at(s), path.polyline.heading_at(s), VEHICLE_LENGTH, VEHICLE_WIDTH
        )
        mask = rect_overlaps_many(rect, lane_pts, lane_head, VEHICLE_LENGTH, VEHICLE_WIDTH)
        if mask.any():
            path_hit[i] = True
            lane_hit |= mask
    if not path_hit.any():
        return None
    return ConflictZone(
        path_name=path.name,
        lane_id=lane.lane_id,
        path_enter=float(ps[path_hit].min()),
        path_exit=float(ps[path_hit].max()),
        lane_enter=float(ls[lane_hit].min()),
        lane_exit=float(ls[lane_hit].max()),
    )


def build_default_map() -> IntersectionMap:
    """The desk-scale T-intersection.

    Main road runs east-west with 120 m legs each side of the junction
    center (long enough to host a three-vehicle platoon at the largest gap
    class upstream of the junction); the minor road approaches from the
    south with a 40 m leg. Lane width is 3.5 m. Lane ids: 1 eastbound main,
    2 westbound main, 3 northbound approach (ego side), 4 southbound
    approach.
    """
    half = LANE_WIDTH / 2.0  # 1.75
    edge = LANE_WIDTH  # main road half-width, y of the southern road edge

    lanes = {
        1: Lane(1, Polyline(np.array([[-120.0, -half], [120.0, -half]]))),
        2: Lane(2, Polyline(np.array([[120.0, half], [-120.0, half]]))),
        3: Lane(3, Polyline(np.array([[half, -edge - 40.0], [half, -edge]]))),
        4: Lane(4, Polyline(np.array([[-half, -edge], [-half, -edge - 40.0]]))),
    }

    # Turn right: short straight, r=4 clockwise arc onto the eastbound lane,
    # exit east. The arc starts at angle pi (heading north) and sweeps down to
    # pi/2 (heading east), which is already the travel order.
    r_right = 4.0
    start_y = -15.5
    center_right = (half + r_right, -half - r_right)
    right_pts = np.vstack(
        [
            np.array([[half, start_y]]),
            arc_points(center_right, r_right, math.pi, math.pi / 2.0),
            np.array([[30.0, -half]]),
        ]
    )
    # Turn left: straight, r=6 counterclockwise arc across the eastbound lane
    # onto the westbound lane, exit west.
    r_left = 6.0
    center_left = (half - r_left, half - r_left)
    left_pts = np.vstack(
        [
            np.array([[half, start_y]]),
            arc_points(center_left, r_left, 0.0, math.pi / 2.0),
            np.array([[-30.0, half]]),
        ]
    )

    paths = {}
    for name, pts in (("turn_right", right_pts), ("turn_left", left_pts)):
        pts = _dedupe(pts)
        poly = Polyline(pts)
        paths[name] = EgoPath(name=name, polyline=poly, goal_s=poly.length)
    return IntersectionMap(lanes=lanes, ego_paths=paths)


def _dedupe(pts: np.ndarray, eps: float = 1e-9) -> np.ndarray:
    keep = [0]
    for i in range(1, len(pts)):
        if np.hypot(*(pts[i] - pts[keep[-1]])) > eps:
            keep.append(i)
    return pts[keep]


def map_to_config(imap: IntersectionMap) -> str:
    doc = {
        "format": MAP_FORMAT,
        "lanes": [
            {"id": lane.lane_id, "points": lane.polyline.points.tolist()}
            for lane in sorted(imap.lanes.values(), key=lambda l: l.lane_id)
        ],
        "ego_paths": [
            {"name": p.name, "points": p.polyline.points.tolist(), "goal_s": p.goal_s}
            for p in sorted(imap.ego_paths.values(), key=lambda p: p.name)
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def map_from_config(text: str) -> IntersectionMap:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MapConfigError(f"map config is not valid JSON: {exc}") from exc
    if doc.get("format") != MAP_FORMAT:
        raise MapConfigError(f"unsupported map format {doc.get('format')!r}")
    lanes = {
        entry["id"]: Lane(entry["id"], Polyline(np.array(entry["points"], dtype=float)))
        for entry in doc["lanes"]
    }
    paths = {
        entry["name"]: EgoPath(
            entry["name"], Polyline(np.array(entry["points"], dtype=float)), entry["goal_s"]
        )
        for entry in doc["ego_paths"]
    }
    return IntersectionMap(lanes=lanes, ego_paths=paths)
