"""Episode definitions and dataset generation for the four turning scenarios.

An episode definition freezes everything random about an episode: the other
vehicles' initial lane positions and speeds, the slot order they occupy in
the observation vector, the behavior type all of them apply, and the gap
class used for same-lane spacing. Datasets are line-delimited JSON with a
header record carrying format version, scenario and generating seed.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .behaviors import BehaviorType, TypeDistribution, _sample_type
from .intersection import VEHICLE_LENGTH, IntersectionMap

DATASET_FORMAT = "riskcross-dataset/1"

SPEED_MIN = 29.0 / 3.6  # other participants, m/s
SPEED_MAX = 36.0 / 3.6


class Scenario(enum.Enum):
    TURN_RIGHT_X2 = "turn_right_x2"
    TURN_LEFT_X2 = "turn_left_x2"
    TURN_LEFT_X4 = "turn_left_x4"
    TURN_RIGHT_PLATOON = "turn_right_platoon"

    @property
    def ego_path(self) -> str:
        return "turn_left" if "left" in self.value else "turn_right"

    @property
    def max_others(self) -> int:
        return {"turn_right_x2": 2, "turn_left_x2": 2, "turn_left_x4": 4, "turn_right_platoon": 3}[
            self.value
        ]

    @property
    def lane_pattern(self) -> tuple[int, ...]:
        """Lane assignment by spawn order; same-lane successors queue behind."""
        return {
            "turn_right_x2": (1, 1),
            "turn_left_x2": (1, 2),
            "turn_left_x4": (1, 2, 1, 2),
            "turn_right_platoon": (1, 1, 1),
        }[self.value]

    @property
    def lead_window(self) -> tuple[float, float]:
        """Distance range of a lane's first vehicle to the conflict-zone entry."""
        return (10.0, 30.0) if self is Scenario.TURN_RIGHT_PLATOON else (12.0, 55.0)


class GapClass(enum.Enum):
    SMALL = "small"
    INTERMEDIATE = "intermediate"
    LARGE = "large"

    @property
    def bounds(self) -> tuple[float, float]:
        return {"small": (6.0, 10.0), "intermediate": (12.0, 20.0), "large": (25.0, 40.0)}[
            self.value
        ]


@dataclass(frozen=True)
class OtherInit:
    lane_id: int
    s: float
    v: float


@dataclass(frozen=True)
class EpisodeDefinition:
    episode_id: int
    scenario: Scenario
    others: tuple[OtherInit, ...]
    behavior: BehaviorType
    gap_class: GapClass

    def __post_init__(self):
        if len(self.others) > self.scenario.max_others:
            raise ValueError("participant count exceeds the scenario maximum")
        for o in self.others:
            if not SPEED_MIN - 1e-9 <= o.v <= SPEED_MAX + 1e-9:
                raise ValueError(f"other speed {o.v} outside [{SPEED_MIN}, {SPEED_MAX}]")


def generate_episodes(
    imap: IntersectionMap,
    scenario: Scenario,
    type_dist: TypeDistribution,
    count: int,
    seed: int,
    fixed_count: int | None = None,
) -> list[EpisodeDefinition]:
    """Deterministic episode list: varied participant count, speeds, gap
    classes and shuffled slot order, with one behavior type per episode.

    fixed_count pins the participant count instead of varying it (used by
    the single-participant observation benchmark).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if fixed_count is not None and not 1 <= fixed_count <= scenario.max_others:
        raise ValueError(f"fixed_count {fixed_count} outside 1..{scenario.max_others}")
    rng = np.random.default_rng(seed)
    entries: list[EpisodeDefinition] = []
    pattern = scenario.lane_pattern
    zone_enter = {
        lane_id: imap.conflict_zone(scenario.ego_path, lane_id).lane_enter
        for lane_id in set(pattern)
    }
    for i in range(count):
        n = fixed_count if fixed_count is not None else int(rng.integers(1, scenario.max_others + 1))
        gap_class = GapClass(list(GapClass)[int(rng.integers(len(GapClass)))])
        others: list[OtherInit] = []
        tail_s: dict[int, float] = {}
        for lane_id in pattern[:n]:
            v = float(rng.uniform(SPEED_MIN, SPEED_MAX))
            if lane_id not in tail_s:
                lead_lo, lead_hi = scenario.lead_window
                s = zone_enter[lane_id] - float(rng.uniform(lead_lo, lead_hi))
            else:
                gap = float(rng.uniform(*gap_class.bounds))
                s = tail_s[lane_id] - gap - VEHICLE_LENGTH
            if s < 0.5 * VEHICLE_LENGTH:
                s = 0.5 * VEHICLE_LENGTH  # keep the footprint on the map
            tail_s[lane_id] = s
            others.append(OtherInit(lane_id=lane_id, s=s, v=v))
        order = rng.permutation(len(others))
        behavior = _sample_type(type_dist, rng)
        entries.append(
            EpisodeDefinition(
                episode_id=i,
                scenario=scenario,
                others=tuple(others[j] for j in order),
                behavior=behavior,
                gap_class=gap_class,
            )
        )
    return entries


def write_dataset(
    path: str,
    episodes: list[EpisodeDefinition],
    scenario: Scenario,
    type_dist_name: str,
    seed: int,
) -> None:
    header = {
        "format": DATASET_FORMAT,
        "scenario": scenario.value,
        "types": type_dist_name,
        "seed": seed,
        "count": len(episodes),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for ep in episodes:
            rec = {
                "id": ep.episode_id,
                "behavior": ep.behavior.value,
                "gap_class": ep.gap_class.value,
                "others": [[o.lane_id, o.s, o.v] for o in ep.others],
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


class DatasetError(Exception):
    pass


def read_dataset(path: str) -> tuple[dict, list[EpisodeDefinition]]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    if not lines:
        raise DatasetError(f"{path}: empty dataset file")
    header = json.loads(lines[0])
    if header.get("format") != DATASET_FORMAT:
        raise DatasetError(f"{path}: unsupported dataset format {header.get('format')!r}")
    scenario = Scenario(header["scenario"])
    episodes = []
    for line in lines[1:]:
        rec = json.loads(line)
        episodes.append(
            EpisodeDefinition(
                episode_id=rec["id"],
                scenario=scenario,
                others=tuple(OtherInit(int(l), float(s), float(v)) for l, s, v in rec["others"]),
                behavior=BehaviorType(rec["behavior"]),
                gap_class=GapClass(rec["gap_class"]),
            )
        )
    if len(episodes) != header["count"]:
        raise DatasetError(f"{path}: header count {header['count']} != {len(episodes)} records")
    return header, episodes
