import numpy as np
import pytest

from riskcross.behaviors import BehaviorType, TypeDistribution
from riskcross.intersection import VEHICLE_LENGTH, build_default_map
from riskcross.scenarios import (
    SPEED_MAX,
    SPEED_MIN,
    DatasetError,
    GapClass,
    Scenario,
    generate_episodes,
    read_dataset,
    write_dataset,
)


@pytest.fixture(scope="module")
def imap():
    return build_default_map()


class TestGeneration:
    def test_single_distribution_all_aggressive(self, imap):
        eps = generate_episodes(imap, Scenario.TURN_RIGHT_X2, TypeDistribution.single(), 300, 1)
        assert all(ep.behavior is BehaviorType.AGGRESSIVE for ep in eps)

    def test_mixed_fraction_within_one_percent(self, imap):
        eps = generate_episodes(
            imap, Scenario.TURN_LEFT_X2, TypeDistribution.mixed(), 100_000, 2
        )
        passive = sum(ep.behavior is BehaviorType.PASSIVE for ep in eps) / len(eps)
        assert abs(passive - 0.5) < 0.01

    def test_speeds_in_range(self, imap):
        eps = generate_episodes(imap, Scenario.TURN_LEFT_X4, TypeDistribution.mixed(), 500, 3)
        for ep in eps:
            for o in ep.others:
                assert SPEED_MIN <= o.v <= SPEED_MAX

    def test_participant_counts_vary_up_to_max(self, imap):
        eps = generate_episodes(imap, Scenario.TURN_LEFT_X4, TypeDistribution.mixed(), 2000, 4)
        counts = {len(ep.others) for ep in eps}
        assert counts == {1, 2, 3, 4}

    def test_fixed_count(self, imap):
        eps = generate_episodes(
            imap, Scenario.TURN_RIGHT_X2, TypeDistribution.single(), 100, 5, fixed_count=1
        )
        assert all(len(ep.others) == 1 for ep in eps)

    def test_platoon_same_lane_ordered_gaps(self, imap):
        eps = generate_episodes(
            imap, Scenario.TURN_RIGHT_PLATOON, TypeDistribution.mixed(), 400, 6
        )
        for ep in eps:
            lane_vehicles = sorted(
                (o for o in ep.others), key=lambda o: -o.s
            )
            assert all(o.lane_id == 1 for o in lane_vehicles)
            lo, hi = ep.gap_class.bounds
            for lead, follow in zip(lane_vehicles, lane_vehicles[1:]):
                gap = lead.s - follow.s - VEHICLE_LENGTH
                # clamping at the map edge can shorten the last gap
                assert gap <= hi + 1e-9
                if follow.s > VEHICLE_LENGTH:
                    assert gap >= lo - 1e-9

    def test_turn_left_uses_both_lanes(self, imap):
        eps = generate_episodes(imap, Scenario.TURN_LEFT_X2, TypeDistribution.mixed(), 200, 7)
        two = [ep for ep in eps if len(ep.others) == 2]
        assert two and all({o.lane_id for o in ep.others} == {1, 2} for ep in two)

    def test_deterministic(self, imap):
        a = generate_episodes(imap, Scenario.TURN_RIGHT_X2, TypeDistribution.mixed(), 50, 9)
        b = generate_episodes(imap, Scenario.TURN_RIGHT_X2, TypeDistribution.mixed(), 50, 9)
        assert a == b

    def test_gap_class_bounds(self):
        assert GapClass.SMALL.bounds == (6.0, 10.0)
        assert GapClass.INTERMEDIATE.bounds == (12.0, 20.0)
        assert GapClass.LARGE.bounds == (25.0, 40.0)


class TestDatasetFiles:
    def test_round_trip(self, imap, tmp_path):
        eps = generate_episodes(imap, Scenario.TURN_LEFT_X2, TypeDistribution.mixed(), 40, 11)
        path = tmp_path / "ds.jsonl"
        write_dataset(str(path), eps, Scenario.TURN_LEFT_X2, "mixed", 11)
        header, loaded = read_dataset(str(path))
        assert header["scenario"] == "turn_left_x2"
        assert header["seed"] == 11
        assert loaded == eps

    def test_byte_identical_for_same_seed(self, imap, tmp_path):
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for p in (p1, p2):
            eps = generate_episodes(imap, Scenario.TURN_RIGHT_X2, TypeDistribution.single(), 64, 13)
            write_dataset(str(p), eps, Scenario.TURN_RIGHT_X2, "single", 13)
        assert p1.read_bytes() == p2.read_bytes()

    def test_rejects_unknown_format(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        p.write_text('{"format": "other/1", "scenario": "turn_right_x2", "count": 0}\n')
        with pytest.raises(DatasetError):
            read_dataset(str(p))

    def test_rejects_truncated_file(self, imap, tmp_path):
        eps = generate_episodes(imap, Scenario.TURN_RIGHT_X2, TypeDistribution.single(), 10, 1)
        p = tmp_path / "t.jsonl"
        write_dataset(str(p), eps, Scenario.TURN_RIGHT_X2, "single", 1)
        lines = p.read_text().splitlines()
        p.write_text("\n".join(lines[:-2]) + "\n")
        with pytest.raises(DatasetError):
            read_dataset(str(p))

    def test_missing_file_error_has_path(self, tmp_path):
        with pytest.raises(DatasetError) as exc:
            read_dataset(str(tmp_path / "nope.jsonl"))
        assert "nope.jsonl" in str(exc.value)
