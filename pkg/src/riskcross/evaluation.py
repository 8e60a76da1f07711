"""Checkpoint evaluation and approach comparison.

Evaluation rolls out every episode of a test dataset greedily under a
configured risk metric (no exploration) and records one outcome per episode,
keyed by episode id so different approaches can be paired. Comparison builds
the metric table plus the significance-test battery over aligned outcome
sets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .episode import CrossingEnv, RewardConfig
from .intersection import IntersectionMap, build_default_map
from .network import MlpNetwork, load_network
from .observations import ObservationSpec
from .risk import RiskMetricConfig, select_action_risk
from .scenarios import EpisodeDefinition, Scenario
from .simulation import Terminal
from .stats import (
    Result,
    RunOutcome,
    Summary,
    TestResult,
    align_outcomes,
    binary_matrix,
    bonferroni,
    cochran_q,
    mcnemar,
    paired_t,
    rm_anova,
    summarize,
)

OUTCOMES_FORMAT = "riskcross-outcomes/1"


class ConfigMismatchError(Exception):
    """Checkpoint, dataset and observation configuration do not fit together."""


def rollout_episode(
    env: CrossingEnv, net: MlpNetwork, episode: EpisodeDefinition, risk: RiskMetricConfig
) -> RunOutcome:
    obs = env.reset(episode)
    while True:
        action = select_action_risk(net.forward(obs), risk)
        obs, _, done, terminal = env.step(action)
        if done:
            break
    if terminal is Terminal.GOAL:
        return RunOutcome(episode.episode_id, Result.SUCCESS, crossing_time=env.world.t)
    if terminal is Terminal.COLLISION:
        return RunOutcome(episode.episode_id, Result.COLLISION)
    return RunOutcome(episode.episode_id, Result.MAX_TIME)


def evaluate_checkpoint(
    checkpoint_path: str,
    episodes: list[EpisodeDefinition],
    scenario: Scenario,
    risk: RiskMetricConfig,
    imap: IntersectionMap | None = None,
    limit: int | None = None,
) -> tuple[list[RunOutcome], dict]:
    """Outcomes for every episode (or the first `limit`), plus checkpoint meta."""
    net, meta = load_network(checkpoint_path)
    imap = imap or build_default_map()
    if meta.get("scenario") not in (None, scenario.value):
        raise ConfigMismatchError(
            f"checkpoint was trained on {meta.get('scenario')!r}, dataset is {scenario.value!r}"
        )
    spec = ObservationSpec.for_map(imap, meta["encoding"], meta["max_others"])
    if spec.dimension != net.input_dim:
        raise ConfigMismatchError(
            f"observation dimension {spec.dimension} != network input {net.input_dim}"
        )
    env = CrossingEnv(imap, spec, RewardConfig(gamma=meta.get("gamma", 0.95)))
    chosen = episodes if limit is None else episodes[:limit]
    return [rollout_episode(env, net, ep, risk) for ep in chosen], meta


def write_outcomes(
    path: str, outcomes: list[RunOutcome], context: dict
) -> None:
    header = {"format": OUTCOMES_FORMAT, "count": len(outcomes), **context}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for o in outcomes:
            rec: dict = {"id": o.episode_id, "result": o.result.value}
            if o.result is Result.SUCCESS:
                rec["time"] = o.crossing_time
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


class OutcomesError(Exception):
    pass


def read_outcomes(path: str) -> tuple[dict, list[RunOutcome]]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise OutcomesError(f"{path}: empty outcomes file")
    header = json.loads(lines[0])
    if header.get("format") != OUTCOMES_FORMAT:
        raise OutcomesError(f"{path}: unsupported outcomes format {header.get('format')!r}")
    outcomes = []
    for line in lines[1:]:
        rec = json.loads(line)
        result = Result(rec["result"])
        outcomes.append(
            RunOutcome(
                rec["id"], result, rec["time"] if result is Result.SUCCESS else None
            )
        )
    if len(outcomes) != header["count"]:
        raise OutcomesError(f"{path}: header count mismatch")
    return header, outcomes


@dataclass(frozen=True)
class PairwiseTest:
    metric: str
    pair: tuple[str, str]
    result: TestResult
    significant: bool  # Bonferroni-corrected


@dataclass(frozen=True)
class GroupTest:
    metric: str
    result: TestResult


@dataclass(frozen=True)
class ComparisonReport:
    names: list[str]
    summaries: list[Summary]
    group_tests: list[GroupTest]
    pairwise_tests: list[PairwiseTest]
    paired_time_count: int


def compare_outcomes(
    names: list[str], runs: list[list[RunOutcome]], alpha: float = 0.05
) -> ComparisonReport:
    """Metric table plus Cochran/McNemar for binary metrics and repeated
    measures ANOVA / dependent t-tests for crossing time.

    Crossing times are paired over the episodes in which every approach
    succeeded. Pair-wise p-values are Bonferroni-corrected per metric family.
    """
    if len(names) != len(runs) or len(names) < 2:
        raise ValueError("need two or more named outcome sets")
    align_outcomes(runs)
    summaries = [summarize(r) for r in runs]
    group_tests: list[GroupTest] = []
    pairwise: list[PairwiseTest] = []
    pairs = list(combinations(range(len(names)), 2))

    for metric, which in (
        ("success", Result.SUCCESS),
        ("collision", Result.COLLISION),
        ("max_time", Result.MAX_TIME),
    ):
        matrix = binary_matrix(runs, which)
        group_tests.append(GroupTest(metric, cochran_q(matrix)))
        p_values = []
        results = []
        for i, j in pairs:
            res = mcnemar(matrix[:, i], matrix[:, j])
            results.append(res)
            p_values.append(res.p_value)
        flags = bonferroni(p_values, alpha)
        pairwise.extend(
            PairwiseTest(metric, (names[i], names[j]), res, flag)
            for (i, j), res, flag in zip(pairs, results, flags)
        )

    # crossing time: only episodes successful under every approach are paired
    all_success = [
        idx
        for idx in range(len(runs[0]))
        if all(r[idx].result is Result.SUCCESS for r in runs)
    ]
    times = np.array(
        [[r[idx].crossing_time for r in runs] for idx in all_success], dtype=float
    ).reshape(len(all_success), len(runs))
    if len(all_success) >= 2:
        group_tests.append(GroupTest("crossing_time", rm_anova(times)))
        p_values, results = [], []
        for i, j in pairs:
            res = paired_t(times[:, i], times[:, j])
            results.append(res)
            p_values.append(res.p_value)
        flags = bonferroni(p_values, alpha)
        pairwise.extend(
            PairwiseTest("crossing_time", (names[i], names[j]), res, flag)
            for (i, j), res, flag in zip(pairs, results, flags)
        )
    return ComparisonReport(
        names=names,
        summaries=summaries,
        group_tests=group_tests,
        pairwise_tests=pairwise,
        paired_time_count=len(all_success),
    )


REPORT_FORMAT = "riskcross-report/1"


def report_text(report: ComparisonReport) -> str:
    lines = [f"comparison report ({REPORT_FORMAT})"]
    width = max(len(n) for n in report.names) + 2
    lines.append(
        f"{'approach':<{width}} {'success%':>9} {'collision%':>11} {'max_time%':>10} {'crossing[s]':>12}  (n={report.summaries[0].count})"
    )
    for name, s in zip(report.names, report.summaries):
        ct = f"{s.mean_crossing_time:.2f}" if s.mean_crossing_time is not None else "-"
        lines.append(
            f"{name:<{width}} {s.success_rate:>9.2f} {s.collision_rate:>11.2f} {s.max_time_rate:>10.2f} {ct:>12}"
        )
    lines.append("")
    lines.append(f"paired crossing-time episodes: {report.paired_time_count}")
    for gt in report.group_tests:
        kind = "Cochran Q" if gt.metric != "crossing_time" else "RM-ANOVA F"
        lines.append(
            f"[{gt.metric}] {kind} = {gt.result.statistic:.4f}, p = {gt.result.p_value:.6f}"
        )
        for pt in report.pairwise_tests:
            if pt.metric != gt.metric:
                continue
            kind2 = "McNemar" if gt.metric != "crossing_time" else "paired t"
            sig = "significant" if pt.significant else "n.s."
            lines.append(
                f"    {pt.pair[0]} vs {pt.pair[1]}: {kind2} = {pt.result.statistic:.4f}, "
                f"p = {pt.result.p_value:.6f} ({sig}, Bonferroni)"
            )
    return "\n".join(lines) + "\n"


def report_csv_rows(report: ComparisonReport) -> list[list]:
    rows: list[list] = [
        ["section", "metric", "approach_or_pair", "value1", "value2", "significant"],
        ["meta", "format", REPORT_FORMAT, "", "", ""],
        ["meta", "approaches", "|".join(report.names), "", "", ""],
    ]
    for name, s in zip(report.names, report.summaries):
        rows.append(["summary", "success_rate", name, f"{s.success_rate:.4f}", "", ""])
        rows.append(["summary", "collision_rate", name, f"{s.collision_rate:.4f}", "", ""])
        rows.append(["summary", "max_time_rate", name, f"{s.max_time_rate:.4f}", "", ""])
        ct = "" if s.mean_crossing_time is None else f"{s.mean_crossing_time:.4f}"
        rows.append(["summary", "crossing_time", name, ct, "", ""])
    for gt in report.group_tests:
        rows.append(
            ["group_test", gt.metric, "", f"{gt.result.statistic:.6f}", f"{gt.result.p_value:.6g}", ""]
        )
    for pt in report.pairwise_tests:
        rows.append(
            [
                "pairwise_test",
                pt.metric,
                f"{pt.pair[0]}|{pt.pair[1]}",
                f"{pt.result.statistic:.6f}",
                f"{pt.result.p_value:.6g}",
                str(pt.significant).lower(),
            ]
        )
    return rows
