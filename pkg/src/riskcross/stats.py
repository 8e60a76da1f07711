"""Evaluation metrics and paired significance tests.

Binary outcomes (success, collision, max-time) are compared with Cochran's Q
and pair-wise McNemar tests; crossing times with one-way repeated-measures
ANOVA and pair-wise dependent t-tests. Tail probabilities come from the
regularized incomplete gamma/beta functions. Pair-wise p-values are
Bonferroni-corrected at confidence level 0.95.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import betainc, gammaincc


class Result(enum.Enum):
    SUCCESS = "success"
    COLLISION = "collision"
    MAX_TIME = "max_time"


@dataclass(frozen=True)
class RunOutcome:
    episode_id: int
    result: Result
    crossing_time: float | None = None  # valid iff result is SUCCESS

    def __post_init__(self):
        if self.result is Result.SUCCESS:
            if self.crossing_time is None:
                raise ValueError("successful run needs a crossing time")
        elif self.crossing_time is not None:
            raise ValueError("crossing time is only defined for successful runs")


@dataclass(frozen=True)
class Summary:
    count: int
    success_rate: float  # percent
    collision_rate: float
    max_time_rate: float
    mean_crossing_time: float | None


class TestResult(NamedTuple):
    statistic: float
    p_value: float
    degenerate: bool = False


def summarize(outcomes: Sequence[RunOutcome]) -> Summary:
    """Percent rates over all runs; crossing time averaged over successes only."""
    if not outcomes:
        raise ValueError("cannot summarize zero outcomes")
    n = len(outcomes)
    counts = {r: 0 for r in Result}
    times = []
    for o in outcomes:
        counts[o.result] += 1
        if o.result is Result.SUCCESS:
            times.append(o.crossing_time)
    return Summary(
        count=n,
        success_rate=100.0 * counts[Result.SUCCESS] / n,
        collision_rate=100.0 * counts[Result.COLLISION] / n,
        max_time_rate=100.0 * counts[Result.MAX_TIME] / n,
        mean_crossing_time=float(np.mean(times)) if times else None,
    )


def chi2_sf(x: float, dof: int) -> float:
    """Upper tail of the chi-square distribution."""
    return float(gammaincc(dof / 2.0, x / 2.0))


def t_sf_two_sided(t: float, dof: int) -> float:
    """Two-sided tail probability of Student's t via the incomplete beta."""
    return float(betainc(dof / 2.0, 0.5, dof / (dof + t * t)))


def f_sf(f: float, dof1: int, dof2: int) -> float:
    """Upper tail of the F distribution via the incomplete beta."""
    return float(betainc(dof2 / 2.0, dof1 / 2.0, dof2 / (dof2 + dof1 * f)))


def cochran_q(binary: np.ndarray) -> TestResult:
    """Cochran's Q over an (n_subjects, k_treatments) 0/1 matrix."""
    x = np.asarray(binary)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("cochran_q needs an (n, k) matrix with k >= 2")
    if not np.isin(x, (0, 1)).all():
        raise ValueError("cochran_q entries must be 0 or 1")
    x = x.astype(float)
    n, k = x.shape
    col = x.sum(axis=0)
    row = x.sum(axis=1)
    denom = k * row.sum() - (row**2).sum()
    if denom <= 0.0:
        return TestResult(0.0, 1.0, degenerate=True)
    q = k * (k - 1) * ((col - col.mean()) ** 2).sum() / denom
    return TestResult(float(q), chi2_sf(q, k - 1))


def mcnemar(a: np.ndarray, b: np.ndarray) -> TestResult:
    """McNemar test with continuity correction on paired 0/1 vectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("mcnemar needs two equal-length vectors")
    n10 = int(((a == 1) & (b == 0)).sum())
    n01 = int(((a == 0) & (b == 1)).sum())
    if n10 + n01 == 0:
        return TestResult(0.0, 1.0, degenerate=True)
    stat = (abs(n10 - n01) - 1) ** 2 / (n10 + n01)
    return TestResult(float(stat), chi2_sf(stat, 1))


def rm_anova(values: np.ndarray) -> TestResult:
    """One-way repeated-measures ANOVA over an (n_subjects, k_treatments) matrix."""
    x = np.asarray(values, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError("rm_anova needs an (n >= 2, k >= 2) matrix")
    n, k = x.shape
    grand = x.mean()
    ss_treat = n * ((x.mean(axis=0) - grand) ** 2).sum()
    ss_subject = k * ((x.mean(axis=1) - grand) ** 2).sum()
    ss_total = ((x - grand) ** 2).sum()
    ss_error = max(ss_total - ss_treat - ss_subject, 0.0)
    dof1 = k - 1
    dof2 = (n - 1) * (k - 1)
    if ss_treat <= 1e-300:
        return TestResult(0.0, 1.0, degenerate=True)
    if ss_error <= 1e-300:
        return TestResult(math.inf, 0.0, degenerate=True)
    f = (ss_treat / dof1) / (ss_error / dof2)
    return TestResult(float(f), f_sf(f, dof1, dof2))


def paired_t(a: np.ndarray, b: np.ndarray) -> TestResult:
    """Two-sided dependent t-test on the element-wise differences."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("paired_t needs two equal-length vectors, n >= 2")
    d = a - b
    sd = d.std(ddof=1)
    if sd == 0.0:
        # exact tie everywhere, or an identical non-zero shift
        if d[0] == 0.0:
            return TestResult(0.0, 1.0, degenerate=True)
        return TestResult(math.copysign(math.inf, d[0]), 0.0, degenerate=True)
    t = d.mean() / (sd / math.sqrt(d.size))
    return TestResult(float(t), t_sf_two_sided(t, d.size - 1))


def bonferroni(p_values: Sequence[float], alpha: float = 0.05) -> list[bool]:
    """Significance flags at family level alpha: p_i < alpha / m."""
    m = len(p_values)
    if m < 1:
        raise ValueError("bonferroni needs at least one p-value")
    return [p < alpha / m for p in p_values]


def align_outcomes(runs: Sequence[Sequence[RunOutcome]]) -> None:
    """Validate that all approaches cover the same episodes in the same order."""
    if not runs:
        raise ValueError("no outcome sets given")
    ref = [o.episode_id for o in runs[0]]
    for i, outcomes in enumerate(runs[1:], start=1):
        ids = [o.episode_id for o in outcomes]
        if ids != ref:
            raise ValueError(f"outcome set {i} episode ids are not aligned with set 0")


def binary_matrix(runs: Sequence[Sequence[RunOutcome]], which: Result) -> np.ndarray:
    """(n_episodes, k_approaches) indicator matrix for one outcome kind."""
    align_outcomes(runs)
    return np.array(
        [[1 if o.result is which else 0 for o in outcomes] for outcomes in zip(*runs)]
    )
