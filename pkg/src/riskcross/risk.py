"""Distortion risk metrics over discrete return-quantile sets.

CVaR averages the lower tail of the distribution; the Wang transform
reweights all quantiles through a shifted normal distortion of the c.d.f.
Both reduce to the plain mean at their neutral parameter (alpha = 1,
beta = 0), and both are applied to sorted quantiles: sorting recovers the
order statistics of the represented distribution, which quantile-regression
outputs do not guarantee.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri


class RiskKind(enum.Enum):
    NONE = "none"
    CVAR = "cvar"
    WANG = "wang"


@dataclass(frozen=True)
class RiskMetricConfig:
    kind: RiskKind
    alpha: float = 0.7
    beta: float = -0.2

    def __post_init__(self):
        if self.kind is RiskKind.CVAR and not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"cvar alpha must be in (0, 1], got {self.alpha}")
        if self.kind is RiskKind.WANG and not math.isfinite(self.beta):
            raise ValueError("wang beta must be finite")

    @staticmethod
    def parse(kind: str, alpha: float = 0.7, beta: float = -0.2) -> "RiskMetricConfig":
        return RiskMetricConfig(RiskKind(kind), alpha=alpha, beta=beta)


def normal_cdf(x: float) -> float:
    """Standard normal c.d.f."""
    return float(ndtr(x))


def normal_inverse_cdf(p: float) -> float:
    """Standard normal quantile function for p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"normal_inverse_cdf requires p in (0, 1), got {p}")
    return float(ndtri(p))


def cvar(quantiles: np.ndarray, alpha: float) -> float:
    """Mean of the lowest max(1, floor(alpha * N)) sorted quantile values."""
    q = np.sort(np.asarray(quantiles, dtype=float))
    if q.size == 0:
        raise ValueError("cvar needs at least one quantile")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"cvar alpha must be in (0, 1], got {alpha}")
    m = max(1, int(math.floor(alpha * q.size)))
    return float(q[:m].mean())


def wang_weights(n: int, beta: float) -> np.ndarray:
    """Probability mass per sorted quantile under the Wang distortion.

    The distortion g(u) = Phi(Phi^{-1}(u) - beta) is oriented so that the
    metric's defining property holds: a normal distribution's mean shifts to
    mu + beta * sigma, hence beta < 0 over-weights the low quantiles
    (risk-averse) and beta > 0 the high ones. The endpoint convention
    g(0) = 0, g(1) = 1 keeps the weights non-negative with an exact sum of
    one and avoids evaluating the normal quantile function at 0 or 1.
    """
    edges = np.arange(n + 1, dtype=float) / n
    g = np.empty(n + 1)
    g[0], g[-1] = 0.0, 1.0
    inner = edges[1:-1]
    g[1:-1] = ndtr(ndtri(inner) - beta)
    w = np.diff(g)
    return w


def wang(quantiles: np.ndarray, beta: float) -> float:
    """Expectation of the Wang-distorted distribution over sorted quantiles."""
    q = np.sort(np.asarray(quantiles, dtype=float))
    if q.size == 0:
        raise ValueError("wang needs at least one quantile")
    return float(wang_weights(q.size, beta) @ q)


def risk_value(quantiles: np.ndarray, cfg: RiskMetricConfig) -> float:
    """Apply the configured metric; kind=none is the plain mean."""
    if cfg.kind is RiskKind.NONE:
        return float(np.mean(quantiles))
    if cfg.kind is RiskKind.CVAR:
        return cvar(quantiles, cfg.alpha)
    return wang(quantiles, cfg.beta)


def select_action_risk(theta: np.ndarray, cfg: RiskMetricConfig) -> int:
    """Risk-greedy action: argmax of the metric per action, lowest index on ties."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    values = np.array([risk_value(theta[a], cfg) for a in range(theta.shape[0])])
    return int(np.argmax(values))
