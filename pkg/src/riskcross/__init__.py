"""riskcross: risk-sensitive T-intersection crossing policies.

Learns per-action return distributions with quantile-regression Q-learning
in a deterministic longitudinal traffic simulation, then selects actions
online through distortion risk metrics (CVaR, Wang transform).
"""

__version__ = "0.1.0"
