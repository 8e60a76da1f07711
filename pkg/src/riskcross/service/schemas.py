"""Request/response models of the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class RiskSpec(BaseModel):
    kind: Literal["none", "cvar", "wang"] = "none"
    alpha: float = 0.7
    beta: float = -0.2

    def label(self) -> str:
        if self.kind == "cvar":
            return f"cvar[{self.alpha:g}]"
        if self.kind == "wang":
            return f"wang[{self.beta:g}]"
        return "none"


class DatasetRequest(BaseModel):
    scenario: str
    types: Literal["single", "mixed"]
    episodes: int = Field(gt=0)
    seed: int = 0
    out_path: str


class DatasetResponse(BaseModel):
    path: str
    episodes: int
    type_fractions: dict[str, float]


class TrainRequest(BaseModel):
    dataset_path: str
    agent: Literal["dqn", "qrdqn"]
    encoding: int = Field(default=4, ge=1, le=6)
    steps: int = Field(gt=0)
    seed: int = 0
    out_dir: str
    lr: float | None = None
    checkpoint_every: int | None = None
    log_every: int | None = None


class JobCreated(BaseModel):
    job_id: str


class JobProgress(BaseModel):
    step: int = 0
    total_steps: int = 0
    success_rate: float = 0.0
    mean_loss: float = 0.0


class JobStatus(BaseModel):
    job_id: str
    kind: str
    state: Literal["pending", "running", "done", "failed"]
    progress: JobProgress
    result: dict | None = None
    error: str | None = None


class EvaluateRequest(BaseModel):
    checkpoint_path: str
    dataset_path: str
    risk: RiskSpec = RiskSpec()
    episodes: int | None = Field(default=None, gt=0)  # limit, defaults to all
    out_path: str


class SummaryModel(BaseModel):
    count: int
    success_rate: float
    collision_rate: float
    max_time_rate: float
    mean_crossing_time: float | None


class EvaluateResponse(BaseModel):
    outcomes_path: str
    summary: SummaryModel
    risk_label: str


class CompareRequest(BaseModel):
    outcome_paths: list[str] = Field(min_length=2)
    names: list[str] | None = None
    out_prefix: str | None = None  # writes <prefix>.txt and <prefix>.csv


class TestModel(BaseModel):
    metric: str
    pair: tuple[str, str] | None = None
    statistic: float
    p_value: float
    degenerate: bool
    significant: bool | None = None


class CompareResponse(BaseModel):
    text: str
    summaries: dict[str, SummaryModel]
    tests: list[TestModel]
    text_path: str | None = None
    csv_path: str | None = None


class BenchObservationsRequest(BaseModel):
    scenario: str = "turn_right_x2"
    types: Literal["single", "mixed"] = "single"
    train_episodes: int = 5000
    test_episodes: int = 2000
    steps: int = Field(gt=0)
    seed: int = 0
    out_dir: str


class ActRequest(BaseModel):
    checkpoint_path: str
    features: list[float]
    risk: RiskSpec = RiskSpec()


class ActResponse(BaseModel):
    action_index: int
    acceleration: float
    per_action_values: list[float]


class RiskEvalRequest(BaseModel):
    quantiles: list[float] = Field(min_length=1)
    risk: RiskSpec


class RiskEvalResponse(BaseModel):
    value: float


class TrajectoryRequest(BaseModel):
    checkpoint_path: str
    dataset_path: str
    episode_id: int
    risk: RiskSpec = RiskSpec()
    out_path: str


class TrajectoryResponse(BaseModel):
    out_path: str
    ticks: int
    terminal: str
