"""HTTP service wrapping dataset generation, training, evaluation and risk
assessment. Long-running work (training, observation benchmark) runs as jobs
polled via /jobs/{job_id}; everything else is synchronous.
"""

from __future__ import annotations

import csv
import os

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..behaviors import TypeDistribution
from ..episode import EGO_ACTIONS, CrossingEnv, RewardConfig
from ..evaluation import (
    ConfigMismatchError,
    OutcomesError,
    compare_outcomes,
    evaluate_checkpoint,
    read_outcomes,
    report_csv_rows,
    report_text,
    write_outcomes,
)
from ..intersection import build_default_map, map_from_config
from ..learning import AgentConfig, TrainConfig, train
from ..network import load_network
from ..observations import Encoding, ObservationSpec
from ..risk import RiskMetricConfig, risk_value, select_action_risk
from ..scenarios import DatasetError, Scenario, generate_episodes, read_dataset, write_dataset
from ..stats import summarize
from .jobs import Job, JobRegistry
from . import schemas as sc


def _risk_config(spec: sc.RiskSpec) -> RiskMetricConfig:
    return RiskMetricConfig.parse(spec.kind, alpha=spec.alpha, beta=spec.beta)


def _summary_model(summary) -> sc.SummaryModel:
    return sc.SummaryModel(
        count=summary.count,
        success_rate=summary.success_rate,
        collision_rate=summary.collision_rate,
        max_time_rate=summary.max_time_rate,
        mean_crossing_time=summary.mean_crossing_time,
    )


def create_app(map_path: str | None = None) -> FastAPI:
    """Service over one intersection map.

    The map comes from a versioned JSON config (`map_path` argument or the
    RISKCROSS_MAP environment variable); without either, the built-in
    T-intersection is used.
    """
    app = FastAPI(title="riskcross", version=__version__)
    jobs = JobRegistry()
    map_path = map_path or os.environ.get("RISKCROSS_MAP")
    if map_path:
        with open(map_path, encoding="utf-8") as fh:
            imap = map_from_config(fh.read())
    else:
        imap = build_default_map()

    @app.get("/health", response_model=sc.HealthResponse)
    def health():
        return sc.HealthResponse(status="ok", version=__version__)

    @app.post("/datasets", response_model=sc.DatasetResponse)
    def gen_dataset(req: sc.DatasetRequest):
        try:
            scenario = Scenario(req.scenario)
            dist = TypeDistribution.named(req.types)
            episodes = generate_episodes(imap, scenario, dist, req.episodes, req.seed)
            os.makedirs(os.path.dirname(os.path.abspath(req.out_path)), exist_ok=True)
            write_dataset(req.out_path, episodes, scenario, req.types, req.seed)
        except (ValueError, OSError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        fractions: dict[str, float] = {}
        for ep in episodes:
            fractions[ep.behavior.value] = fractions.get(ep.behavior.value, 0.0) + 1.0
        fractions = {k: v / len(episodes) for k, v in sorted(fractions.items())}
        return sc.DatasetResponse(
            path=req.out_path, episodes=len(episodes), type_fractions=fractions
        )

    def _train_work(req: sc.TrainRequest, job: Job) -> dict:
        header, episodes = read_dataset(req.dataset_path)
        scenario = Scenario(header["scenario"])
        spec = ObservationSpec.for_map(imap, Encoding(req.encoding), scenario.max_others)
        env = CrossingEnv(imap, spec)
        cfg = TrainConfig(steps=req.steps, seed=req.seed)
        if req.checkpoint_every:
            cfg.checkpoint_every = req.checkpoint_every
        if req.log_every:
            cfg.log_every = req.log_every

        def progress(step, total, rate, loss):
            job.progress = {
                "step": step,
                "total_steps": total,
                "success_rate": rate,
                "mean_loss": loss,
            }

        result = train(
            env,
            episodes,
            AgentConfig(req.agent, lr=req.lr),
            cfg,
            req.out_dir,
            meta_extra={
                "scenario": scenario.value,
                "types": header["types"],
                "dataset_seed": header["seed"],
            },
            progress=progress,
        )
        return {
            "best_checkpoint": result.best_checkpoint,
            "checkpoints": result.checkpoint_paths,
            "log_path": result.log_path,
            "final_success_rate": result.final_success_rate,
            "best_success_rate": result.best_success_rate,
            "episodes_done": result.episodes_done,
        }

    @app.post("/train/jobs", response_model=sc.JobCreated, status_code=202)
    def start_training(req: sc.TrainRequest):
        if not os.path.exists(req.dataset_path):
            raise HTTPException(status_code=400, detail=f"dataset not found: {req.dataset_path}")
        job = jobs.submit("train", lambda j: _train_work(req, j))
        return sc.JobCreated(job_id=job.job_id)

    @app.get("/jobs/{job_id}", response_model=sc.JobStatus)
    def job_status(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
        return sc.JobStatus(
            job_id=job.job_id,
            kind=job.kind,
            state=job.state,
            progress=sc.JobProgress(**job.progress) if job.progress else sc.JobProgress(),
            result=job.result if job.state == "done" else None,
            error=job.error,
        )

    @app.post("/evaluate", response_model=sc.EvaluateResponse)
    def evaluate(req: sc.EvaluateRequest):
        try:
            header, episodes = read_dataset(req.dataset_path)
            outcomes, meta = evaluate_checkpoint(
                req.checkpoint_path,
                episodes,
                Scenario(header["scenario"]),
                _risk_config(req.risk),
                imap=imap,
                limit=req.episodes,
            )
        except (DatasetError, ConfigMismatchError, ValueError, OSError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        # basenames, not paths: identical pipelines in different directories
        # must produce byte-identical outcome files
        context = {
            "risk": req.risk.label(),
            "checkpoint": os.path.basename(req.checkpoint_path),
            "checkpoint_digest": meta.get("config_digest", ""),
            "dataset": os.path.basename(req.dataset_path),
            "dataset_seed": header["seed"],
            "scenario": header["scenario"],
        }
        os.makedirs(os.path.dirname(os.path.abspath(req.out_path)), exist_ok=True)
        write_outcomes(req.out_path, outcomes, context)
        return sc.EvaluateResponse(
            outcomes_path=req.out_path,
            summary=_summary_model(summarize(outcomes)),
            risk_label=req.risk.label(),
        )

    @app.post("/compare", response_model=sc.CompareResponse)
    def compare(req: sc.CompareRequest):
        try:
            loaded = [read_outcomes(p) for p in req.outcome_paths]
        except (OutcomesError, OSError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        names = req.names or [
            h.get("risk", f"approach{i}") for i, (h, _) in enumerate(loaded)
        ]
        if len(names) != len(loaded):
            raise HTTPException(status_code=400, detail="names/outcome_paths length mismatch")
        try:
            report = compare_outcomes(names, [o for _, o in loaded])
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=f"pairing error: {exc}")
        text = report_text(report)
        text_path = csv_path = None
        if req.out_prefix:
            os.makedirs(os.path.dirname(os.path.abspath(req.out_prefix)), exist_ok=True)
            text_path = req.out_prefix + ".txt"
            csv_path = req.out_prefix + ".csv"
            with open(text_path, "w", encoding="utf-8") as fh:
                fh.write(text)
            with open(csv_path, "w", newline="", encoding="utf-8") as fh:
                csv.writer(fh).writerows(report_csv_rows(report))
        tests = [
            sc.TestModel(
                metric=gt.metric,
                statistic=gt.result.statistic,
                p_value=gt.result.p_value,
                degenerate=gt.result.degenerate,
            )
            for gt in report.group_tests
        ] + [
            sc.TestModel(
                metric=pt.metric,
                pair=pt.pair,
                statistic=pt.result.statistic,
                p_value=pt.result.p_value,
                degenerate=pt.result.degenerate,
                significant=pt.significant,
            )
            for pt in report.pairwise_tests
        ]
        return sc.CompareResponse(
            text=text,
            summaries={
                n: _summary_model(s) for n, s in zip(report.names, report.summaries)
            },
            tests=tests,
            text_path=text_path,
            csv_path=csv_path,
        )

    def _bench_work(req: sc.BenchObservationsRequest, job: Job) -> dict:
        scenario = Scenario(req.scenario)
        dist = TypeDistribution.named(req.types)
        train_eps = generate_episodes(
            imap, scenario, dist, req.train_episodes, req.seed, fixed_count=1
        )
        test_eps = generate_episodes(
            imap, scenario, dist, req.test_episodes, req.seed + 1, fixed_count=1
        )
        rows = []
        for enc in Encoding:
            out_dir = os.path.join(req.out_dir, f"encoding{int(enc)}")
            spec = ObservationSpec.for_map(imap, enc, max_others=1)
            env = CrossingEnv(imap, spec)

            def progress(step, total, rate, loss, _enc=enc):
                job.progress = {
                    "step": (int(_enc) - 1) * req.steps + step,
                    "total_steps": 6 * req.steps,
                    "success_rate": rate,
                    "mean_loss": loss,
                }

            result = train(
                env,
                train_eps,
                AgentConfig("dqn"),
                TrainConfig(steps=req.steps, seed=req.seed),
                out_dir,
                meta_extra={"scenario": scenario.value, "types": req.types},
                progress=progress,
            )
            outcomes, _ = evaluate_checkpoint(
                result.best_checkpoint,
                test_eps,
                scenario,
                RiskMetricConfig.parse("none"),
                imap=imap,
            )
            s = summarize(outcomes)
            rows.append(
                {
                    "encoding": int(enc),
                    "success_rate": s.success_rate,
                    "collision_rate": s.collision_rate,
                    "max_time_rate": s.max_time_rate,
                    "crossing_time": s.mean_crossing_time,
                    "checkpoint": result.best_checkpoint,
                }
            )
        table_path = os.path.join(req.out_dir, "observation_benchmark.csv")
        with open(table_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["encoding", "success_rate", "collision_rate", "max_time_rate", "crossing_time"]
            )
            for r in rows:
                ct = "" if r["crossing_time"] is None else f"{r['crossing_time']:.4f}"
                w.writerow(
                    [
                        r["encoding"],
                        f"{r['success_rate']:.4f}",
                        f"{r['collision_rate']:.4f}",
                        f"{r['max_time_rate']:.4f}",
                        ct,
                    ]
                )
        return {"table_path": table_path, "rows": rows}

    @app.post("/bench/observations/jobs", response_model=sc.JobCreated, status_code=202)
    def start_bench(req: sc.BenchObservationsRequest):
        try:
            Scenario(req.scenario)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        job = jobs.submit("bench", lambda j: _bench_work(req, j))
        return sc.JobCreated(job_id=job.job_id)

    @app.post("/policy/act", response_model=sc.ActResponse)
    def act(req: sc.ActRequest):
        try:
            net, _ = load_network(req.checkpoint_path)
        except (OSError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        x = np.asarray(req.features, dtype=float)
        if x.shape != (net.input_dim,):
            raise HTTPException(
                status_code=400,
                detail=f"expected {net.input_dim} features, got {len(req.features)}",
            )
        cfg = _risk_config(req.risk)
        theta = net.forward(x)
        action = select_action_risk(theta, cfg)
        values = [risk_value(theta[a], cfg) for a in range(theta.shape[0])]
        return sc.ActResponse(
            action_index=action,
            acceleration=EGO_ACTIONS[action],
            per_action_values=values,
        )

    @app.post("/risk/value", response_model=sc.RiskEvalResponse)
    def risk_eval(req: sc.RiskEvalRequest):
        try:
            cfg = _risk_config(req.risk)
            value = risk_value(np.asarray(req.quantiles, dtype=float), cfg)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return sc.RiskEvalResponse(value=value)

    @app.post("/trajectories", response_model=sc.TrajectoryResponse)
    def trajectory(req: sc.TrajectoryRequest):
        try:
            header, episodes = read_dataset(req.dataset_path)
            by_id = {ep.episode_id: ep for ep in episodes}
            if req.episode_id not in by_id:
                raise ValueError(f"episode {req.episode_id} not in dataset")
            episode = by_id[req.episode_id]
            net, meta = load_network(req.checkpoint_path)
            scenario = Scenario(header["scenario"])
            spec = ObservationSpec.for_map(imap, meta["encoding"], meta["max_others"])
            if spec.dimension != net.input_dim:
                raise ValueError("checkpoint does not match its observation spec")
            env = CrossingEnv(imap, spec, RewardConfig(gamma=meta.get("gamma", 0.95)))
            cfg = _risk_config(req.risk)
        except (DatasetError, ValueError, OSError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        rows = []
        obs = env.reset(episode)
        rows.append(_traj_row(env))
        done = False
        while not done:
            action = select_action_risk(net.forward(obs), cfg)
            obs, _, done, terminal = env.step(action)
            rows.append(_traj_row(env, action))
        os.makedirs(os.path.dirname(os.path.abspath(req.out_path)), exist_ok=True)
        with open(req.out_path, "w", newline="", encoding="utf-8") as fh:
            fh.write(
                f"# riskcross-trajectory/1 episode={req.episode_id} risk={req.risk.label()}\n"
            )
            w = csv.writer(fh)
            w.writerow(
                ["t", "action_index", "ego_s", "ego_v", "terminal"]
                + [f"other{i}_{f}" for i in range(len(env.world.others)) for f in ("s", "v")]
            )
            w.writerows(rows)
        return sc.TrajectoryResponse(
            out_path=req.out_path, ticks=len(rows), terminal=terminal.value
        )

    def _traj_row(env: CrossingEnv, action: int | None = None):
        w = env.world
        row = [
            f"{w.t:.1f}",
            "" if action is None else action,
            f"{w.ego.s:.4f}",
            f"{w.ego.v:.4f}",
            w.terminal.value,
        ]
        for o in w.others:
            row += [f"{o.s:.4f}", f"{o.v:.4f}"]
        return row

    return app
