"""Command-line interface: a thin client over the HTTP service.

Every command speaks to the service API; without --base-url the service runs
in-process, so no separate server is required. Desk-scale defaults: 5000
training episodes, 300k training steps, 2000 test episodes.
"""

from __future__ import annotations

import click

from .client import RiskcrossClient, ServiceError

SCENARIOS = ["turn_right_x2", "turn_left_x2", "turn_left_x4", "turn_right_platoon"]


def _client(base_url: str | None) -> RiskcrossClient:
    return RiskcrossClient(base_url)


def _risk_payload(risk: str, alpha: float, beta: float) -> dict:
    return {"kind": risk, "alpha": alpha, "beta": beta}


base_url_option = click.option(
    "--base-url", default=None, help="URL of a running service; default runs in-process."
)


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ServiceError as exc:
            raise click.ClickException(str(exc)) from exc


@click.group(cls=_Group)
def main():
    """Risk-sensitive intersection-crossing experiments."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8321, show_default=True)
def serve(host: str, port: int):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


@main.command("gen-dataset")
@click.option("--scenario", type=click.Choice(SCENARIOS), required=True)
@click.option("--types", type=click.Choice(["single", "mixed"]), required=True)
@click.option("--episodes", default=5000, show_default=True, help="Number of episode definitions.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, help="Output dataset file (JSON lines).")
@base_url_option
def gen_dataset(scenario, types, episodes, seed, out, base_url):
    """Generate a frozen episode-definition dataset."""
    with _client(base_url) as client:
        resp = client.gen_dataset(
            scenario=scenario, types=types, episodes=episodes, seed=seed, out_path=out
        )
    click.echo(f"wrote {resp['episodes']} episodes to {resp['path']}")
    click.echo(f"type fractions: {resp['type_fractions']}")


@main.command()
@click.option("--dataset", required=True, help="Training dataset file.")
@click.option("--agent", type=click.Choice(["dqn", "qrdqn"]), required=True)
@click.option("--obs", default=4, show_default=True, type=click.IntRange(1, 6))
@click.option("--steps", default=300_000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--lr", default=None, type=float, help="Override the agent default learning rate.")
@click.option("--out", required=True, help="Output directory for checkpoints and log.")
@click.option("--poll-seconds", default=5.0, show_default=True)
@base_url_option
def train(dataset, agent, obs, steps, seed, lr, out, poll_seconds, base_url):
    """Train an agent on a dataset (runs as a service job; this command polls)."""
    with _client(base_url) as client:
        job = client.start_training(
            dataset_path=dataset,
            agent=agent,
            encoding=obs,
            steps=steps,
            seed=seed,
            lr=lr,
            out_dir=out,
        )
        click.echo(f"training job {job['job_id']} started")
        last = {"step": -1}

        def on_progress(p):
            if p["step"] != last["step"]:
                last["step"] = p["step"]
                click.echo(
                    f"  step {p['step']}/{p['total_steps']}"
                    f" success={p['success_rate']:.3f} loss={p['mean_loss']:.3f}"
                )

        result = client.wait_for_job(job["job_id"], poll_seconds, on_progress)
    click.echo(f"best checkpoint: {result['best_checkpoint']}")
    click.echo(
        f"final success rate {result['final_success_rate']:.3f}, "
        f"best {result['best_success_rate']:.3f}, episodes {result['episodes_done']}"
    )


@main.command()
@click.option("--checkpoint", required=True)
@click.option("--dataset", required=True, help="Test dataset file.")
@click.option("--risk", type=click.Choice(["none", "cvar", "wang"]), default="none", show_default=True)
@click.option("--alpha", default=0.7, show_default=True, help="CVaR tail probability.")
@click.option("--beta", default=-0.2, show_default=True, help="Wang distortion shift.")
@click.option("--episodes", default=None, type=int, help="Evaluate only the first N episodes.")
@click.option("--out", required=True, help="Output outcomes file.")
@base_url_option
def evaluate(checkpoint, dataset, risk, alpha, beta, episodes, out, base_url):
    """Roll out a checkpoint over a test dataset under a risk metric."""
    with _client(base_url) as client:
        resp = client.evaluate(
            checkpoint_path=checkpoint,
            dataset_path=dataset,
            risk=_risk_payload(risk, alpha, beta),
            episodes=episodes,
            out_path=out,
        )
    s = resp["summary"]
    ct = "-" if s["mean_crossing_time"] is None else f"{s['mean_crossing_time']:.2f} s"
    click.echo(f"risk={resp['risk_label']} episodes={s['count']}")
    click.echo(
        f"success {s['success_rate']:.2f}%  collision {s['collision_rate']:.2f}%  "
        f"max-time {s['max_time_rate']:.2f}%  crossing {ct}"
    )
    click.echo(f"outcomes written to {resp['outcomes_path']}")


@main.command()
@click.argument("outcome_files", nargs=-1, required=True)
@click.option("--names", default=None, help="Comma-separated approach names.")
@click.option("--out", default=None, help="Report path prefix (.txt and .csv).")
@base_url_option
def compare(outcome_files, names, out, base_url):
    """Significance report over two or more aligned outcome files."""
    if len(outcome_files) < 2:
        raise click.ClickException("need at least two outcome files")
    with _client(base_url) as client:
        resp = client.compare(
            outcome_paths=list(outcome_files),
            names=names.split(",") if names else None,
            out_prefix=out,
        )
    click.echo(resp["text"], nl=False)
    if resp.get("csv_path"):
        click.echo(f"report files: {resp['text_path']}, {resp['csv_path']}")


@main.command("bench-observations")
@click.option("--scenario", type=click.Choice(SCENARIOS), default="turn_right_x2", show_default=True)
@click.option("--types", type=click.Choice(["single", "mixed"]), default="single", show_default=True)
@click.option("--episodes", default=5000, show_default=True, help="Training episodes per encoding.")
@click.option("--test-episodes", default=2000, show_default=True)
@click.option("--steps", default=300_000, show_default=True, help="Training steps per encoding.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, help="Output directory.")
@click.option("--poll-seconds", default=5.0, show_default=True)
@base_url_option
def bench_observations(scenario, types, episodes, test_episodes, steps, seed, out, poll_seconds, base_url):
    """Train one plain Q-learning agent per observation encoding and tabulate."""
    with _client(base_url) as client:
        job = client.start_bench(
            scenario=scenario,
            types=types,
            train_episodes=episodes,
            test_episodes=test_episodes,
            steps=steps,
            seed=seed,
            out_dir=out,
        )
        click.echo(f"benchmark job {job['job_id']} started (6 trainings)")
        result = client.wait_for_job(job["job_id"], poll_seconds)
    click.echo(f"{'enc':>4} {'success%':>9} {'collision%':>11} {'max_time%':>10} {'crossing':>9}")
    for row in result["rows"]:
        ct = "-" if row["crossing_time"] is None else f"{row['crossing_time']:.2f}"
        click.echo(
            f"{row['encoding']:>4} {row['success_rate']:>9.2f} {row['collision_rate']:>11.2f} "
            f"{row['max_time_rate']:>10.2f} {ct:>9}"
        )
    click.echo(f"table: {result['table_path']}")


@main.command("dump-trajectory")
@click.option("--checkpoint", required=True)
@click.option("--dataset", required=True)
@click.option("--episode-id", required=True, type=int)
@click.option("--risk", type=click.Choice(["none", "cvar", "wang"]), default="none", show_default=True)
@click.option("--alpha", default=0.7, show_default=True)
@click.option("--beta", default=-0.2, show_default=True)
@click.option("--out", required=True, help="Output CSV of per-tick states.")
@base_url_option
def dump_trajectory(checkpoint, dataset, episode_id, risk, alpha, beta, out, base_url):
    """Roll out one episode and dump per-tick vehicle states for plotting."""
    with _client(base_url) as client:
        resp = client.trajectory(
            checkpoint_path=checkpoint,
            dataset_path=dataset,
            episode_id=episode_id,
            risk=_risk_payload(risk, alpha, beta),
            out_path=out,
        )
    click.echo(f"{resp['ticks']} ticks, terminal={resp['terminal']}, written to {resp['out_path']}")


if __name__ == "__main__":
    main()
