import pytest

from riskcross.behaviors import TypeDistribution

_ACCEPTANCE_RESULTS: list[tuple[str, str, bool]] = []


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(num, description): acceptance criterion with a summary line"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if call.when != "call":
        return
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        num, desc = marker.args
        _ACCEPTANCE_RESULTS.append((num, desc, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, desc, passed in sorted(_ACCEPTANCE_RESULTS, key=lambda r: int(r[0])):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {num:>2}: {status}  {desc}")
from riskcross.episode import CrossingEnv
from riskcross.intersection import build_default_map
from riskcross.learning import AgentConfig, TrainConfig, train
from riskcross.observations import Encoding, ObservationSpec
from riskcross.scenarios import Scenario, generate_episodes, write_dataset


@pytest.fixture(scope="session")
def imap():
    return build_default_map()


@pytest.fixture(scope="session")
def tiny_dataset(imap, tmp_path_factory):
    """Small turn-right dataset file shared by evaluation/service/CLI tests."""
    path = tmp_path_factory.mktemp("data") / "turn_right_mixed.jsonl"
    episodes = generate_episodes(
        imap, Scenario.TURN_RIGHT_X2, TypeDistribution.mixed(), 60, seed=77
    )
    write_dataset(str(path), episodes, Scenario.TURN_RIGHT_X2, "mixed", 77)
    return str(path), episodes


def _train_tiny(imap, out_dir, agent, steps=900):
    spec = ObservationSpec.for_map(imap, Encoding.RELATIVE_PLUS_EGO, 2)
    env = CrossingEnv(imap, spec)
    episodes = generate_episodes(
        imap, Scenario.TURN_RIGHT_X2, TypeDistribution.mixed(), 40, seed=78
    )
    cfg = TrainConfig(
        steps=steps, seed=5, warmup_steps=64, log_every=300, checkpoint_every=steps
    )
    agent_cfg = AgentConfig(agent, hidden=(32, 32))
    return train(
        env,
        episodes,
        agent_cfg,
        cfg,
        str(out_dir),
        meta_extra={"scenario": "turn_right_x2", "types": "mixed", "dataset_seed": 78},
    )


@pytest.fixture(scope="session")
def tiny_qrdqn(imap, tmp_path_factory):
    out = tmp_path_factory.mktemp("qrdqn_run")
    result = _train_tiny(imap, out, "qrdqn")
    return result


@pytest.fixture(scope="session")
def tiny_dqn(imap, tmp_path_factory):
    out = tmp_path_factory.mktemp("dqn_run")
    result = _train_tiny(imap, out, "dqn")
    return result
