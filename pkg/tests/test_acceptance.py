"""Acceptance suite.

Criteria 1-7 are property/oracle checks that run in minutes. Criteria 8-11
are desk-scale trend reproductions that require trained checkpoints; those
runs are deterministic and cached under .acceptance_cache/ (first execution
trains from scratch, which takes several hours of CPU time in total).
Each criterion reports one PASS/FAIL line in the pytest terminal summary.
"""

import math

import numpy as np
import pytest
from scipy.special import ndtri

import acceptance_runs as runs
from riskcross.behaviors import BehaviorType, IdmParams, policy_act
from riskcross.episode import CrossingEnv
from riskcross.evaluation import evaluate_checkpoint
from riskcross.intersection import build_default_map
from riskcross.learning import (
    quantile_loss,
    select_action_greedy,
    tau_midpoints,
)
from riskcross.network import MlpNetwork
from riskcross.observations import Encoding, ObservationSpec
from riskcross.risk import RiskKind, RiskMetricConfig, cvar, select_action_risk, wang
from riskcross.scenarios import Scenario, generate_episodes
from riskcross.simulation import (
    SimulationError,
    Terminal,
    VehicleState,
    initial_world,
    step,
)
from riskcross.stats import bonferroni, cochran_q, mcnemar, summarize
from riskcross.behaviors import TypeDistribution

NONE_CFG = RiskMetricConfig(RiskKind.NONE)


@pytest.fixture(scope="module")
def imap():
    return build_default_map()


@pytest.mark.acceptance("1", "gradients: backprop < 1e-4 rel, quantile loss < 1e-6 abs")
def test_criterion_1_gradient_correctness():
    rng = np.random.default_rng(100)
    worst_rel = 0.0
    for trial in range(100):
        net = MlpNetwork(
            input_dim=int(rng.integers(2, 6)),
            num_actions=int(rng.integers(1, 4)),
            num_quantiles=int(rng.integers(1, 5)),
            hidden=tuple(int(h) for h in rng.integers(3, 8, size=int(rng.integers(1, 3)))),
            seed=trial,
        )
        x = rng.normal(size=net.input_dim)
        og = rng.normal(size=(net.num_actions, net.num_quantiles))
        analytic = net.backward(x, og)
        eps = 1e-6
        for pi, p in enumerate(net.parameters()):
            it = np.nditer(p, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = p[idx]
                p[idx] = orig + eps
                fp = float((net.forward(x) * og).sum())
                p[idx] = orig - eps
                fm = float((net.forward(x) * og).sum())
                p[idx] = orig
                fd = (fp - fm) / (2 * eps)
                a = analytic[pi][idx]
                rel = abs(fd - a) / max(abs(fd), abs(a), 1e-8)
                worst_rel = max(worst_rel, rel)
    assert worst_rel < 1e-4

    worst_abs = 0.0
    for trial in range(60):
        n = int(rng.integers(1, 24))
        pred = rng.normal(size=n) * 20
        target = rng.normal(size=n) * 20
        _, grad = quantile_loss(pred, target)
        eps = 1e-7
        for i in range(n):
            d = pred.copy()
            d[i] += eps
            lp, _ = quantile_loss(d, target)
            d[i] -= 2 * eps
            lm, _ = quantile_loss(d, target)
            worst_abs = max(worst_abs, abs((lp - lm) / (2 * eps) - grad[i]))
    assert worst_abs < 1e-6


@pytest.mark.acceptance("2", "risk-metric axioms over 10^4 random quantile sets, tol 1e-9")
def test_criterion_2_risk_axioms():
    rng = np.random.default_rng(200)
    metrics = [
        lambda q: cvar(q, 0.7),
        lambda q: wang(q, -0.2),
    ]
    for _ in range(10_000):
        n = int(rng.integers(1, 32))
        q = rng.normal(scale=10.0, size=n)
        c = float(rng.normal(scale=50.0))
        lam = float(rng.uniform(0.01, 20.0))
        bump = rng.uniform(0.0, 5.0, size=n)
        q_sorted = np.sort(q)
        for rho in metrics:
            base = rho(q)
            assert abs(rho(q + c) - (base + c)) < 1e-9
            assert abs(rho(lam * q) - lam * base) < 1e-9 * max(1.0, lam)
            assert rho(np.sort(q_sorted + bump)) >= rho(q_sorted) - 1e-9


@pytest.mark.acceptance("3", "Wang on 200 normal midpoints, beta=-0.2 in [-0.22, -0.18]")
def test_criterion_3_wang_normal_shift():
    q = ndtri(tau_midpoints(200))
    value = wang(q, -0.2)
    assert -0.22 <= value <= -0.18


@pytest.mark.acceptance("4", "CVaR alpha=1 = mean; risk 'none' selection = greedy (10^4 draws)")
def test_criterion_4_reductions():
    rng = np.random.default_rng(400)
    for _ in range(2000):
        q = rng.normal(scale=30.0, size=int(rng.integers(1, 64)))
        assert cvar(q, 1.0) == float(np.mean(np.sort(q)))
    for _ in range(10_000):
        theta = rng.normal(scale=20.0, size=(4, int(rng.integers(1, 16))))
        assert select_action_risk(theta, NONE_CFG) == select_action_greedy(theta)


@pytest.mark.acceptance("5", "simulator: determinism, speed bounds, absorption (10^4 rollouts)")
def test_criterion_5_simulator_invariants(imap):
    rng = np.random.default_rng(500)
    episodes = generate_episodes(
        imap, Scenario.TURN_LEFT_X4, TypeDistribution.mixed(), 2500, seed=501
    )
    spec = ObservationSpec.for_map(imap, Encoding.RELATIVE_PLUS_EGO, 4)
    env = CrossingEnv(imap, spec)

    def rollout(ep, seed):
        r = np.random.default_rng(seed)
        env.reset(ep)
        trace = []
        done = False
        while not done:
            _, _, done, term = env.step(int(r.integers(4)))
            w = env.world
            for v in [w.ego.v] + [o.v for o in w.others]:
                assert 0.0 <= v <= 15.0
            trace.append((w.t, w.ego.s, w.ego.v))
        return trace, term

    total = 0
    for i in range(10_000):
        ep = episodes[i % len(episodes)]
        trace, term = rollout(ep, seed=i)
        total += len(trace)
        if i % 100 == 0:  # determinism: identical replay
            assert rollout(ep, seed=i)[0] == trace
        if i % 250 == 0:  # absorption: terminal worlds refuse stepping
            frozen = env.world
            with pytest.raises(SimulationError):
                step(frozen, 0.0, [0.0] * len(frozen.others), imap)
            assert env.world == frozen
    assert total > 100_000  # sanity: these were real rollouts


@pytest.mark.acceptance("6", "statistics oracles: McNemar 49/12, Cochran Q=0, Bonferroni exact")
def test_criterion_6_statistics_oracles():
    a = np.array([1] * 10 + [0] * 2 + [1] * 7 + [0] * 11)
    b = np.array([0] * 10 + [1] * 2 + [1] * 7 + [0] * 11)
    res = mcnemar(a, b)
    assert abs(res.statistic - 49 / 12) < 1e-6

    m = np.tile(np.array([[1], [0], [1], [0], [1]]), (1, 4))
    q = cochran_q(m)
    assert q.statistic == 0.0 and q.p_value == 1.0

    assert bonferroni([0.04]) == [True]
    assert bonferroni([0.04, 0.04, 0.04, 0.04]) == [False] * 4
    assert bonferroni([0.0124, 0.0126, 0.9, 0.2]) == [True, False, False, False]


@pytest.mark.acceptance("7", "passive < aggressive iff the ego occupies the corridor (10^3 scenes)")
def test_criterion_7_behavior_contrast(imap):
    rng = np.random.default_rng(700)
    from riskcross.behaviors import _ego_as_leader

    blocked_scenes = 0
    free_scenes = 0
    for _ in range(1000):
        path = "turn_right" if rng.random() < 0.5 else "turn_left"
        ego = VehicleState(
            path_id=path,
            s=float(rng.uniform(0.0, imap.ego_paths[path].goal_s)),
            v=float(rng.uniform(0.0, 15.0)),
        )
        lane = int(rng.integers(1, 3))
        follower = VehicleState(
            path_id=f"lane{lane}",
            s=float(rng.uniform(0.0, imap.lanes[lane].polyline.length - 5.0)),
            v=float(rng.uniform(8.0, 10.0)),
        )
        world = initial_world(ego, [follower])
        p = IdmParams(v0=follower.v)
        a_passive = policy_act(world, 0, BehaviorType.PASSIVE, imap, p)
        a_aggressive = policy_act(world, 0, BehaviorType.AGGRESSIVE, imap, p)
        ego_gap, _ = _ego_as_leader(world, 0, imap)
        if math.isfinite(ego_gap):
            blocked_scenes += 1
            assert a_passive < a_aggressive
        else:
            free_scenes += 1
            assert a_passive == a_aggressive
    assert blocked_scenes >= 20 and free_scenes >= 20


# --- desk-scale trend criteria (cached deterministic training runs) ---------


@pytest.mark.acceptance("8", "desk-scale QRDQN turn-right/single: success >= 90%, collision <= 10%")
def test_criterion_8_desk_scale_training(imap):
    ckpt = runs.best_checkpoint(runs.TURN_RIGHT_SINGLE, progress=True)
    test_eps = runs.test_dataset("turn_right_x2", "single")
    outcomes, _ = evaluate_checkpoint(
        str(ckpt), test_eps, Scenario.TURN_RIGHT_X2, NONE_CFG, imap
    )
    s = summarize(outcomes)
    print(
        f"\n  criterion 8 rates: success {s.success_rate:.2f}% collision {s.collision_rate:.2f}%"
        f" max-time {s.max_time_rate:.2f}% crossing {s.mean_crossing_time}"
    )
    assert s.success_rate >= 90.0
    assert s.collision_rate <= 10.0


@pytest.mark.acceptance("9", "CVaR 0.7 collision rate <= risk-neutral on the same checkpoint")
def test_criterion_9_cvar_benefit(imap):
    ckpt = runs.best_checkpoint(runs.TURN_LEFT_MIXED_QR[0], progress=True)
    test_eps = runs.test_dataset("turn_left_x2", "mixed")
    neutral, _ = evaluate_checkpoint(str(ckpt), test_eps, Scenario.TURN_LEFT_X2, NONE_CFG, imap)
    risked, _ = evaluate_checkpoint(
        str(ckpt),
        test_eps,
        Scenario.TURN_LEFT_X2,
        RiskMetricConfig(RiskKind.CVAR, alpha=0.7),
        imap,
    )
    s_n, s_r = summarize(neutral), summarize(risked)
    col_n = np.array([o.result.value == "collision" for o in neutral], dtype=int)
    col_r = np.array([o.result.value == "collision" for o in risked], dtype=int)
    mc = mcnemar(col_n, col_r)
    print(
        f"\n  criterion 9 collision rates: neutral {s_n.collision_rate:.2f}% "
        f"cvar {s_r.collision_rate:.2f}% (McNemar p={mc.p_value:.4f})"
    )
    assert s_r.collision_rate <= s_n.collision_rate
    if mc.p_value < 0.05:
        assert s_r.collision_rate < s_n.collision_rate


@pytest.mark.acceptance("10", "Wang beta=-0.6 max-time rate >= beta=-0.2 on the platoon checkpoint")
def test_criterion_10_wang_conservatism(imap):
    ckpt = runs.best_checkpoint(runs.PLATOON_MIXED, progress=True)
    test_eps = runs.test_dataset("turn_right_platoon", "mixed")
    mild, _ = evaluate_checkpoint(
        str(ckpt),
        test_eps,
        Scenario.TURN_RIGHT_PLATOON,
        RiskMetricConfig(RiskKind.WANG, beta=-0.2),
        imap,
    )
    strong, _ = evaluate_checkpoint(
        str(ckpt),
        test_eps,
        Scenario.TURN_RIGHT_PLATOON,
        RiskMetricConfig(RiskKind.WANG, beta=-0.6),
        imap,
    )
    s_mild, s_strong = summarize(mild), summarize(strong)
    print(
        f"\n  criterion 10 max-time rates: beta=-0.2 {s_mild.max_time_rate:.2f}% "
        f"beta=-0.6 {s_strong.max_time_rate:.2f}%"
    )
    assert s_strong.max_time_rate >= s_mild.max_time_rate


@pytest.mark.acceptance("11", "QRDQN success-curve steadier than DQN in >= 2 of 3 seeds")
def test_criterion_11_training_stability():
    import csv as csv_mod

    def final_third_std(run_dir) -> float:
        with open(run_dir / "training_log.csv", newline="") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        rows = list(csv_mod.DictReader(lines))
        steps = np.array([int(r["step"]) for r in rows])
        rates = np.array([float(r["success_rate"]) for r in rows])
        cutoff = steps.max() * 2 / 3
        return float(np.std(rates[steps > cutoff]))

    wins = 0
    for spec_qr, spec_dqn in zip(runs.TURN_LEFT_MIXED_QR, runs.TURN_LEFT_MIXED_DQN):
        qr_dir = runs.ensure_trained(spec_qr, progress=True)
        dqn_dir = runs.ensure_trained(spec_dqn, progress=True)
        std_qr = final_third_std(qr_dir)
        std_dqn = final_third_std(dqn_dir)
        print(
            f"\n  criterion 11 seed {spec_qr.train_seed}: "
            f"qrdqn std {std_qr:.4f} vs dqn std {std_dqn:.4f}"
        )
        wins += std_qr < std_dqn
    assert wins >= 2
