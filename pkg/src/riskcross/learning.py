"""Q-learning agents over the crossing environment.

Both agents share one training loop: a plain action-value head is the
num_quantiles = 1 special case of the quantile head, trained with the same
quantile Huber loss (which degenerates to a symmetric Huber at tau = 0.5).
Targets use double-Q action selection; replay is prioritized by absolute
TD error of the per-action means.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from collections import deque

import numpy as np

from .episode import NUM_ACTIONS, CrossingEnv, RewardConfig
from .network import AdamState, MlpNetwork, TrainingError, optimizer_step, save_network
from .observations import ObservationSpec
from .scenarios import EpisodeDefinition
from .simulation import Terminal


def tau_midpoints(n: int) -> np.ndarray:
    """Quantile midpoint probabilities (2i - 1) / (2N), i = 1..N."""
    return (2.0 * np.arange(1, n + 1) - 1.0) / (2.0 * n)


def select_action_greedy(theta: np.ndarray) -> int:
    """Argmax over per-action quantile means; lowest index wins ties."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    return int(np.argmax(theta.mean(axis=1)))


# --- quantile Huber loss ---------------------------------------------------
#
# loss_b = (1/N) sum_i sum_j rho_{tau_i}(target_j - pred_i) with
# rho_tau(u) = |tau - 1{u<0}| * Huber_kappa(u) / kappa.
#
# Instead of materializing all N x N pairs, targets are sorted once per row
# and each pred_i accumulates four analytic segments (below the Huber band,
# negative band, positive band, above the band) from prefix sums. A compiled
# kernel is used when numba is importable; the numpy fallback computes the
# identical segmentation.

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

if _HAVE_NUMBA:

    @_njit(cache=True)
    def _quantile_huber_kernel(pred, target, tau, kappa):
        b, n = pred.shape
        grad = np.empty((b, n))
        losses = np.empty(b)
        p1 = np.empty(n + 1)
        p2 = np.empty(n + 1)
        for row in range(b):
            ts = np.sort(target[row])
            p1[0] = 0.0
            p2[0] = 0.0
            for j in range(n):
                p1[j + 1] = p1[j] + ts[j]
                p2[j + 1] = p2[j] + ts[j] * ts[j]
            row_loss = 0.0
            for i in range(n):
                th = pred[row, i]
                c1 = np.searchsorted(ts, th - kappa, side="left")
                c2 = np.searchsorted(ts, th, side="left")
                c3 = np.searchsorted(ts, th + kappa, side="right")
                w_neg = 1.0 - tau[i]
                w_pos = tau[i]
                cnt_a = c1
                cnt_b = c2 - c1
                cnt_c = c3 - c2
                cnt_d = n - c3
                sum_a = p1[c1]
                sum_b = p1[c2] - p1[c1]
                sum_c = p1[c3] - p1[c2]
                sum_d = p1[n] - p1[c3]
                sq_b = p2[c2] - p2[c1]
                sq_c = p2[c3] - p2[c2]
                grad[row, i] = -(
                    w_neg * (-kappa * cnt_a + (sum_b - cnt_b * th))
                    + w_pos * ((sum_c - cnt_c * th) + kappa * cnt_d)
                ) / (n * kappa)
                row_loss += (
                    w_neg * kappa * (cnt_a * (th - 0.5 * kappa) - sum_a)
                    + w_neg * 0.5 * (sq_b - 2.0 * th * sum_b + cnt_b * th * th)
                    + w_pos * 0.5 * (sq_c - 2.0 * th * sum_c + cnt_c * th * th)
                    + w_pos * kappa * (sum_d - cnt_d * (th + 0.5 * kappa))
                )
            losses[row] = row_loss / (n * kappa)
        return losses, grad


def quantile_huber_batch(
    pred: np.ndarray, target: np.ndarray, tau: np.ndarray, kappa: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Loss and gradient of the pairwise quantile Huber loss, per batch row."""
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    target = np.atleast_2d(np.asarray(target, dtype=float))
    if pred.shape != target.shape:
        raise ValueError("pred and target shapes differ")
    if _HAVE_NUMBA:
        return _quantile_huber_kernel(
            np.ascontiguousarray(pred), np.ascontiguousarray(target), tau, kappa
        )
    return _quantile_huber_numpy(pred, target, tau, kappa)


def _quantile_huber_numpy(
    pred: np.ndarray, target: np.ndarray, tau: np.ndarray, kappa: float
) -> tuple[np.ndarray, np.ndarray]:
    b, n = pred.shape
    ts = np.sort(target, axis=1)
    p1 = np.zeros((b, n + 1))
    p1[:, 1:] = np.cumsum(ts, axis=1)
    p2 = np.zeros((b, n + 1))
    p2[:, 1:] = np.cumsum(ts * ts, axis=1)

    # flatten rows into one ascending array so a single searchsorted serves
    # the whole batch; rows are separated by an offset wider than the data
    lo = min(ts.min(), pred.min()) - kappa - 1.0
    hi = max(ts.max(), pred.max()) + kappa + 1.0
    off = (hi - lo) + 1.0
    row_off = off * np.arange(b)[:, None]
    flat = (ts - lo + row_off).ravel()
    base = np.arange(b)[:, None] * n

    def cut(values: np.ndarray, side: str) -> np.ndarray:
        idx = np.searchsorted(flat, (values - lo + row_off).ravel(), side=side)
        return np.clip(idx.reshape(b, n) - base, 0, n)

    c1 = cut(pred - kappa, "left")
    c2 = cut(pred, "left")
    c3 = cut(pred + kappa, "right")

    take = np.take_along_axis
    s1_c1, s1_c2, s1_c3 = take(p1, c1, 1), take(p1, c2, 1), take(p1, c3, 1)
    s2_c1, s2_c2, s2_c3 = take(p2, c1, 1), take(p2, c2, 1), take(p2, c3, 1)
    cnt_a = c1.astype(float)
    cnt_b = (c2 - c1).astype(float)
    cnt_c = (c3 - c2).astype(float)
    cnt_d = (n - c3).astype(float)
    sum_b_, sum_c = s1_c2 - s1_c1, s1_c3 - s1_c2
    sq_b, sq_c = s2_c2 - s2_c1, s2_c3 - s2_c2
    sum_a = s1_c1
    sum_d = p1[:, n][:, None] - s1_c3

    w_neg = 1.0 - tau[None, :]
    w_pos = tau[None, :]
    th = pred

    grad = -(
        w_neg * (-kappa * cnt_a + (sum_b_ - cnt_b * th))
        + w_pos * ((sum_c - cnt_c * th) + kappa * cnt_d)
    ) / (n * kappa)
    loss_terms = (
        w_neg * kappa * (cnt_a * (th - 0.5 * kappa) - sum_a)
        + w_neg * 0.5 * (sq_b - 2.0 * th * sum_b_ + cnt_b * th * th)
        + w_pos * 0.5 * (sq_c - 2.0 * th * sum_c + cnt_c * th * th)
        + w_pos * kappa * (sum_d - cnt_d * (th + 0.5 * kappa))
    )
    losses = loss_terms.sum(axis=1) / (n * kappa)
    return losses, grad


def quantile_loss(
    pred_theta: np.ndarray, target_theta: np.ndarray, kappa: float = 1.0
) -> tuple[float, np.ndarray]:
    """Pairwise quantile Huber loss for one quantile vector, with gradient."""
    pred_theta = np.asarray(pred_theta, dtype=float)
    target_theta = np.asarray(target_theta, dtype=float)
    if pred_theta.shape != target_theta.shape or pred_theta.ndim != 1:
        raise ValueError("pred and target must be equal-length vectors")
    tau = tau_midpoints(pred_theta.size)
    losses, grads = quantile_huber_batch(pred_theta[None], target_theta[None], tau, kappa)
    return float(losses[0]), grads[0]


# --- targets ---------------------------------------------------------------

def dqn_target(
    rewards: np.ndarray,
    terminals: np.ndarray,
    next_obs: np.ndarray,
    online: MlpNetwork,
    target: MlpNetwork,
    cfg: RewardConfig,
) -> np.ndarray:
    """Double-Q scalar targets: r + gamma * Q_target(s', argmax_a Q_online(s', a))."""
    if online.num_quantiles != 1 or target.num_quantiles != 1:
        raise ValueError("dqn_target requires num_quantiles = 1 heads")
    return qrdqn_target(rewards, terminals, next_obs, online, target, cfg)[:, 0]


def qrdqn_target(
    rewards: np.ndarray,
    terminals: np.ndarray,
    next_obs: np.ndarray,
    online: MlpNetwork,
    target: MlpNetwork,
    cfg: RewardConfig,
) -> np.ndarray:
    """Per-sample target quantile vectors (batch, N).

    Non-terminal rows bootstrap from the target net's quantiles of the action
    that maximizes the online net's mean value (double Q); terminal rows are
    the reward broadcast over all quantiles.
    """
    rewards = np.asarray(rewards, dtype=float)
    terminals = np.asarray(terminals, dtype=bool)
    q_online = online.forward_batch(next_obs).mean(axis=2)  # (batch, actions)
    a_star = np.argmax(q_online, axis=1)
    theta_t = target.forward_batch(next_obs)  # (batch, actions, N)
    boot = theta_t[np.arange(len(a_star)), a_star]
    y = rewards[:, None] + cfg.gamma * boot
    y[terminals] = rewards[terminals, None]
    return y


def fast_targets(
    rewards: np.ndarray,
    terminals: np.ndarray,
    next_obs: np.ndarray,
    online: MlpNetwork,
    target: MlpNetwork,
    gamma: float,
) -> np.ndarray:
    """qrdqn_target through the specialized head paths (same values)."""
    rewards = np.asarray(rewards, dtype=float)
    terminals = np.asarray(terminals, dtype=bool)
    h_next, _ = online.forward_hidden(next_obs)
    a_star = np.argmax(online.head_means(h_next), axis=1)
    h_tgt, _ = target.forward_hidden(next_obs)
    boot = target.head_select(h_tgt, a_star)
    y = rewards[:, None] + gamma * boot
    y[terminals] = rewards[terminals, None]
    return y


# --- prioritized replay ----------------------------------------------------

@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action_index: int
    reward: float
    next_obs: np.ndarray
    terminal: bool

    def __post_init__(self):
        if not 0 <= self.action_index < NUM_ACTIONS:
            raise ValueError(f"action index {self.action_index} out of range")


class ReplayBuffer:
    """Ring buffer with proportional prioritized sampling.

    Sampling probability is priority^exponent; importance-sampling weights
    are (n * P)^-beta, normalized by the maximum weight in the buffer. New
    transitions enter at the current maximum priority so they are replayed
    at least once before their TD error is known.
    """

    def __init__(self, capacity: int, obs_dim: int, exponent: float = 0.6, floor: float = 1e-3):
        self.capacity = int(capacity)
        self.exponent = float(exponent)
        self.floor = float(floor)
        self.obs = np.zeros((capacity, obs_dim))
        self.next_obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.terminals = np.zeros(capacity, dtype=bool)
        self.priorities = np.zeros(capacity)
        self.size = 0
        self._next = 0

    def push(self, tr: Transition) -> None:
        i = self._next
        self.obs[i] = tr.obs
        self.next_obs[i] = tr.next_obs
        self.actions[i] = tr.action_index
        self.rewards[i] = tr.reward
        self.terminals[i] = tr.terminal
        self.priorities[i] = self.priorities[: self.size].max() if self.size else 1.0
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _probabilities(self) -> np.ndarray:
        p = self.priorities[: self.size] ** self.exponent
        p /= p.sum()
        return p

    def sample_indices(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.size, size=batch, replace=True, p=self._probabilities())

    def importance_weights(self, indices: np.ndarray, beta: float) -> np.ndarray:
        probs = self._probabilities()
        w = (self.size * probs[indices]) ** (-beta)
        # the largest weight in the buffer belongs to the least likely entry
        w_max = (self.size * probs.min()) ** (-beta)
        return w / w_max

    def sample(
        self, batch: int, rng: np.random.Generator, beta: float
    ) -> tuple[np.ndarray, np.ndarray]:
        """(indices, normalized importance weights) with one probability pass."""
        probs = self._probabilities()
        idx = rng.choice(self.size, size=batch, replace=True, p=probs)
        w = (self.size * probs[idx]) ** (-beta)
        return idx, w / (self.size * probs.min()) ** (-beta)

    def update_priorities(self, indices: np.ndarray, td_errors: np.ndarray) -> None:
        self.priorities[indices] = np.abs(td_errors) + self.floor


# --- schedules and configuration -------------------------------------------

def linear_schedule(start: float, end: float, fraction_done: float) -> float:
    f = min(max(fraction_done, 0.0), 1.0)
    return start + (end - start) * f


@dataclass
class AgentConfig:
    kind: str  # "dqn" | "qrdqn"
    num_quantiles: int = 200
    hidden: tuple[int, ...] = (300, 300, 300, 300)
    lr: float | None = None  # default depends on kind

    def __post_init__(self):
        if self.kind not in ("dqn", "qrdqn"):
            raise ValueError(f"unknown agent kind {self.kind!r}")
        if self.kind == "dqn":
            self.num_quantiles = 1
        if self.lr is None:
            self.lr = 1e-4 if self.kind == "dqn" else 5e-5


@dataclass
class TrainConfig:
    steps: int  # gradient/environment steps; 0 checkpoints the initialization
    seed: int = 0
    buffer_capacity: int = 100_000
    batch_size: int = 64
    target_sync_every: int = 2000
    warmup_steps: int = 1000
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.3  # anneal over this fraction of total steps
    priority_exponent: float = 0.6
    is_beta_start: float = 0.4
    is_beta_end: float = 1.0
    priority_floor: float = 1e-3
    kappa: float = 1.0
    log_every: int = 1000
    checkpoint_every: int = 50_000
    success_window: int = 100


@dataclass
class TrainResult:
    checkpoint_paths: list[str]
    best_checkpoint: str
    log_path: str
    final_success_rate: float
    best_success_rate: float
    episodes_done: int


def config_digest(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def train(
    env: CrossingEnv,
    episodes: list[EpisodeDefinition],
    agent_cfg: AgentConfig,
    train_cfg: TrainConfig,
    out_dir: str,
    meta_extra: dict | None = None,
    progress: "callable | None" = None,
) -> TrainResult:
    """Run the full training loop and write checkpoints plus a log CSV.

    Episodes are iterated in one seeded shuffle of the dataset, cycling when
    exhausted. One gradient step is taken per environment step once the
    warmup transitions are collected. Deterministic for a fixed seed.
    """
    if not episodes:
        raise ValueError("empty training dataset")
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(train_cfg.seed)
    obs_dim = env.obs_spec.dimension
    n_quant = agent_cfg.num_quantiles
    online = MlpNetwork(obs_dim, NUM_ACTIONS, n_quant, agent_cfg.hidden, seed=train_cfg.seed)
    target_net = online.clone()
    opt = AdamState.for_network(online, agent_cfg.lr)
    buf = ReplayBuffer(
        train_cfg.buffer_capacity, obs_dim, train_cfg.priority_exponent, train_cfg.priority_floor
    )
    tau = tau_midpoints(n_quant)

    meta = {
        "agent": agent_cfg.kind,
        "num_quantiles": n_quant,
        "encoding": int(env.obs_spec.encoding),
        "max_others": env.obs_spec.max_others,
        "seed": train_cfg.seed,
        "lr": agent_cfg.lr,
        "gamma": env.rewards.gamma,
    }
    meta.update(meta_extra or {})
    meta["config_digest"] = config_digest(meta)

    order = rng.permutation(len(episodes))
    ep_cursor = 0
    obs = env.reset(episodes[order[0]])
    recent = deque(maxlen=train_cfg.success_window)
    episodes_done = 0
    loss_sum, loss_count = 0.0, 0
    ckpt_paths: list[str] = []
    best_rate, best_step = -1.0, 0
    best_params: list[np.ndarray] | None = None
    log_path = os.path.join(out_dir, "training_log.csv")
    log_fh = open(log_path, "w", newline="", encoding="utf-8")
    log_fh.write(
        f"# riskcross-training-log/1 seed={train_cfg.seed} digest={meta['config_digest']}\n"
    )
    log = csv.writer(log_fh)
    log.writerow(["step", "episodes", "success_rate", "mean_loss", "epsilon"])

    def success_rate() -> float:
        return float(np.mean(recent)) if recent else 0.0

    def save_ckpt(step: int, params_src: MlpNetwork, name: str, rate: float) -> str:
        path = os.path.join(out_dir, name)
        save_network(params_src, {**meta, "step": step, "train_success_rate": rate}, path)
        return path

    anneal_steps = max(int(train_cfg.eps_fraction * train_cfg.steps), 1)
    for step_i in range(1, train_cfg.steps + 1):
        eps = linear_schedule(train_cfg.eps_start, train_cfg.eps_end, (step_i - 1) / anneal_steps)
        if rng.random() < eps:
            action = int(rng.integers(NUM_ACTIONS))
        else:
            h, _ = online.forward_hidden(obs[None, :])
            action = int(np.argmax(online.head_means(h)[0]))
        next_obs, reward, done, terminal = env.step(action)
        buf.push(Transition(obs, action, reward, next_obs, done))
        if done:
            recent.append(1.0 if terminal is Terminal.GOAL else 0.0)
            episodes_done += 1
            ep_cursor = (ep_cursor + 1) % len(order)
            obs = env.reset(episodes[order[ep_cursor]])
        else:
            obs = next_obs

        if buf.size >= max(train_cfg.warmup_steps, train_cfg.batch_size):
            is_beta = linear_schedule(
                train_cfg.is_beta_start, train_cfg.is_beta_end, step_i / train_cfg.steps
            )
            idx, weights = buf.sample(train_cfg.batch_size, rng, is_beta)
            batch_act = buf.actions[idx]
            y = fast_targets(
                buf.rewards[idx],
                buf.terminals[idx],
                buf.next_obs[idx],
                online,
                target_net,
                env.rewards.gamma,
            )
            h_cur, cache = online.forward_hidden(buf.obs[idx])
            pred = online.head_select(h_cur, batch_act)  # (batch, N)
            losses, grad_pred = quantile_huber_batch(pred, y, tau, train_cfg.kappa)
            td = y.mean(axis=1) - pred.mean(axis=1)
            buf.update_priorities(idx, td)
            grad_pred *= weights[:, None] / train_cfg.batch_size
            grads = online.backward_selected(cache, batch_act, grad_pred)
            try:
                optimizer_step(online.parameters(), grads, opt)
            except TrainingError as exc:
                log_fh.close()
                raise TrainingError(f"at step {step_i}: {exc}") from exc
            loss_sum += float(np.mean(losses * weights))
            loss_count += 1

        if step_i % train_cfg.target_sync_every == 0:
            target_net.copy_from(online)
        if step_i % train_cfg.log_every == 0:
            mean_loss = loss_sum / loss_count if loss_count else 0.0
            log.writerow(
                [step_i, episodes_done, f"{success_rate():.4f}", f"{mean_loss:.6f}", f"{eps:.4f}"]
            )
            log_fh.flush()
            loss_sum, loss_count = 0.0, 0
            if progress is not None:
                progress(step_i, train_cfg.steps, success_rate(), mean_loss)
        if step_i % train_cfg.checkpoint_every == 0 or step_i == train_cfg.steps:
            rate = success_rate()
            ckpt_paths.append(save_ckpt(step_i, online, f"checkpoint_{step_i:08d}.ckpt", rate))
            # ties prefer the later, more-trained checkpoint
            if rate >= best_rate or best_params is None:
                best_rate, best_step = rate, step_i
                best_params = [p.copy() for p in online.parameters()]

    log_fh.close()
    if best_params is None:  # zero-step run: the initialization is the result
        ckpt_paths.append(save_ckpt(0, online, "checkpoint_00000000.ckpt", 0.0))
        best_rate, best_step = 0.0, 0
        best_params = [p.copy() for p in online.parameters()]
    best_net = online.clone()
    for dst, src in zip(best_net.parameters(), best_params):
        np.copyto(dst, src)
    best_path = save_ckpt(best_step, best_net, "best.ckpt", best_rate)
    return TrainResult(
        checkpoint_paths=ckpt_paths,
        best_checkpoint=best_path,
        log_path=log_path,
        final_success_rate=success_rate(),
        best_success_rate=best_rate,
        episodes_done=episodes_done,
    )
