"""Episode runner: wires the simulator, the other drivers' policies and the
observation encoder into a step interface for learning and evaluation.

The ego vehicle starts at the entry point of its turn path with zero speed
and picks one of four longitudinal accelerations per tick; the others follow
their episode behavior type. Rewards: +100 for reaching the goal, -1000 for
a collision, and a constant -5 per action on top.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .behaviors import BehaviorType, IdmParams, policy_act
from .intersection import IntersectionMap
from .observations import ObservationSpec, encode
from .scenarios import EpisodeDefinition
from .simulation import (
    MAX_EPISODE_TIME,
    Terminal,
    VehicleState,
    WorldState,
    check_termination,
    initial_world,
    step,
)

EGO_ACTIONS = (-3.0, 0.0, 2.0, 5.0)  # m/s^2
NUM_ACTIONS = len(EGO_ACTIONS)


@dataclass(frozen=True)
class RewardConfig:
    r_goal: float = 100.0
    r_collision: float = -1000.0
    r_step: float = -5.0
    gamma: float = 0.95


class CrossingEnv:
    """Stateful per-episode wrapper; reset() loads an episode definition."""

    def __init__(
        self,
        imap: IntersectionMap,
        obs_spec: ObservationSpec,
        rewards: RewardConfig = RewardConfig(),
        max_time: float = MAX_EPISODE_TIME,
    ):
        self.imap = imap
        self.obs_spec = obs_spec
        self.rewards = rewards
        self.max_time = max_time
        self.world: WorldState | None = None
        self._behavior: BehaviorType | None = None
        self._idm: list[IdmParams] = []

    def reset(self, episode: EpisodeDefinition) -> np.ndarray:
        ego = VehicleState(path_id=episode.scenario.ego_path, s=0.0, v=0.0)
        others = [
            VehicleState(path_id=f"lane{o.lane_id}", s=o.s, v=o.v) for o in episode.others
        ]
        world = initial_world(ego, others)
        world = WorldState(
            t=world.t,
            ego=world.ego,
            others=world.others,
            terminal=check_termination(world, self.imap, self.max_time),
        )
        self.world = world
        self._behavior = episode.behavior
        self._idm = [IdmParams(v0=o.v) for o in episode.others]
        return encode(world, self.obs_spec, self.imap)

    def step(self, action_index: int) -> tuple[np.ndarray, float, bool, Terminal]:
        """(next observation, reward, done, terminal kind) for one ego action."""
        if self.world is None:
            raise RuntimeError("reset() must be called before step()")
        world = self.world
        accels = [
            policy_act(world, i, self._behavior, self.imap, self._idm[i])
            for i in range(len(world.others))
        ]
        world = step(world, EGO_ACTIONS[action_index], accels, self.imap, self.max_time)
        self.world = world
        reward = self.rewards.r_step
        if world.terminal is Terminal.GOAL:
            reward += self.rewards.r_goal
        elif world.terminal is Terminal.COLLISION:
            reward += self.rewards.r_collision
        done = world.terminal is not Terminal.RUNNING
        return encode(world, self.obs_spec, self.imap), reward, done, world.terminal
