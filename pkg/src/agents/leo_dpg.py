import logging

import numpy as np
import torch

from .base import Learner
from ..algos.leo_dpg import ContinuousBatch, explore_actions, leo_dpg_update
from ..rollout.collector import PolicyStep

logger = logging.getLogger(__name__)


class LeoDpg(Learner):
    """All-goals deterministic actor-critic on the point maze, one actor head and one critic head per grid goal."""

    method = "leo_dpg"
    discrete = False

    def __init__(self, config, env):
        super().__init__(config, env)
        self.action_dim = env.action_dim
        self._init_net("critic", self.obs_dim + self.action_dim, (self.num_goals, 1), "sigmoid", 4)
        self._init_net("actor", self.obs_dim, (self.num_goals, self.action_dim), "tanh", 5)

    def act(self, obs, commanded, rng):
        return PolicyStep(explore_actions(self._nets["actor"], torch.as_tensor(obs), commanded,
                                          self.cfg.exploration_noise, rng))

    def greedy(self, obs, commanded, rng):
        return PolicyStep(explore_actions(self._nets["actor"], torch.as_tensor(obs), commanded, 0.0, rng))

    def eval_policies(self):
        return {"leo_dpg": self.greedy}

    def update(self, segment, rng):
        batch = ContinuousBatch(segment.flat("obs"), segment.flat("actions"), segment.flat("rewards"),
                                segment.flat("dones"), segment.flat("next_obs"))
        stats = {"critic_loss": [], "actor_loss": []}
        for mb in self._minibatches(batch.obs.shape[0], rng):
            minibatch = ContinuousBatch(batch.obs[mb], batch.actions[mb], batch.rewards[mb], batch.dones[mb],
                                        batch.next_obs[mb])
            critic, actor, out = leo_dpg_update(minibatch, self._nets["critic"], self._nets["actor"],
                                                self.optimizers["critic"], self.optimizers["actor"], self.cfg, self.lr)
            self._nets["critic"], self._nets["actor"] = critic, actor
            for k, v in out.items():
                stats[k].append(v)
        return {k: float(np.mean(v)) for k, v in stats.items()}
