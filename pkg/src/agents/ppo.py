import logging

import torch

from .base import Learner
from .pqn import Leo
from ..algos.ppo import ppo_update, sample_actions
from ..algos.types import uvfa_input
from ..model.mlp import mlp_apply
from ..rollout.collector import PolicyStep

logger = logging.getLogger(__name__)


class Ppo(Learner):
    method = "ppo"

    def __init__(self, config, env):
        super().__init__(config, env)
        in_dim = self.obs_dim + self.num_goals
        self._init_net("actor", in_dim, (1, env.num_actions), "none", 2)
        self._init_net("critic", in_dim, (1, 1), "sigmoid", 3)

    def _inputs(self, obs, commanded):
        return uvfa_input(torch.as_tensor(obs), torch.as_tensor(commanded), self.num_goals)

    def act(self, obs, commanded, rng):
        inputs = self._inputs(obs, commanded)
        actions, log_probs = sample_actions(mlp_apply(self._nets["actor"], inputs)[:, 0, :], rng)
        values = mlp_apply(self._nets["critic"], inputs)[:, 0, 0].numpy()
        return PolicyStep(actions, log_probs, values)

    def greedy(self, obs, commanded, rng):
        logits = mlp_apply(self._nets["actor"], self._inputs(obs, commanded))[:, 0, :]
        return PolicyStep(sample_actions(logits, rng, greedy=True)[0])

    def eval_policies(self):
        return {"ppo": self.greedy}

    def ppo_step(self, segment, rng, leo_params=None, clone_scale: float = 1.0):
        actor, critic, stats = ppo_update(segment, self._nets["actor"], self._nets["critic"],
                                          self.optimizers["actor"], self.optimizers["critic"], self.cfg, rng,
                                          self.lr, leo_params, clone_scale)
        self._nets["actor"], self._nets["critic"] = actor, critic
        return stats

    def update(self, segment, rng):
        return self.ppo_step(segment, rng)


class DualLeoPpo(Ppo):
    """
    PPO cloned towards a LEO network trained on the same segments: the policy towards the greedy
    LEO action, the value towards the LEO value, with coefficients annealed by `clone_scale`.
    """

    method = "dual_leo_ppo"

    def __init__(self, config, env):
        super().__init__(config, env)
        self.leo = Leo(config, env)
        self._nets["leo"] = self.leo._nets["leo"]
        self.optimizers["leo"] = self.leo.optimizers["leo"]
        self.leo._nets, self.leo.optimizers = self._nets, self.optimizers

    @property
    def clone_scale(self) -> float:
        return 1.0 if self.schedule is None else self.schedule.clone_scale

    def eval_policies(self):
        return {"ppo": self.greedy, "leo": self.leo.greedy}

    def update(self, segment, rng):
        self.leo.schedule = self.schedule
        stats = self.leo.leo_update(segment, rng)
        stats.update(self.ppo_step(segment, rng, self._nets["leo"], self.clone_scale))
        stats["clone_scale"] = self.clone_scale
        return stats
