"""
Value learners on the PQN base: UVFA (optionally with hindsight relabelling or naive all-goals
relabelling), LEO, and Dual LEO which trains both and acts on their mix.
"""
import logging
from typing import Dict

import numpy as np
import torch

from .base import Learner
from ..algos import pqn
from ..algos.relabel import HerStrategy, her_relabel, naive_all_goals_relabel, relabel_q_targets
from ..algos.types import SegmentBatch, uvfa_input
from ..model.mlp import mlp_apply
from ..rollout.collector import PolicyStep

logger = logging.getLogger(__name__)


def _mean(stats: Dict[str, list]) -> Dict[str, float]:
    return {k: float(np.mean(v)) if v else 0.0 for k, v in stats.items()}


class UvfaPqn(Learner):
    """Goal-conditioned Q(lambda) on the commanded goal only."""

    method = "uvfa_pqn"

    def __init__(self, config, env):
        super().__init__(config, env)
        self._init_net("uvfa", self.obs_dim + self.num_goals, (1, env.num_actions), "sigmoid", 0)

    def q_values(self, obs, commanded) -> torch.Tensor:
        inputs = uvfa_input(torch.as_tensor(obs), torch.as_tensor(commanded), self.num_goals)
        return mlp_apply(self._nets["uvfa"], inputs)[:, 0, :]

    def act(self, obs, commanded, rng):
        return PolicyStep(pqn.epsilon_greedy(self.q_values(obs, commanded), self.epsilon, rng))

    def greedy(self, obs, commanded, rng):
        return PolicyStep(pqn.greedy_actions(self.q_values(obs, commanded)))

    def eval_policies(self):
        return {"uvfa": self.greedy}

    def _relabelled(self, segment: SegmentBatch, rng: np.random.Generator):
        """Extra `(obs, goals, actions, targets)` rows added to the commanded-goal batch."""
        return None

    def _regression_batch(self, segment: SegmentBatch, rng: np.random.Generator):
        params = self._nets["uvfa"]
        obs = segment.flat("obs")
        goals = segment.flat("commanded")
        actions = segment.flat("actions")
        targets = pqn.uvfa_q_targets(segment, params, self.cfg).reshape(-1)

        extra = self._relabelled(segment, rng)
        if extra is not None:
            obs, goals, actions, targets = (torch.cat([a, b.to(a.dtype)]) for a, b in
                                            zip((obs, goals, actions, targets), extra))
        return obs, goals, actions, targets

    def update(self, segment, rng):
        obs, goals, actions, targets = self._regression_batch(segment, rng)
        stats = {"q_loss": []}
        for mb in self._minibatches(obs.shape[0], rng):
            loss, grads = pqn.uvfa_q_loss(self._nets["uvfa"], obs[mb], goals[mb], actions[mb], targets[mb],
                                          self.num_goals)
            self._step("uvfa", grads)
            stats["q_loss"].append(loss)
        stats = _mean(stats)
        stats["batch_size"] = float(obs.shape[0])
        return stats


def _relabel_rows(segment: SegmentBatch, relabel, params, cfg):
    if len(relabel) == 0:
        return None
    time, lane = torch.from_numpy(relabel.time), torch.from_numpy(relabel.lane)
    targets = relabel_q_targets(segment, relabel, params, cfg)
    return segment.obs[time, lane], torch.from_numpy(relabel.goals), segment.actions[time, lane], targets


class UvfaPqnHer(UvfaPqn):
    """UVFA plus hindsight relabelled transitions, their targets recomputed from the stored achievement masks."""

    method = "uvfa_pqn_her"

    def __init__(self, config, env):
        super().__init__(config, env)
        self.strategy = HerStrategy.from_config(self.cfg.her_strategy, self.cfg.her_n, self.cfg.her_m)

    def _relabelled(self, segment, rng):
        relabel = her_relabel(segment, self.strategy, self.cfg.her_level, rng)
        return _relabel_rows(segment, relabel, self._nets["uvfa"], self.cfg)


class NaiveRelabelPqn(UvfaPqn):
    """
    All-goals learning through a UVFA: every transition replayed under every goal, `G` times
    the regression rows of the commanded-goal learner. The throughput baseline of LEO.
    """

    method = "naive_relabel"

    def _regression_batch(self, segment, rng):
        relabel = naive_all_goals_relabel(segment, self.num_goals)
        return _relabel_rows(segment, relabel, self._nets["uvfa"], self.cfg)


class Leo(Learner):
    """All-goals Q(lambda): one curried network, every goal head regressed on every transition."""

    method = "leo"

    def __init__(self, config, env):
        super().__init__(config, env)
        self._init_net("leo", self.obs_dim, (self.num_goals, env.num_actions), "sigmoid", 1)

    def q_values(self, obs, commanded) -> torch.Tensor:
        return pqn.leo_slice(mlp_apply(self._nets["leo"], torch.as_tensor(obs)), torch.as_tensor(commanded))

    def act(self, obs, commanded, rng):
        return PolicyStep(pqn.epsilon_greedy(self.q_values(obs, commanded), self.epsilon, rng))

    def greedy(self, obs, commanded, rng):
        return PolicyStep(pqn.greedy_actions(self.q_values(obs, commanded)))

    def eval_policies(self):
        return {"leo": self.greedy}

    def leo_update(self, segment: SegmentBatch, rng: np.random.Generator) -> Dict[str, float]:
        targets = pqn.leo_q_targets(segment, self._nets["leo"], self.cfg).reshape(-1, self.num_goals)
        obs, actions = segment.flat("obs"), segment.flat("actions")

        stats = {"leo_loss": [], "heads_updated": []}
        for mb in self._minibatches(obs.shape[0], rng):
            mask = None
            if self.cfg.mask_keep_prob < 1.0:
                mask = pqn.sample_head_mask(self.num_goals, self.cfg.mask_keep_prob, rng, self.cfg.mask_mode)
                stats["heads_updated"].append(float(mask.sum()))
            loss, grads = pqn.leo_q_loss(self._nets["leo"], obs[mb], actions[mb], targets[mb], mask)
            self._step("leo", grads)
            stats["leo_loss"].append(loss)

        if not stats["heads_updated"]:
            del stats["heads_updated"]
        return _mean(stats)

    def update(self, segment, rng):
        return self.leo_update(segment, rng)


class DualLeoPqn(Leo):
    """
    A LEO and a UVFA network trained side by side, each bootstrapping on its own estimates.
    Acting is epsilon-greedy on their mix (`acting_mode`, `alpha`).
    """

    method = "dual_leo_pqn"

    def __init__(self, config, env):
        super().__init__(config, env)
        self.uvfa = UvfaPqn(config, env)
        self._nets["uvfa"] = self.uvfa._nets["uvfa"]
        self.optimizers["uvfa"] = self.uvfa.optimizers["uvfa"]
        self.uvfa._nets, self.uvfa.optimizers = self._nets, self.optimizers

    @property
    def alpha(self) -> float:
        return self.cfg.alpha if self.schedule is None else self.schedule.alpha

    def q_values(self, obs, commanded) -> torch.Tensor:
        return pqn.dual_leo_q(torch.as_tensor(obs), torch.as_tensor(commanded), self._nets["leo"],
                              self._nets["uvfa"], self.cfg, self.alpha)

    def eval_policies(self):
        leo = Leo.q_values
        return {
            "mixed": self.greedy,
            "leo": lambda obs, commanded, rng: PolicyStep(pqn.greedy_actions(leo(self, obs, commanded))),
            "uvfa": self.uvfa.greedy,
        }

    def update(self, segment, rng):
        self.uvfa.schedule = self.schedule
        stats = self.leo_update(segment, rng)
        stats.update(self.uvfa.update(segment, rng))
        return stats
