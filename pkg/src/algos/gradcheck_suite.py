"""
Every analytic loss of the package under the finite-difference checker, on tiny seeded networks
and batches in float64.
"""
import logging
from typing import Callable, Dict

import torch

from . import leo_dpg, ppo, pqn
from .types import uvfa_input
from ..configuration import TrainConfig
from ..model.mlp import NetGrads, init_mlp
from ..utils.gradcheck import finite_diff_check

logger = logging.getLogger(__name__)

THRESHOLD = 1e-3
WIDTH = 16
OBS_DIM = 6
NUM_GOALS = 4
NUM_ACTIONS = 3
ACTION_DIM = 2
BATCH = 12


def _net(in_dim, head_shape, activation, seed):
    return init_mlp(in_dim, [WIDTH, WIDTH], head_shape, output_activation=activation, seed=seed, dtype=torch.float64)


def _quadratic(seed: int) -> float:
    params = _net(OBS_DIM, (1, 1), "none", seed)
    targets = [torch.randn(b.shape, dtype=torch.float64, generator=torch.Generator().manual_seed(seed + i))
               for i, b in enumerate(params.blocks())]

    def loss_fn(p):
        diffs = [b - t for b, t in zip(p.blocks(), targets)]
        return 0.5 * sum(float((d * d).sum()) for d in diffs), NetGrads(tuple(diffs))

    return finite_diff_check(params, loss_fn, seed=seed)


def _uvfa_q(seed: int) -> float:
    g = torch.Generator().manual_seed(seed)
    params = _net(OBS_DIM + NUM_GOALS, (1, NUM_ACTIONS), "sigmoid", seed)
    obs = torch.randn(BATCH, OBS_DIM, dtype=torch.float64, generator=g)
    goals = torch.randint(NUM_GOALS, (BATCH,), generator=g)
    actions = torch.randint(NUM_ACTIONS, (BATCH,), generator=g)
    targets = torch.rand(BATCH, dtype=torch.float64, generator=g)
    return finite_diff_check(params, lambda p: pqn.uvfa_q_loss(p, obs, goals, actions, targets, NUM_GOALS), seed=seed)


def _leo_q(seed: int, masked: bool = False) -> float:
    g = torch.Generator().manual_seed(seed)
    params = _net(OBS_DIM, (NUM_GOALS, NUM_ACTIONS), "sigmoid", seed)
    obs = torch.randn(BATCH, OBS_DIM, dtype=torch.float64, generator=g)
    actions = torch.randint(NUM_ACTIONS, (BATCH,), generator=g)
    targets = torch.rand(BATCH, NUM_GOALS, dtype=torch.float64, generator=g)
    mask = torch.tensor([True, False, True, False]) if masked else None
    return finite_diff_check(params, lambda p: pqn.leo_q_loss(p, obs, actions, targets, mask), seed=seed)


def _ppo(seed: int) -> float:
    g = torch.Generator().manual_seed(seed)
    cfg = TrainConfig()
    actor = _net(OBS_DIM + NUM_GOALS, (1, NUM_ACTIONS), "none", seed)
    critic = _net(OBS_DIM + NUM_GOALS, (1, 1), "sigmoid", seed + 1)
    inputs = uvfa_input(torch.randn(BATCH, OBS_DIM, dtype=torch.float64, generator=g),
                        torch.randint(NUM_GOALS, (BATCH,), generator=g), NUM_GOALS)
    actions = torch.randint(NUM_ACTIONS, (BATCH,), generator=g)
    # old log-probs away from the current policy so every branch of the clip is exercised
    old_log_probs = ppo.policy_log_probs(actor, inputs, actions) + 0.3 * torch.randn(BATCH, dtype=torch.float64, generator=g)
    advantages = torch.randn(BATCH, dtype=torch.float64, generator=g)
    returns = torch.rand(BATCH, dtype=torch.float64, generator=g)

    def loss_fn(nets):
        out = ppo.ppo_losses(nets[0], nets[1], inputs, actions, old_log_probs, advantages, returns, cfg)
        return out.loss, [out.actor_grads, out.critic_grads]

    return finite_diff_check([actor, critic], loss_fn, seed=seed)


def _dual_leo_ppo(seed: int, value: bool) -> float:
    g = torch.Generator().manual_seed(seed)
    cfg = TrainConfig(pc_coef=0.0 if value else 0.1, vc_coef=0.5 if value else 0.0)
    actor = _net(OBS_DIM + NUM_GOALS, (1, NUM_ACTIONS), "none", seed)
    critic = _net(OBS_DIM + NUM_GOALS, (1, 1), "sigmoid", seed + 1)
    teacher = _net(OBS_DIM, (NUM_GOALS, NUM_ACTIONS), "sigmoid", seed + 2)
    obs = torch.randn(BATCH, OBS_DIM, dtype=torch.float64, generator=g)
    goals = torch.randint(NUM_GOALS, (BATCH,), generator=g)

    def loss_fn(nets):
        aux = ppo.dual_leo_ppo_losses(nets[0], nets[1], teacher, obs, goals, cfg)
        return aux.policy_loss + aux.value_loss, [aux.actor_grads, aux.critic_grads]

    return finite_diff_check([actor, critic], loss_fn, seed=seed)


def _dpg_nets(seed: int):
    g = torch.Generator().manual_seed(seed)
    critic = _net(OBS_DIM + ACTION_DIM, (NUM_GOALS, 1), "sigmoid", seed)
    actor = _net(OBS_DIM, (NUM_GOALS, ACTION_DIM), "tanh", seed + 1)
    obs = torch.randn(BATCH, OBS_DIM, dtype=torch.float64, generator=g)
    return g, critic, actor, obs


def _leo_dpg_critic(seed: int) -> float:
    g, critic, actor, obs = _dpg_nets(seed)
    actions = torch.rand(BATCH, ACTION_DIM, dtype=torch.float64, generator=g) * 2.0 - 1.0
    targets = torch.rand(BATCH, NUM_GOALS, dtype=torch.float64, generator=g)
    return finite_diff_check(critic, lambda p: leo_dpg.critic_loss(p, obs, actions, targets), seed=seed)


def _leo_dpg_actor(seed: int) -> float:
    _, critic, actor, obs = _dpg_nets(seed)
    return finite_diff_check(actor, lambda p: leo_dpg.actor_loss(p, critic, obs), seed=seed)


LOSSES: Dict[str, Callable[[int], float]] = {
    "quadratic": _quadratic,
    "uvfa_q": _uvfa_q,
    "leo_q": _leo_q,
    "leo_q_masked": lambda seed: _leo_q(seed, masked=True),
    "ppo": _ppo,
    "dual_leo_ppo_policy": lambda seed: _dual_leo_ppo(seed, value=False),
    "dual_leo_ppo_value": lambda seed: _dual_leo_ppo(seed, value=True),
    "leo_dpg_critic": _leo_dpg_critic,
    "leo_dpg_actor": _leo_dpg_actor,
}


def run_gradcheck(seed: int = 0, names=None) -> Dict[str, float]:
    """Max relative finite-difference error per loss."""
    names = list(LOSSES) if names is None else list(names)
    errors = {}
    for name in names:
        if name not in LOSSES:
            raise KeyError(f"unknown loss {name!r}, choose from {sorted(LOSSES)}")
        errors[name] = LOSSES[name](seed)
        logger.info(f"gradcheck {name}: max relative error {errors[name]:.3e}")
    return errors

METHOD_LOSSES = {
    "uvfa_pqn": ("uvfa_q",),
    "uvfa_pqn_her": ("uvfa_q",),
    "leo": ("leo_q", "leo_q_masked"),
    "dual_leo_pqn": ("uvfa_q", "leo_q"),
    "ppo": ("ppo",),
    "dual_leo_ppo": ("ppo", "dual_leo_ppo_policy", "dual_leo_ppo_value", "leo_q"),
    "leo_dpg": ("leo_dpg_critic", "leo_dpg_actor"),
}
