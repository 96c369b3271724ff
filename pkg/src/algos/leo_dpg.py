"""
All-goals deterministic policy gradient for continuous actions.

The actor `pi: obs -> [G, action_dim]` (tanh) proposes one action per goal, the critic
`Q: obs ++ action -> [G, 1]` (sigmoid) scores an action for every goal at once. Pairs
`(s, pi_g(s))` are evaluated by stacking the `G` candidate actions of a state into one batch
and reading the diagonal (candidate `g` scored by head `g`).
"""
import logging
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
import torch

from ..configuration import TrainConfig
from ..model.mlp import NetGrads, NetParams, mlp_apply, mlp_backward, mlp_forward
from ..utils.adam import Adam
from ..utils.errors import NumericError, ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContinuousBatch:
    obs: torch.Tensor  # [N, D]
    actions: torch.Tensor  # [N, action_dim]
    rewards: torch.Tensor  # [N, G]
    dones: torch.Tensor  # bool [N, G]
    next_obs: torch.Tensor  # [N, D]


def _check_shapes(q_params: NetParams, pi_params: NetParams, obs_dim: int):
    g_len, action_dim = pi_params.head_shape
    if q_params.head_shape != (g_len, 1):
        raise ShapeError(f"critic head must be ({g_len}, 1), got {q_params.head_shape}")
    if q_params.in_dim != obs_dim + action_dim:
        raise ShapeError(f"critic takes {q_params.in_dim} inputs, expected obs_dim + action_dim = "
                         f"{obs_dim} + {action_dim}", layer=0)


def _pair_inputs(obs: torch.Tensor, per_goal_actions: torch.Tensor) -> torch.Tensor:
    """`[N * G, D + action_dim]`: every state repeated once per goal, with that goal's action."""
    n, g_len, action_dim = per_goal_actions.shape
    states = obs.unsqueeze(1).expand(n, g_len, obs.shape[-1])
    return torch.cat([states, per_goal_actions.to(obs.dtype)], dim=-1).reshape(n * g_len, -1)


def _diagonal(q_out: torch.Tensor, n: int, g_len: int) -> torch.Tensor:
    q = q_out.reshape(n, g_len, g_len)  # [state, candidate, head]
    return torch.diagonal(q, dim1=1, dim2=2)


def critic_targets(q_params: NetParams, pi_params: NetParams, batch: ContinuousBatch, gamma: float) -> torch.Tensor:
    """`y_g = r_g + gamma * (1 - d_g) * Q_g(s', pi_g(s'))`, gradient-free, `[N, G]`."""

    _check_shapes(q_params, pi_params, batch.next_obs.shape[-1])
    n, g_len = batch.next_obs.shape[0], pi_params.num_goals
    next_actions = mlp_apply(pi_params, batch.next_obs)
    next_q = _diagonal(mlp_apply(q_params, _pair_inputs(batch.next_obs.to(q_params.dtype), next_actions)), n, g_len)
    not_done = 1.0 - batch.dones.to(next_q.dtype)
    return batch.rewards.to(next_q.dtype) + gamma * not_done * next_q


def critic_loss(q_params: NetParams, obs: torch.Tensor, actions: torch.Tensor, targets: torch.Tensor) -> Tuple[float, NetGrads]:
    """Every head scores the shared behavior action: `mean_{n,g} (Q_g(s, a) - y_g)^2`, one backward pass."""

    if actions.dim() != 2 or actions.shape[1] + obs.shape[1] != q_params.in_dim:
        raise ShapeError(f"critic takes {q_params.in_dim} inputs, got obs {tuple(obs.shape)} and actions "
                         f"{tuple(actions.shape)}", layer=0)

    acts = mlp_forward(q_params, torch.cat([obs, actions.to(obs.dtype)], dim=-1))
    q = acts.output[:, :, 0]
    n, g_len = q.shape
    diff = q - targets.to(q.dtype)
    loss = (diff * diff).mean()
    if not torch.isfinite(loss):
        raise NumericError(f"non-finite LEO-DPG critic loss: {float(loss)}")

    grads = mlp_backward(q_params, acts, (2.0 * diff / (n * g_len)).unsqueeze(-1))
    return float(loss), NetGrads(grads.blocks)


def actor_loss(pi_params: NetParams, q_params: NetParams, obs: torch.Tensor) -> Tuple[float, NetGrads]:
    """
    `L = -mean_{n,g} Q_g(s, pi_g(s))`. Each goal's gradient runs through the critic along its own
    candidate action; the `G` paths share one batched backward through the critic (whose
    parameter gradients are discarded) and one backward through the actor.
    """

    _check_shapes(q_params, pi_params, obs.shape[-1])
    n, (g_len, action_dim) = obs.shape[0], pi_params.head_shape

    pi_acts = mlp_forward(pi_params, obs)
    q_acts = mlp_forward(q_params, _pair_inputs(obs.to(q_params.dtype), pi_acts.output))
    q = _diagonal(q_acts.output, n, g_len)
    loss = -q.mean()
    if not torch.isfinite(loss):
        raise NumericError(f"non-finite LEO-DPG actor loss: {float(loss)}")

    grad_q = torch.zeros(n, g_len, g_len, dtype=q_acts.output.dtype)
    grad_q[:, torch.arange(g_len), torch.arange(g_len)] = -1.0 / (n * g_len)
    q_grads = mlp_backward(q_params, q_acts, grad_q.reshape(n * g_len, g_len, 1))

    d_actions = q_grads.input[:, -action_dim:].reshape(n, g_len, action_dim)
    pi_grads = mlp_backward(pi_params, pi_acts, d_actions.to(pi_params.dtype))
    return float(loss), NetGrads(pi_grads.blocks)


def leo_dpg_update(
    batch: ContinuousBatch,
    q_params: NetParams,
    pi_params: NetParams,
    q_opt: Adam,
    pi_opt: Adam,
    cfg: TrainConfig,
    lr: float = None,
) -> Tuple[NetParams, NetParams, Dict[str, float]]:
    """One critic step on all-goals targets, then one actor step against the updated critic."""

    if batch.actions.shape[-1] != pi_params.head_dim:
        raise ShapeError(f"batch actions have dimension {batch.actions.shape[-1]}, actor outputs {pi_params.head_dim}")
    if batch.rewards.shape[-1] != pi_params.num_goals:
        raise ShapeError(f"batch carries {batch.rewards.shape[-1]} goals, actor has {pi_params.num_goals} heads")

    targets = critic_targets(q_params, pi_params, batch, cfg.gamma)
    q_loss, q_grads = critic_loss(q_params, batch.obs, batch.actions, targets)
    q_params = q_opt.step(q_params, q_grads.clip(cfg.max_grad_norm), lr)

    pi_loss, pi_grads = actor_loss(pi_params, q_params, batch.obs)
    pi_params = pi_opt.step(pi_params, pi_grads.clip(cfg.max_grad_norm), lr)

    return q_params, pi_params, {"critic_loss": q_loss, "actor_loss": pi_loss}


def explore_actions(pi_params: NetParams, obs: torch.Tensor, goals: np.ndarray, noise: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Commanded-goal action plus Gaussian noise, clipped to [-1, 1]."""
    actions = mlp_apply(pi_params, obs)[torch.arange(obs.shape[0]), torch.as_tensor(goals).long()].numpy()
    if noise > 0.0:
        actions = actions + noise * rng.standard_normal(actions.shape)
    return np.clip(actions, -1.0, 1.0).astype(np.float32)
