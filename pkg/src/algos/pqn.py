"""
Value learning in the PQN style: Q(lambda) targets computed over a rollout segment, networks with
layer norm and no target network, minibatch regression onto gradient-stopped targets.

Two network shapes share the recursion:
  - UVFA: the goal is part of the input (`uvfa_input`), the head is `(1, A)`.
  - LEO: the goal is curried to the output, the head is `(G, A)` and one pass updates every goal.
"""
import logging
from typing import Optional, Tuple

import numpy as np
import torch

from .types import SegmentBatch, uvfa_input
from ..configuration import TrainConfig
from ..model.mlp import NetGrads, NetParams, mlp_apply, mlp_backward, mlp_forward
from ..utils.errors import NumericError, ShapeError

logger = logging.getLogger(__name__)


def q_lambda_targets(
    rewards: torch.Tensor,
    dones: torch.Tensor,
    next_q: torch.Tensor,
    gamma: float,
    lambda_q: float,
) -> torch.Tensor:
    """
    Backward recursion over the leading (time) axis:

        y_t = r_t + gamma * (1 - d_t) * ((1 - lambda) * next_q_t + lambda * y_{t+1})

    anchored with `y_T = next_q_{T-1}` (the max over the bootstrap observation), so the last
    step is a 1-step target. Trailing axes (lanes, goals) are independent channels.
    """

    if rewards.shape != dones.shape or rewards.shape != next_q.shape:
        raise ShapeError(f"rewards {tuple(rewards.shape)}, dones {tuple(dones.shape)} and next_q "
                         f"{tuple(next_q.shape)} must share one shape")

    not_done = 1.0 - dones.to(next_q.dtype)
    rewards = rewards.to(next_q.dtype)
    targets = torch.empty_like(next_q)

    running = next_q[-1]
    for t in reversed(range(rewards.shape[0])):
        running = rewards[t] + gamma * not_done[t] * ((1.0 - lambda_q) * next_q[t] + lambda_q * running)
        targets[t] = running

    return targets


def uvfa_q_targets(
    segment: SegmentBatch,
    params: NetParams,
    cfg: TrainConfig,
    goals: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """
    Q(lambda) targets `[T, B]` for a UVFA network, for the commanded goal of each transition
    (or `goals`, a `[T, B]` relabelling held fixed along each lane). Rewards and dones are
    that goal's channels of the segment.
    """

    if params.num_goals != 1:
        raise ShapeError(f"a UVFA network has a single head, got head shape {params.head_shape}")

    goals = segment.commanded if goals is None else goals
    t, b = goals.shape
    inputs = uvfa_input(segment.flat("next_obs"), goals.reshape(-1), segment.num_goals)
    next_q = mlp_apply(params, inputs)[:, 0, :].max(dim=-1).values.reshape(t, b)

    index = goals.unsqueeze(-1)
    rewards = segment.rewards.gather(-1, index).squeeze(-1)
    dones = segment.dones.gather(-1, index).squeeze(-1)

    return q_lambda_targets(rewards, dones, next_q, cfg.gamma, cfg.lambda_q)


def leo_q_targets(segment: SegmentBatch, params: NetParams, cfg: TrainConfig) -> torch.Tensor:
    """Per-goal Q(lambda) targets `[T, B, G]`, each goal bootstrapping on its own head."""

    if params.num_goals != segment.num_goals:
        raise ShapeError(f"network has {params.num_goals} goal heads, segment carries {segment.num_goals} goals")

    next_q = mlp_apply(params, segment.flat("next_obs")).max(dim=-1).values
    next_q = next_q.reshape(segment.num_steps, segment.num_lanes, segment.num_goals)
    return q_lambda_targets(segment.rewards, segment.dones, next_q, cfg.gamma, cfg.lambda_q)


def _check_loss(loss: torch.Tensor, name: str):
    if not torch.isfinite(loss):
        raise NumericError(f"non-finite {name} loss: {float(loss)}")


def uvfa_q_loss(
    params: NetParams,
    obs: torch.Tensor,
    goals: torch.Tensor,
    actions: torch.Tensor,
    targets: torch.Tensor,
    num_goals: int,
) -> Tuple[float, NetGrads]:
    """Mean squared error between `Q(a | s, g)` and gradient-stopped targets."""

    acts = mlp_forward(params, uvfa_input(obs, goals, num_goals))
    q_all = acts.output[:, 0, :]
    n = q_all.shape[0]
    actions = actions.reshape(-1).long()
    if actions.shape[0] != n or targets.reshape(-1).shape[0] != n:
        raise ShapeError(f"batch of {n} inputs with {actions.shape[0]} actions and {targets.numel()} targets")

    idx = torch.arange(n)
    diff = q_all[idx, actions] - targets.reshape(-1).to(q_all.dtype)
    loss = (diff * diff).mean()
    _check_loss(loss, "uvfa_q")

    grad_output = torch.zeros_like(acts.output)
    grad_output[idx, 0, actions] = 2.0 * diff / n

    return float(loss), mlp_backward(params, acts, grad_output)


def leo_q_loss(
    params: NetParams,
    obs: torch.Tensor,
    actions: torch.Tensor,
    targets: torch.Tensor,
    head_mask: Optional[torch.Tensor] = None,
) -> Tuple[float, NetGrads]:
    """
    All-goals regression with one forward and one backward pass:

        L = 1 / (N * G) * sum_{n, g} m_g * (Q_g(a_n | s_n) - y_{n, g})^2

    `m` is the optional head mask. Masked heads contribute zero while the normalization stays
    N * G, so the masked gradient averaged over masks drawn with keep probability p is p times
    the full gradient.
    """

    acts = mlp_forward(params, obs)
    n, g = acts.output.shape[:2]
    targets = targets.reshape(n, -1)
    if targets.shape[1] != g:
        raise ShapeError(f"network has {g} goal heads, targets cover {targets.shape[1]} goals",
                         layer=len(params.layers) - 1)

    actions = actions.reshape(-1).long()
    q = acts.output[torch.arange(n), :, actions]  # [N, G]
    diff = q - targets.to(q.dtype)

    if head_mask is not None:
        head_mask = torch.as_tensor(head_mask).reshape(-1)
        if head_mask.shape[0] != g:
            raise ShapeError(f"head mask has {head_mask.shape[0]} entries, network has {g} goal heads")
        diff = diff * head_mask.to(diff.dtype)

    loss = (diff * diff).sum() / (n * g)
    _check_loss(loss, "leo_q")

    grad_output = torch.zeros_like(acts.output)
    grad_output[torch.arange(n), :, actions] = 2.0 * diff / (n * g)

    return float(loss), mlp_backward(params, acts, grad_output)


def sample_head_mask(num_goals: int, keep_prob: float, rng: np.random.Generator, mode: str = "bernoulli") -> torch.Tensor:
    """
    Heads updated by a many-goals minibatch: independent Bernoulli(keep_prob) per head, or
    exactly `round(keep_prob * G)` heads (at least one) drawn without replacement.
    """

    if not 0.0 <= keep_prob <= 1.0:
        raise ValueError(f"Invalid keep probability: {keep_prob} - should be in [0.0, 1.0]")

    if mode == "bernoulli":
        mask = rng.random(num_goals) < keep_prob
        if not mask.any():
            logger.warning(f"head mask dropped all {num_goals} heads, this minibatch updates nothing")
    elif mode == "exact":
        k = max(1, int(round(keep_prob * num_goals)))
        mask = np.zeros(num_goals, dtype=bool)
        mask[rng.choice(num_goals, size=k, replace=False)] = True
    else:
        raise ValueError(f"Unknown mask mode: {mode}")

    return torch.from_numpy(mask)


def epsilon_schedule(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear from `eps_start` to `eps_final` over the first `eps_decay_frac` of training, then constant."""
    decay_steps = cfg.eps_decay_frac * total_steps
    if decay_steps <= 0 or step >= decay_steps:
        return cfg.eps_final
    frac = max(step, 0) / decay_steps
    return cfg.eps_start + frac * (cfg.eps_final - cfg.eps_start)


def leo_slice(q_leo: torch.Tensor, goals: torch.Tensor) -> torch.Tensor:
    """Head `goals[b]` of each row of an all-goals output `[B, G, A]`."""
    return q_leo[torch.arange(q_leo.shape[0]), torch.as_tensor(goals).long().reshape(-1)]


def dual_leo_q(
    obs: torch.Tensor,
    goals: torch.Tensor,
    leo_params: NetParams,
    uvfa_params: NetParams,
    cfg: TrainConfig,
    alpha: Optional[float] = None,
) -> torch.Tensor:
    """
    Acting estimates `[B, A]` of a Dual LEO agent for commanded `goals`. `linear` mixes
    `alpha * Q_leo + (1 - alpha) * Q_uvfa`, `max`/`min` take the elementwise extremum.
    """

    alpha = cfg.alpha if alpha is None else alpha
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"Invalid alpha: {alpha} - should be in [0.0, 1.0]")

    goals = torch.as_tensor(goals).long().reshape(-1)
    q_leo = leo_slice(mlp_apply(leo_params, obs), goals)
    q_uvfa = mlp_apply(uvfa_params, uvfa_input(obs, goals, leo_params.num_goals))[:, 0, :]

    if cfg.acting_mode == "linear":
        return alpha * q_leo + (1.0 - alpha) * q_uvfa
    if cfg.acting_mode == "max":
        return torch.maximum(q_leo, q_uvfa)
    if cfg.acting_mode == "min":
        return torch.minimum(q_leo, q_uvfa)
    raise ValueError(f"Unknown acting mode: {cfg.acting_mode}")


def greedy_actions(q: torch.Tensor) -> np.ndarray:
    """Argmax over the last axis, ties broken towards the lowest action index."""
    return np.argmax(q.detach().cpu().numpy(), axis=-1).astype(np.int64)


def epsilon_greedy(q: torch.Tensor, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    actions = greedy_actions(q)
    if epsilon > 0.0:
        explore = rng.random(actions.shape[0]) < epsilon
        random_actions = rng.integers(q.shape[-1], size=actions.shape[0])
        actions = np.where(explore, random_actions, actions)
    return actions
