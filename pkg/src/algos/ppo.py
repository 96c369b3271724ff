"""
PPO with a goal-conditioned actor-critic, and the Dual LEO cloning losses that pull it towards a
LEO teacher. Both networks take `obs ++ one_hot(goal)`: the actor outputs logits `(1, A)`, the
critic a sigmoid-bounded value `(1, 1)`. Gradients w.r.t. logits and values are written out and
pushed through `mlp_backward`.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import torch

from .pqn import leo_slice
from .types import SegmentBatch, uvfa_input
from ..configuration import TrainConfig
from ..model.mlp import NetGrads, NetParams, mlp_apply, mlp_backward, mlp_forward
from ..utils.adam import Adam
from ..utils.errors import NumericError, ShapeError

logger = logging.getLogger(__name__)


def gae(
    rewards: torch.Tensor,
    values: torch.Tensor,
    next_values: torch.Tensor,
    dones: torch.Tensor,
    gamma: float,
    gae_lambda: float,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Generalized advantage estimation over the leading (time) axis. `next_values[t]` is the value
    of the state entered by transition `t` under the goal commanded at `t`.

        delta_t = r_t + gamma * (1 - d_t) * V'_t - V_t
        A_t = delta_t + gamma * lambda * (1 - d_t) * A_{t+1}

    Returns `(advantages, returns = advantages + values)`.
    """

    not_done = 1.0 - dones.to(values.dtype)
    advantages = torch.zeros_like(values)
    last = torch.zeros_like(values[0])
    for t in reversed(range(values.shape[0])):
        delta = rewards[t] + gamma * not_done[t] * next_values[t] - values[t]
        last = delta + gamma * gae_lambda * not_done[t] * last
        advantages[t] = last
    return advantages, advantages + values


def _log_softmax(logits: torch.Tensor) -> torch.Tensor:
    return logits - torch.logsumexp(logits, dim=-1, keepdim=True)


def policy_log_probs(actor: NetParams, inputs: torch.Tensor, actions: torch.Tensor) -> torch.Tensor:
    logits = mlp_apply(actor, inputs)[:, 0, :]
    return _log_softmax(logits)[torch.arange(logits.shape[0]), actions.long()]


@dataclass
class PpoLossOutput:
    loss: float
    policy_loss: float
    value_loss: float
    entropy: float
    actor_grads: NetGrads
    critic_grads: NetGrads
    ratio: torch.Tensor
    values: torch.Tensor
    logits: torch.Tensor = None


def ppo_losses(
    actor: NetParams,
    critic: NetParams,
    inputs: torch.Tensor,
    actions: torch.Tensor,
    old_log_probs: torch.Tensor,
    advantages: torch.Tensor,
    returns: torch.Tensor,
    cfg: TrainConfig,
) -> PpoLossOutput:
    """
    Clipped surrogate with entropy bonus, and the value regression:

        L = -mean(min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)) - ent_coef * mean(H)
            + vf_coef * 0.5 * mean((V - R)^2)
    """

    if critic.head_shape != (1, 1):
        raise ShapeError(f"critic head must be (1, 1), got {critic.head_shape}")

    actor_acts = mlp_forward(actor, inputs)
    critic_acts = mlp_forward(critic, inputs)

    logits = actor_acts.output[:, 0, :]
    n, a_len = logits.shape
    dtype = logits.dtype
    idx = torch.arange(n)
    actions = actions.reshape(-1).long()
    advantages = advantages.reshape(-1).to(dtype)
    returns = returns.reshape(-1).to(dtype)

    log_p = _log_softmax(logits)
    p = log_p.exp()
    log_ratio = log_p[idx, actions] - old_log_probs.reshape(-1).to(dtype)
    ratio = log_ratio.exp()
    if not torch.isfinite(ratio).all():
        bad = int((~torch.isfinite(ratio)).sum())
        raise NumericError(f"non-finite PPO ratio for {bad}/{n} transitions "
                           f"(max |log ratio| {float(log_ratio.abs().nan_to_num(float('inf')).max()):.3e}, "
                           f"logits finite: {bool(torch.isfinite(logits).all())})")

    clipped_ratio = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
    unclipped, clipped = ratio * advantages, clipped_ratio * advantages
    surrogate = torch.minimum(unclipped, clipped)
    policy_loss = -surrogate.mean()

    entropy = -(p * log_p).sum(dim=-1)
    value = critic_acts.output[:, 0, 0]
    value_diff = value - returns
    value_loss = 0.5 * (value_diff * value_diff).mean()

    loss = policy_loss - cfg.ent_coef * entropy.mean() + cfg.vf_coef * value_loss
    if not torch.isfinite(loss):
        raise NumericError(f"non-finite PPO loss: {float(loss)}")

    # d surrogate / d rho is A where the unclipped branch is active or the clip does not bind
    in_range = (ratio >= 1.0 - cfg.clip_eps) & (ratio <= 1.0 + cfg.clip_eps)
    d_ratio = torch.where((unclipped <= clipped) | in_range, advantages, torch.zeros_like(advantages))
    one_hot = torch.zeros_like(p)
    one_hot[idx, actions] = 1.0
    d_logits = -(d_ratio * ratio / n).unsqueeze(-1) * (one_hot - p)
    d_logits = d_logits + (cfg.ent_coef / n) * p * (log_p + entropy.unsqueeze(-1))

    d_value = cfg.vf_coef * value_diff / n

    actor_grads = mlp_backward(actor, actor_acts, d_logits.unsqueeze(1))
    critic_grads = mlp_backward(critic, critic_acts, d_value.reshape(n, 1, 1))

    return PpoLossOutput(float(loss), float(policy_loss), float(value_loss), float(entropy.mean()),
                         actor_grads, critic_grads, ratio.detach(), value.detach(), logits.detach())


@dataclass
class AuxLosses:
    policy_loss: float
    value_loss: float
    actor_grads: NetGrads
    critic_grads: NetGrads


def dual_leo_ppo_losses(
    actor: NetParams,
    critic: NetParams,
    leo_params: NetParams,
    obs: torch.Tensor,
    goals: torch.Tensor,
    cfg: TrainConfig,
    scale: float = 1.0,
) -> AuxLosses:
    """
    Cloning losses towards a LEO teacher, which receives no gradient:

        policy: pc_coef * scale * mean(-log pi(argmax_a Q_leo(s, g, a) | s, g))
        value:  vc_coef * scale * mean((V(s, g) - max_a Q_leo(s, g, a))^2)

    `scale` carries the linear annealing of both coefficients.
    """

    goals = torch.as_tensor(goals).long().reshape(-1)
    q_leo = leo_slice(mlp_apply(leo_params, obs), goals).to(actor.dtype)
    teacher_actions = torch.from_numpy(np.argmax(q_leo.numpy(), axis=-1))
    teacher_values = q_leo.max(dim=-1).values

    inputs = uvfa_input(obs, goals, leo_params.num_goals)
    actor_acts = mlp_forward(actor, inputs)
    critic_acts = mlp_forward(critic, inputs)

    logits = actor_acts.output[:, 0, :]
    n = logits.shape[0]
    idx = torch.arange(n)
    log_p = _log_softmax(logits)

    pc = cfg.pc_coef * scale
    vc = cfg.vc_coef * scale

    policy_loss = -pc * log_p[idx, teacher_actions].mean()
    value_diff = critic_acts.output[:, 0, 0] - teacher_values
    value_loss = vc * (value_diff * value_diff).mean()

    one_hot = torch.zeros_like(logits)
    one_hot[idx, teacher_actions] = 1.0
    d_logits = (pc / n) * (log_p.exp() - one_hot)
    d_value = (2.0 * vc / n) * value_diff

    return AuxLosses(
        float(policy_loss),
        float(value_loss),
        mlp_backward(actor, actor_acts, d_logits.unsqueeze(1)),
        mlp_backward(critic, critic_acts, d_value.reshape(n, 1, 1)),
    )


def ppo_update(
    segment: SegmentBatch,
    actor: NetParams,
    critic: NetParams,
    actor_opt: Adam,
    critic_opt: Adam,
    cfg: TrainConfig,
    rng: np.random.Generator,
    lr: Optional[float] = None,
    leo_params: Optional[NetParams] = None,
    clone_scale: float = 1.0,
) -> Tuple[NetParams, NetParams, Dict[str, float]]:
    """
    `num_epochs` passes of `num_minibatches` minibatches over one segment. GAE is computed once
    from the values recorded during the rollout; advantages are normalized per minibatch. With
    `leo_params` the Dual LEO cloning losses are added.
    """

    if segment.log_probs is None or segment.values is None:
        raise ShapeError("PPO needs the log-probabilities and values recorded during the rollout")

    g_len = segment.num_goals
    commanded = segment.commanded
    with torch.no_grad():
        next_inputs = uvfa_input(segment.flat("next_obs"), commanded.reshape(-1), g_len)
        next_values = mlp_apply(critic, next_inputs)[:, 0, 0].reshape(commanded.shape)
    advantages, returns = gae(segment.commanded_rewards(), segment.values, next_values,
                              segment.commanded_dones(), cfg.gamma, cfg.gae_lambda)

    obs = segment.flat("obs")
    goals = commanded.reshape(-1)
    inputs = uvfa_input(obs, goals, g_len)
    actions = segment.flat("actions")
    old_log_probs = segment.flat("log_probs")
    advantages, returns = advantages.reshape(-1), returns.reshape(-1)

    n = inputs.shape[0]
    initial_ratio = (policy_log_probs(actor, inputs, actions) - old_log_probs).exp()
    stats = {"initial_ratio_max_dev": float((initial_ratio - 1.0).abs().max())}
    sums = {"loss": 0.0, "policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "clip_frac": 0.0,
            "aux_policy_loss": 0.0, "aux_value_loss": 0.0}
    count = 0

    for _ in range(cfg.num_epochs):
        perm = torch.from_numpy(rng.permutation(n))
        for mb in torch.tensor_split(perm, cfg.num_minibatches):
            if mb.numel() == 0:
                continue
            adv = advantages[mb]
            adv = (adv - adv.mean()) / (adv.std(unbiased=False) + 1e-8)

            out = ppo_losses(actor, critic, inputs[mb], actions[mb], old_log_probs[mb], adv, returns[mb], cfg)
            actor_grads, critic_grads = out.actor_grads, out.critic_grads

            if leo_params is not None:
                aux = dual_leo_ppo_losses(actor, critic, leo_params, obs[mb], goals[mb], cfg, clone_scale)
                actor_grads = actor_grads + aux.actor_grads
                critic_grads = critic_grads + aux.critic_grads
                sums["aux_policy_loss"] += aux.policy_loss
                sums["aux_value_loss"] += aux.value_loss

            actor = actor_opt.step(actor, actor_grads.clip(cfg.max_grad_norm), lr)
            critic = critic_opt.step(critic, critic_grads.clip(cfg.max_grad_norm), lr)

            sums["loss"] += out.loss
            sums["policy_loss"] += out.policy_loss
            sums["value_loss"] += out.value_loss
            sums["entropy"] += out.entropy
            sums["clip_frac"] += float(((out.ratio - 1.0).abs() > cfg.clip_eps).float().mean())
            count += 1

    stats.update({k: v / max(count, 1) for k, v in sums.items()})
    logger.debug(f"ppo update: {stats}")
    return actor, critic, stats


def sample_actions(logits: torch.Tensor, rng: np.random.Generator, greedy: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Categorical draws from `[B, A]` logits with a numpy generator. Returns `(actions, log_probs)`."""

    log_p = _log_softmax(logits).numpy()
    if greedy:
        actions = np.argmax(log_p, axis=-1)
    else:
        cdf = np.cumsum(np.exp(log_p), axis=-1)
        u = rng.random(log_p.shape[0])[:, None] * cdf[:, -1:]
        actions = np.minimum((u > cdf).sum(axis=-1), log_p.shape[-1] - 1)
    return actions.astype(np.int64), log_p[np.arange(log_p.shape[0]), actions].astype(np.float32)
