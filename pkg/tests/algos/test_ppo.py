import math

import numpy as np
import pytest
import torch

from src.algos.ppo import dual_leo_ppo_losses, gae, policy_log_probs, ppo_losses, ppo_update, sample_actions
from src.algos.types import uvfa_input
from src.configuration import TrainConfig
from src.model.mlp import init_mlp
from src.utils.adam import Adam
from src.utils.errors import ShapeError


def test_gae():
    rewards = torch.tensor([0.0, 1.0], dtype=torch.float64)
    values = torch.tensor([0.5, 0.6], dtype=torch.float64)
    next_values = torch.tensor([0.6, 0.9], dtype=torch.float64)
    dones = torch.tensor([False, True])

    advantages, returns = gae(rewards, values, next_values, dones, 0.9, 0.8)
    assert torch.allclose(advantages, torch.tensor([0.328, 0.4], dtype=torch.float64), atol=1e-12, rtol=0.0)
    assert torch.allclose(returns, torch.tensor([0.828, 1.0], dtype=torch.float64), atol=1e-12, rtol=0.0)


def test_gae_lambda_zero_is_one_step():
    gen = torch.Generator().manual_seed(0)
    rewards = torch.rand(5, 3, generator=gen, dtype=torch.float64)
    values = torch.rand(5, 3, generator=gen, dtype=torch.float64)
    next_values = torch.rand(5, 3, generator=gen, dtype=torch.float64)
    dones = torch.rand(5, 3, generator=gen) < 0.3

    advantages, _ = gae(rewards, values, next_values, dones, 0.99, 0.0)
    expected = rewards + 0.99 * (~dones).double() * next_values - values
    assert torch.allclose(advantages, expected, atol=1e-12, rtol=0.0)


def _nets(g=4, a=3, d=6):
    actor = init_mlp(d + g, [16], (1, a), output_activation="none", seed=0, dtype=torch.float64)
    critic = init_mlp(d + g, [16], (1, 1), seed=1, dtype=torch.float64)
    return actor, critic


def test_ppo_loss_at_unit_ratio():
    torch.manual_seed(0)
    actor, critic = _nets()
    inputs = uvfa_input(torch.randn(10, 6, dtype=torch.float64), torch.randint(4, (10,)), 4)
    actions = torch.randint(3, (10,))
    advantages = torch.randn(10, dtype=torch.float64)
    returns = torch.rand(10, dtype=torch.float64)
    cfg = TrainConfig(ent_coef=0.0, vf_coef=0.0)

    out = ppo_losses(actor, critic, inputs, actions, policy_log_probs(actor, inputs, actions), advantages, returns, cfg)
    assert torch.allclose(out.ratio, torch.ones(10, dtype=torch.float64), atol=1e-12)
    assert out.policy_loss == pytest.approx(-float(advantages.mean()), abs=1e-12)
    assert out.loss == pytest.approx(out.policy_loss, abs=1e-12)
    assert out.entropy <= math.log(3) + 1e-9
    assert all(torch.equal(g, torch.zeros_like(g)) for g in out.critic_grads.blocks)


def test_ppo_loss_rejects_bad_critic():
    actor, _ = _nets()
    critic = init_mlp(10, [16], (1, 2), seed=1, dtype=torch.float64)
    inputs = torch.randn(4, 10, dtype=torch.float64)
    with pytest.raises(ShapeError):
        ppo_losses(actor, critic, inputs, torch.zeros(4, dtype=torch.int64), torch.zeros(4), torch.zeros(4),
                   torch.zeros(4), TrainConfig())


def test_dual_leo_cloning_scale():
    torch.manual_seed(0)
    actor, critic = _nets()
    teacher = init_mlp(6, [16], (4, 3), seed=2, dtype=torch.float64)
    obs = torch.randn(8, 6, dtype=torch.float64)
    goals = torch.randint(4, (8,))
    cfg = TrainConfig(pc_coef=0.1, vc_coef=0.5)

    aux = dual_leo_ppo_losses(actor, critic, teacher, obs, goals, cfg)
    assert aux.policy_loss > 0.0 and aux.value_loss > 0.0

    half = dual_leo_ppo_losses(actor, critic, teacher, obs, goals, cfg, scale=0.5)
    assert half.policy_loss == pytest.approx(0.5 * aux.policy_loss)
    assert half.value_loss == pytest.approx(0.5 * aux.value_loss)

    off = dual_leo_ppo_losses(actor, critic, teacher, obs, goals, cfg, scale=0.0)
    assert off.policy_loss == 0.0 and off.value_loss == 0.0
    assert all(torch.equal(g, torch.zeros_like(g)) for g in off.actor_grads.blocks + off.critic_grads.blocks)


@pytest.mark.parametrize("with_teacher", [False, True])
def test_ppo_update(make_segment, with_teacher):
    segment = make_segment(t=8, b=4, g=5, num_actions=4, with_ppo=True)
    cfg = TrainConfig(num_minibatches=4, num_epochs=2, lr=1e-3)
    actor = init_mlp(6 + 5, [16], (1, 4), output_activation="none", seed=0)
    critic = init_mlp(6 + 5, [16], (1, 1), seed=1)
    teacher = init_mlp(6, [16], (5, 4), seed=2) if with_teacher else None

    new_actor, new_critic, stats = ppo_update(segment, actor, critic, Adam(actor, lr=1e-3), Adam(critic, lr=1e-3),
                                              cfg, np.random.default_rng(0), leo_params=teacher)

    assert not torch.equal(new_actor.blocks()[0], actor.blocks()[0])
    assert not torch.equal(new_critic.blocks()[0], critic.blocks()[0])
    assert all(math.isfinite(v) for v in stats.values())
    assert 0.0 <= stats["clip_frac"] <= 1.0
    assert (stats["aux_policy_loss"] > 0.0) == with_teacher


def test_ppo_update_needs_rollout_statistics(make_segment):
    actor, critic = _nets(g=5, a=4)
    with pytest.raises(ShapeError):
        ppo_update(make_segment(), actor, critic, Adam(actor), Adam(critic), TrainConfig(), np.random.default_rng(0))


def test_sample_actions():
    logits = torch.log(torch.tensor([[0.7, 0.2, 0.1]])).expand(4000, 3).contiguous()
    actions, log_probs = sample_actions(logits, np.random.default_rng(0))

    freq = np.bincount(actions, minlength=3) / actions.shape[0]
    assert np.allclose(freq, [0.7, 0.2, 0.1], atol=0.03)
    assert np.allclose(log_probs, np.log(np.array([0.7, 0.2, 0.1]))[actions], atol=1e-5)

    greedy, _ = sample_actions(logits[:2], np.random.default_rng(0), greedy=True)
    assert greedy.tolist() == [0, 0]
