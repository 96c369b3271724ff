import math

import numpy as np
import pytest
import torch

from src.algos.gradcheck_suite import LOSSES, METHOD_LOSSES, THRESHOLD, run_gradcheck
from src.algos.leo_dpg import ContinuousBatch, actor_loss, critic_loss, critic_targets, explore_actions, leo_dpg_update
from src.configuration import METHODS, TrainConfig
from src.model.mlp import NetGrads, init_mlp, mlp_forward
from src.utils.adam import Adam
from src.utils.errors import ShapeError

OBS_DIM, ACTION_DIM, NUM_GOALS = 4, 2, 5


def _nets(dtype=torch.float32):
    critic = init_mlp(OBS_DIM + ACTION_DIM, [16], (NUM_GOALS, 1), seed=0, dtype=dtype)
    actor = init_mlp(OBS_DIM, [16], (NUM_GOALS, ACTION_DIM), output_activation="tanh", seed=1, dtype=dtype)
    return critic, actor


def _batch(n=12, seed=0, done_prob=0.2):
    gen = torch.Generator().manual_seed(seed)
    return ContinuousBatch(
        obs=torch.randn(n, OBS_DIM, generator=gen),
        actions=torch.rand(n, ACTION_DIM, generator=gen) * 2.0 - 1.0,
        rewards=(torch.rand(n, NUM_GOALS, generator=gen) < 0.2).float(),
        dones=torch.rand(n, NUM_GOALS, generator=gen) < done_prob,
        next_obs=torch.randn(n, OBS_DIM, generator=gen),
    )


def test_critic_targets():
    critic, actor = _nets()
    batch = _batch()
    targets = critic_targets(critic, actor, batch, 0.9)
    assert targets.shape == (12, NUM_GOALS)

    # goal g bootstraps on head g at the action proposed for goal g
    next_actions = mlp_forward(actor, batch.next_obs).output
    for g in range(NUM_GOALS):
        q = mlp_forward(critic, torch.cat([batch.next_obs, next_actions[:, g]], dim=-1)).output[:, g, 0]
        expected = batch.rewards[:, g] + 0.9 * (~batch.dones[:, g]).float() * q
        assert torch.allclose(targets[:, g], expected, atol=1e-6, rtol=0.0)

    terminal = _batch(done_prob=1.0)
    assert torch.equal(critic_targets(critic, actor, terminal, 0.9), terminal.rewards)


def test_actor_loss_matches_autograd():
    critic, actor = _nets(torch.float64)
    obs = torch.randn(7, OBS_DIM, dtype=torch.float64)

    loss, grads = actor_loss(actor, critic, obs)

    leaves = [b.clone().requires_grad_() for b in actor.blocks()]
    proposals = mlp_forward(actor.with_blocks(leaves), obs).output
    q = torch.stack([mlp_forward(critic, torch.cat([obs, proposals[:, g]], dim=-1)).output[:, g, 0]
                     for g in range(NUM_GOALS)], dim=-1)
    ref = -q.mean()
    ref.backward()

    assert abs(loss - float(ref)) < 1e-12
    for g, leaf in zip(grads.blocks, leaves):
        assert torch.allclose(g, leaf.grad, atol=1e-12, rtol=0.0)


def test_critic_loss_matches_autograd():
    critic, _ = _nets(torch.float64)
    obs = torch.randn(7, OBS_DIM, dtype=torch.float64)
    actions = torch.rand(7, ACTION_DIM, dtype=torch.float64)
    targets = torch.rand(7, NUM_GOALS, dtype=torch.float64)

    loss, grads = critic_loss(critic, obs, actions, targets)

    leaves = [b.clone().requires_grad_() for b in critic.blocks()]
    q = mlp_forward(critic.with_blocks(leaves), torch.cat([obs, actions], dim=-1)).output[:, :, 0]
    ref = ((q - targets) ** 2).mean()
    ref.backward()

    assert abs(loss - float(ref)) < 1e-12
    for g, leaf in zip(grads.blocks, leaves):
        assert torch.allclose(g, leaf.grad, atol=1e-12, rtol=0.0)


def test_shape_errors():
    critic, actor = _nets()
    batch = _batch()
    with pytest.raises(ShapeError):
        critic_targets(init_mlp(OBS_DIM + ACTION_DIM, [16], (NUM_GOALS, 2), seed=0), actor, batch, 0.9)
    with pytest.raises(ShapeError):
        critic_targets(init_mlp(OBS_DIM + 3, [16], (NUM_GOALS, 1), seed=0), actor, batch, 0.9)
    with pytest.raises(ShapeError):
        critic_loss(critic, batch.obs, torch.zeros(12, 3), torch.zeros(12, NUM_GOALS))

    wrong_goals = ContinuousBatch(batch.obs, batch.actions, batch.rewards[:, :3], batch.dones[:, :3], batch.next_obs)
    with pytest.raises(ShapeError):
        leo_dpg_update(wrong_goals, critic, actor, Adam(critic), Adam(actor), TrainConfig())


def test_leo_dpg_update():
    critic, actor = _nets()
    new_critic, new_actor, stats = leo_dpg_update(_batch(), critic, actor, Adam(critic, lr=1e-3),
                                                  Adam(actor, lr=1e-3), TrainConfig())
    assert set(stats) == {"critic_loss", "actor_loss"}
    assert all(math.isfinite(v) for v in stats.values())
    assert not torch.equal(new_critic.blocks()[0], critic.blocks()[0])
    assert not torch.equal(new_actor.blocks()[0], actor.blocks()[0])


def test_explore_actions():
    _, actor = _nets()
    obs = torch.randn(6, OBS_DIM)
    goals = np.array([0, 1, 4, 4, 2, 3])
    rng = np.random.default_rng(0)

    greedy = explore_actions(actor, obs, goals, 0.0, rng)
    proposals = mlp_forward(actor, obs).output
    assert np.allclose(greedy, proposals[np.arange(6), goals].detach().numpy())

    noisy = explore_actions(actor, obs, goals, 10.0, rng)
    assert noisy.shape == (6, ACTION_DIM) and noisy.dtype == np.float32
    assert (np.abs(noisy) <= 1.0).all()
    assert (np.abs(noisy) == 1.0).any()


@pytest.mark.parametrize("seed", [0, 1])
def test_gradcheck_suite(seed):
    errors = run_gradcheck(seed)
    assert set(errors) == set(LOSSES)
    for name, err in errors.items():
        assert err < THRESHOLD, f"{name}: relative error {err:.3e}"


def test_method_losses():
    assert set(METHOD_LOSSES) == set(METHODS)
    assert all(name in LOSSES for names in METHOD_LOSSES.values() for name in names)
    with pytest.raises(KeyError):
        run_gradcheck(0, ["cross_entropy"])


def _scalar_ddpg_update(critic, actor, batch, cfg):
    """Single-goal DDPG written directly with autograd: one critic step, then one actor step on the new critic."""

    def q(params, obs, actions):
        return mlp_forward(params, torch.cat([obs, actions], dim=-1)).output[:, 0, 0]

    with torch.no_grad():
        next_actions = mlp_forward(actor, batch.next_obs).output[:, 0]
        bootstrap = q(critic, batch.next_obs, next_actions)
        target = batch.rewards[:, 0] + cfg.gamma * (~batch.dones[:, 0]).double() * bootstrap

    leaves = [b.clone().requires_grad_() for b in critic.blocks()]
    critic_loss_ = ((q(critic.with_blocks(leaves), batch.obs, batch.actions) - target) ** 2).mean()
    critic_loss_.backward()
    critic = Adam(critic, lr=1e-3).step(critic, NetGrads(tuple(x.grad for x in leaves)).clip(cfg.max_grad_norm))

    leaves = [b.clone().requires_grad_() for b in actor.blocks()]
    proposals = mlp_forward(actor.with_blocks(leaves), batch.obs).output[:, 0]
    actor_loss_ = -q(critic, batch.obs, proposals).mean()
    actor_loss_.backward()
    actor = Adam(actor, lr=1e-3).step(actor, NetGrads(tuple(x.grad for x in leaves)).clip(cfg.max_grad_norm))

    return critic, actor, float(target.sum()), float(critic_loss_), float(actor_loss_)


def test_single_goal_reduces_to_ddpg():
    critic = init_mlp(OBS_DIM + ACTION_DIM, [16], (1, 1), seed=0, dtype=torch.float64)
    actor = init_mlp(OBS_DIM, [16], (1, ACTION_DIM), output_activation="tanh", seed=1, dtype=torch.float64)
    gen = torch.Generator().manual_seed(3)
    batch = ContinuousBatch(
        obs=torch.randn(16, OBS_DIM, generator=gen, dtype=torch.float64),
        actions=torch.rand(16, ACTION_DIM, generator=gen, dtype=torch.float64) * 2.0 - 1.0,
        rewards=(torch.rand(16, 1, generator=gen, dtype=torch.float64) < 0.3).double(),
        dones=torch.rand(16, 1, generator=gen) < 0.2,
        next_obs=torch.randn(16, OBS_DIM, generator=gen, dtype=torch.float64),
    )
    cfg = TrainConfig(gamma=0.95)

    ref_critic, ref_actor, target_sum, ref_critic_loss, ref_actor_loss = _scalar_ddpg_update(critic, actor, batch, cfg)
    assert float(critic_targets(critic, actor, batch, cfg.gamma).sum()) == pytest.approx(target_sum, abs=1e-12)

    new_critic, new_actor, stats = leo_dpg_update(batch, critic, actor, Adam(critic, lr=1e-3),
                                                  Adam(actor, lr=1e-3), cfg)
    assert stats["critic_loss"] == pytest.approx(ref_critic_loss, abs=1e-12)
    assert stats["actor_loss"] == pytest.approx(ref_actor_loss, abs=1e-12)
    for got, ref in zip(new_critic.blocks() + new_actor.blocks(), ref_critic.blocks() + ref_actor.blocks()):
        assert torch.allclose(got, ref, atol=1e-10, rtol=0.0)
