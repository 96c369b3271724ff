import pytest
import torch

from src.algos.types import SegmentBatch


@pytest.fixture
def make_segment():
    """Random segment whose rewards and dones follow the achievement mask."""

    def factory(t=4, b=3, g=5, d=6, num_actions=4, seed=0, p_achieved=0.2, p_reset=0.1, with_ppo=False):
        gen = torch.Generator().manual_seed(seed)
        achieved = torch.rand(t, b, g, generator=gen) < p_achieved
        episode_dones = torch.rand(t, b, generator=gen) < p_reset
        commanded = torch.randint(g, (t, b), generator=gen)
        dones = achieved | episode_dones.unsqueeze(-1)
        extras = {}
        if with_ppo:
            extras = {"log_probs": torch.log(torch.full((t, b), 1.0 / num_actions)),
                      "values": torch.rand(t, b, generator=gen)}
        return SegmentBatch(
            obs=torch.randn(t, b, d, generator=gen),
            actions=torch.randint(num_actions, (t, b), generator=gen),
            commanded=commanded,
            achieved=achieved,
            rewards=achieved.float(),
            dones=dones,
            episode_dones=episode_dones,
            commanded_done=dones.gather(-1, commanded.unsqueeze(-1)).squeeze(-1),
            next_obs=torch.randn(t, b, d, generator=gen),
            **extras,
        )

    return factory
