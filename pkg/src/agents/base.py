import logging
from typing import Dict, Iterator, Mapping

import numpy as np
import torch

from ..configuration import RunConfig
from ..model.mlp import NetParams, init_mlp
from ..rollout.collector import Policy, PolicyStep
from optimization import create_optimizer
from ..utils.adam import Adam
from ..utils.errors import CheckpointError

logger = logging.getLogger(__name__)


def _layout(params: NetParams):
    return [tuple(layer.weight.shape) for layer in params.layers], params.head_shape


class Learner:
    """
    Acting and updating for one training method. The training loop sets `schedule` (learning
    rate, epsilon, alpha, cloning scale) before every iteration, then calls `act` through the
    collector and `update` on the collected segment.
    """

    method: str = None
    discrete: bool = True

    def __init__(self, config: RunConfig, env):
        self.config = config
        self.cfg = config.train
        self.env = env
        self.num_goals = env.num_goals
        self.obs_dim = env.obs_dim
        self.schedule = None
        self._nets: Dict[str, NetParams] = {}
        self.optimizers: Dict[str, Adam] = {}

    def _init_net(self, name: str, in_dim: int, head_shape, output_activation: str, seed_offset: int) -> NetParams:
        params = init_mlp(in_dim, self.cfg.hidden_sizes, head_shape, layer_norm=True,
                          output_activation=output_activation, seed=self.config.seed * 1000 + seed_offset,
                          layer_norm_eps=self.cfg.layer_norm_eps)
        self._nets[name] = params
        self.optimizers[name] = create_optimizer(params, self.cfg)
        logger.debug(f"{self.method}: network '{name}' with {params.numel()} parameters, head {params.head_shape}")
        return params

    @property
    def lr(self):
        return None if self.schedule is None else self.schedule.lr

    @property
    def epsilon(self) -> float:
        return self.cfg.eps_start if self.schedule is None else self.schedule.epsilon

    def _step(self, name: str, grads) -> NetParams:
        self._nets[name] = self.optimizers[name].step(self._nets[name], grads.clip(self.cfg.max_grad_norm), self.lr)
        return self._nets[name]

    def _minibatches(self, n: int, rng: np.random.Generator) -> Iterator[torch.Tensor]:
        size = min(self.cfg.minibatch_size, n)
        for _ in range(self.cfg.num_epochs):
            perm = torch.from_numpy(rng.permutation(n))
            for start in range(0, n, size):
                yield perm[start:start + size]

    def act(self, obs: np.ndarray, commanded: np.ndarray, rng: np.random.Generator) -> PolicyStep:
        raise NotImplementedError

    def update(self, segment, rng: np.random.Generator) -> Dict[str, float]:
        raise NotImplementedError

    def eval_policies(self) -> Dict[str, Policy]:
        """Greedy policies by name, the first one is the learner's own."""
        raise NotImplementedError

    def nets(self) -> Dict[str, NetParams]:
        return dict(self._nets)

    def load_nets(self, nets: Mapping[str, NetParams]):
        if set(nets) != set(self._nets):
            raise CheckpointError(f"checkpoint holds networks {sorted(nets)}, method {self.method!r} "
                                  f"needs {sorted(self._nets)}")
        for name, params in nets.items():
            own = self._nets[name]
            if _layout(params) != _layout(own):
                raise CheckpointError(f"network '{name}': checkpoint layout {_layout(params)} does not match "
                                      f"the configuration's {_layout(own)} (layer shapes, head shape)")
            self._nets[name] = params.to(own.dtype)
            self.optimizers[name] = create_optimizer(self._nets[name], self.cfg)
