from dataclasses import dataclass
from typing import Optional, Tuple

import torch

from ..model.mlp import NetParams, NetGrads, flatten_blocks, unflatten_blocks
from .errors import NumericError, ShapeError


@dataclass(frozen=True)
class AdamState:
    m: torch.Tensor  # first moment, same length as the flat parameter vector
    v: torch.Tensor  # second moment
    t: int = 0

    @classmethod
    def zeros_like(cls, params: NetParams) -> "AdamState":
        n = params.numel()
        return cls(torch.zeros(n, dtype=params.dtype), torch.zeros(n, dtype=params.dtype), 0)


def _check_finite(params: NetParams, grads: NetGrads):
    for name, grad in zip(params.block_names(), grads.blocks):
        if not torch.isfinite(grad).all():
            raise NumericError(f"non-finite gradient entries in parameter block '{name}'")


def adam_step(
    params: NetParams,
    grads: NetGrads,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Tuple[NetParams, AdamState]:
    """
    One Adam step with bias correction. Returns new parameters and state, the inputs are left untouched.
    """

    if not 0.0 <= beta1 < 1.0:
        raise ValueError(f"Invalid beta parameter: {beta1} - should be in [0.0, 1.0)")
    if not 0.0 <= beta2 < 1.0:
        raise ValueError(f"Invalid beta parameter: {beta2} - should be in [0.0, 1.0)")
    if len(grads.blocks) != len(params.blocks()):
        raise ShapeError(f"expected {len(params.blocks())} gradient blocks, got {len(grads.blocks)}")
    if state.m.numel() != params.numel() or state.v.numel() != params.numel():
        raise ShapeError(f"optimizer state has {state.m.numel()} entries, parameters have {params.numel()}")

    _check_finite(params, grads)

    flat = flatten_blocks(params.blocks())
    grad = flatten_blocks(grads.blocks).to(flat.dtype)
    step = state.t + 1

    # Decay the first and second moment running average coefficient
    exp_avg = state.m * beta1 + grad * (1.0 - beta1)
    exp_avg_sq = state.v * beta2 + grad * grad * (1.0 - beta2)

    bias_correction1 = 1.0 - beta1 ** step
    bias_correction2 = 1.0 - beta2 ** step
    denom = (exp_avg_sq / bias_correction2).sqrt() + eps

    flat = flat - lr * (exp_avg / bias_correction1) / denom

    new_params = params.with_blocks(unflatten_blocks(flat, params.blocks()))
    return new_params, AdamState(exp_avg, exp_avg_sq, step)


class Adam:
    """
    Stateful wrapper around `adam_step` owned by a single learner.

    Parameters:
        params (`NetParams`):
            Parameters the optimizer state is shaped after.
        lr (`float`, *optional*, defaults to 2e-4):
            The learning rate to use.
        betas (`Tuple[float,float]`, *optional*, defaults to (0.9, 0.999)):
            Adam's betas parameters (b1, b2).
        eps (`float`, *optional*, defaults to 1e-8):
            Adam's epsilon for numerical stability.
    """

    def __init__(
        self,
        params: NetParams,
        lr: float = 2e-4,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        if lr < 0.0:
            raise ValueError(f"Invalid learning rate: {lr} - should be >= 0.0")
        if not 0.0 <= betas[0] < 1.0:
            raise ValueError(f"Invalid beta parameter: {betas[0]} - should be in [0.0, 1.0)")
        if not 0.0 <= betas[1] < 1.0:
            raise ValueError(f"Invalid beta parameter: {betas[1]} - should be in [0.0, 1.0)")
        if not 0.0 <= eps:
            raise ValueError(f"Invalid epsilon value: {eps} - should be >= 0.0")

        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state = AdamState.zeros_like(params)

    def step(self, params: NetParams, grads: NetGrads, lr: Optional[float] = None) -> NetParams:
        params, self.state = adam_step(params, grads, self.state, self.lr if lr is None else lr,
                                       self.betas[0], self.betas[1], self.eps)
        return params

    @property
    def num_steps(self) -> int:
        return self.state.t
