import torch
from typing import Tuple

from ...utils.errors import ShapeError

# Layer norm without learned scale/shift: y = (x - mean) * rstd, rstd = 1 / sqrt(var + eps).
# The forward returns rstd so the backward never recomputes the statistics.


def layer_norm_fwd(x: torch.Tensor, eps: float) -> Tuple[torch.Tensor, torch.Tensor]:

    if x.dim() != 2:
        raise ShapeError(f"layer norm expects a [batch, d] tensor, got shape {tuple(x.shape)}")
    if eps <= 0.0:
        raise ValueError(f"Invalid epsilon value: {eps} - should be > 0.0")

    mean = x.mean(dim=-1, keepdim=True)
    xbar = x - mean
    var = (xbar * xbar).mean(dim=-1, keepdim=True)
    rstd = torch.rsqrt(var + eps)

    return xbar * rstd, rstd


def layer_norm_bwd(dy: torch.Tensor, y: torch.Tensor, rstd: torch.Tensor) -> torch.Tensor:

    if dy.shape != y.shape:
        raise ShapeError(f"layer norm grad shape {tuple(dy.shape)} does not match output {tuple(y.shape)}")

    # dx = rstd * (dy - mean(dy) - y * mean(dy * y))
    c1 = (dy * y).mean(dim=-1, keepdim=True)
    c2 = dy.mean(dim=-1, keepdim=True)

    return (dy - c2 - y * c1) * rstd


def layer_norm(x: torch.Tensor, eps: float = 1e-5) -> torch.Tensor:
    y, _ = layer_norm_fwd(x, eps)
    return y
