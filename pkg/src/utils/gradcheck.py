import logging
from typing import Callable, List, Sequence, Tuple, Union

import numpy as np
import torch

from ..model.mlp import NetParams, NetGrads, flatten_blocks, unflatten_blocks

logger = logging.getLogger(__name__)

ParamsLike = Union[NetParams, Sequence[NetParams]]
GradsLike = Union[NetGrads, Sequence[NetGrads]]

RETRY_ABOVE = 1e-4


def _as_list(x):
    return list(x) if isinstance(x, (list, tuple)) else [x]


def _flatten(params: List[NetParams]) -> torch.Tensor:
    return flatten_blocks([b for p in params for b in p.blocks()])


def _unflatten(flat: torch.Tensor, params: List[NetParams]) -> List[NetParams]:
    out, offset = [], 0
    for p in params:
        n = p.numel()
        out.append(p.with_blocks(unflatten_blocks(flat[offset:offset + n], p.blocks())))
        offset += n
    return out


def finite_diff_check(
    params: ParamsLike,
    loss_fn: Callable[[ParamsLike], Tuple[float, GradsLike]],
    eps: float = 1e-4,
    probes: int = 32,
    seed: int = 0,
    dtype: torch.dtype = torch.float64,
    floor: float = 1e-4,
    kink_retry: bool = True,
) -> float:
    """
    Compares analytic gradients against central differences on randomly probed coordinates.

    `loss_fn` maps parameters (a `NetParams` or a list of them, same structure as `params`)
    to `(loss, grads)`. The check runs in `dtype` (float64 by default, the float32 round-off
    of a central difference at eps=1e-4 is of the same order as the tolerance). The relative
    error of one coordinate is |a - n| / max(|a|, |n|, floor). With `probes=0` nothing is
    compared and 0.0 is returned.

    A central difference straddling a ReLU kink is off by up to the slope change of the kink. With
    `kink_retry`, a coordinate whose error exceeds `RETRY_ABOVE` is re-estimated at `eps / 10`
    and keeps the smaller of both errors.
    """

    if eps <= 0.0:
        raise ValueError(f"Invalid epsilon value: {eps} - should be > 0.0")

    is_seq = isinstance(params, (list, tuple))
    plist = [p.to(dtype) for p in _as_list(params)]
    flat = _flatten(plist)

    if probes > flat.numel():
        raise ValueError(f"probes={probes} exceeds the number of parameters ({flat.numel()})")
    if probes == 0:
        return 0.0

    def evaluate(vec: torch.Tensor):
        ps = _unflatten(vec, plist)
        return loss_fn(ps if is_seq else ps[0])

    _, grads = evaluate(flat)
    analytic = flatten_blocks([b for g in _as_list(grads) for b in g.blocks]).to(dtype)

    rng = np.random.default_rng(seed)
    coords = rng.choice(flat.numel(), size=probes, replace=False)

    def central_difference(i: int, h: float) -> float:
        plus, minus = flat.clone(), flat.clone()
        plus[i] += h
        minus[i] -= h
        return (float(evaluate(plus)[0]) - float(evaluate(minus)[0])) / (2.0 * h)

    def relative_error(a: float, numeric: float) -> float:
        return abs(a - numeric) / max(abs(a), abs(numeric), floor)

    worst = 0.0
    for i in coords:
        a = float(analytic[i])
        err = relative_error(a, central_difference(i, eps))
        if kink_retry and err > RETRY_ABOVE:
            err = min(err, relative_error(a, central_difference(i, eps / 10.0)))
            logger.debug(f"coordinate {i}: re-estimated at eps={eps / 10.0:g}, relative error {err:.3e}")
        worst = max(worst, err)

    logger.debug(f"finite difference check: {probes} probes, max relative error {worst:.3e}")
    return worst
