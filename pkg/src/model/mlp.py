import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import torch

from .ops.layer_norm import layer_norm_fwd, layer_norm_bwd
from .ops.activations import OUTPUT_ACTIVATIONS, output_fwd, output_bwd, relu_bwd
from ..utils.errors import ShapeError


@dataclass(frozen=True)
class Layer:
    weight: torch.Tensor  # [in, out]
    bias: torch.Tensor  # [out]
    has_layer_norm: bool = False


@dataclass(frozen=True)
class NetParams:
    """
    Parameters of a dense MLP with a multi-head output.

    The final layer produces `num_goals * head_dim` values which are reshaped to
    `[batch, num_goals, head_dim]`. A curried (all-goals) network uses `head_shape=(G, A)`,
    a goal-conditioned one `(1, A)`. Hidden layers are affine -> layer norm (if flagged) -> ReLU,
    the final layer is affine -> `output_activation`.

    Parameters:
        layers (`Tuple[Layer]`):
            Dense layers in forward order.
        head_shape (`Tuple[int, int]`):
            `(num_goals, num_actions_or_dims)`.
        output_activation (`str`, *optional*, defaults to `"sigmoid"`):
            One of `"none"`, `"sigmoid"` (bounded value heads) or `"tanh"` (deterministic actors).
        layer_norm_eps (`float`, *optional*, defaults to 1e-5):
            Epsilon of the hidden layer norms.
    """

    layers: Tuple[Layer, ...]
    head_shape: Tuple[int, int]
    output_activation: str = "sigmoid"
    layer_norm_eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "head_shape", tuple(int(x) for x in self.head_shape))

        if len(self.layers) == 0:
            raise ShapeError("network has no layers")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"Unknown output activation: {self.output_activation}")

        for i, layer in enumerate(self.layers):
            if layer.weight.dim() != 2 or layer.bias.dim() != 1:
                raise ShapeError("weight must be [in, out] and bias [out]", layer=i)
            if min(layer.weight.shape) < 1:
                raise ShapeError("all dimensions must be >= 1", layer=i)
            if layer.bias.shape[0] != layer.weight.shape[1]:
                raise ShapeError(f"bias size {layer.bias.shape[0]} != weight out {layer.weight.shape[1]}", layer=i)
            if i > 0 and self.layers[i - 1].weight.shape[1] != layer.weight.shape[0]:
                raise ShapeError(f"input size {layer.weight.shape[0]} does not chain with "
                                 f"previous output {self.layers[i - 1].weight.shape[1]}", layer=i)

        if self.layers[-1].has_layer_norm:
            raise ShapeError("the output layer cannot carry a layer norm", layer=len(self.layers) - 1)

        num_goals, head_dim = self.head_shape
        if self.out_dim != num_goals * head_dim:
            raise ShapeError(f"output size {self.out_dim} != num_goals * head_dim = {num_goals} * {head_dim}",
                             layer=len(self.layers) - 1)

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    @property
    def num_goals(self) -> int:
        return self.head_shape[0]

    @property
    def head_dim(self) -> int:
        return self.head_shape[1]

    @property
    def dtype(self) -> torch.dtype:
        return self.layers[0].weight.dtype

    def block_names(self) -> List[str]:
        names = []
        for i in range(len(self.layers)):
            names += [f"layers.{i}.weight", f"layers.{i}.bias"]
        return names

    def blocks(self) -> List[torch.Tensor]:
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out

    def numel(self) -> int:
        return sum(x.numel() for x in self.blocks())

    def with_blocks(self, blocks: Sequence[torch.Tensor]) -> "NetParams":
        if len(blocks) != 2 * len(self.layers):
            raise ShapeError(f"expected {2 * len(self.layers)} parameter blocks, got {len(blocks)}")
        layers = []
        for i, layer in enumerate(self.layers):
            weight, bias = blocks[2 * i], blocks[2 * i + 1]
            if weight.shape != layer.weight.shape or bias.shape != layer.bias.shape:
                raise ShapeError(f"block shapes {tuple(weight.shape)}/{tuple(bias.shape)} do not match "
                                 f"{tuple(layer.weight.shape)}/{tuple(layer.bias.shape)}", layer=i)
            layers.append(Layer(weight, bias, layer.has_layer_norm))
        return replace(self, layers=tuple(layers))

    def to(self, dtype: torch.dtype) -> "NetParams":
        return self.with_blocks([x.to(dtype) for x in self.blocks()])

    def clone(self) -> "NetParams":
        return self.with_blocks([x.clone() for x in self.blocks()])


@dataclass(frozen=True)
class NetGrads:
    """Gradients with the same block layout as `NetParams`, plus the gradient w.r.t. the network input."""

    blocks: Tuple[torch.Tensor, ...]
    input: Optional[torch.Tensor] = None

    def __add__(self, other: "NetGrads") -> "NetGrads":
        if len(self.blocks) != len(other.blocks):
            raise ShapeError("cannot add gradients of different networks")
        inputs = None
        if self.input is not None and other.input is not None:
            inputs = self.input + other.input
        return NetGrads(tuple(a + b for a, b in zip(self.blocks, other.blocks)), inputs)

    def scale(self, factor: float) -> "NetGrads":
        inputs = self.input * factor if self.input is not None else None
        return NetGrads(tuple(x * factor for x in self.blocks), inputs)

    def global_norm(self) -> float:
        return math.sqrt(sum(float((x.double() ** 2).sum()) for x in self.blocks))

    def clip(self, max_norm: Optional[float]) -> "NetGrads":
        if max_norm is None or max_norm <= 0.0:
            return self
        norm = self.global_norm()
        if norm <= max_norm:
            return self
        return self.scale(max_norm / (norm + 1e-6))

    @classmethod
    def zeros_like(cls, params: NetParams) -> "NetGrads":
        return cls(tuple(torch.zeros_like(x) for x in params.blocks()))


@dataclass
class Activations:
    """Intermediate tensors of `mlp_forward`, consumed by `mlp_backward`."""

    inputs: List[torch.Tensor] = field(default_factory=list)  # input of every affine
    normed: List[Optional[torch.Tensor]] = field(default_factory=list)  # layer norm output per hidden layer
    rstds: List[Optional[torch.Tensor]] = field(default_factory=list)
    hidden: List[torch.Tensor] = field(default_factory=list)  # post-ReLU per hidden layer
    output: torch.Tensor = None  # [batch, num_goals, head_dim]


def init_mlp(
    in_dim: int,
    hidden_sizes: Sequence[int],
    head_shape: Tuple[int, int],
    layer_norm: bool = True,
    output_activation: str = "sigmoid",
    seed: int = 0,
    dtype: torch.dtype = torch.float32,
    layer_norm_eps: float = 1e-5,
) -> NetParams:
    """Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero."""

    generator = torch.Generator().manual_seed(seed)
    sizes = [in_dim] + list(hidden_sizes) + [head_shape[0] * head_shape[1]]

    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / math.sqrt(fan_in)
        weight = (torch.rand((fan_in, fan_out), generator=generator, dtype=torch.float64) * 2.0 - 1.0) * bound
        bias = torch.zeros(fan_out, dtype=torch.float64)
        is_hidden = i < len(sizes) - 2
        layers.append(Layer(weight.to(dtype), bias.to(dtype), has_layer_norm=layer_norm and is_hidden))

    return NetParams(tuple(layers), head_shape, output_activation, layer_norm_eps)


def mlp_forward(params: NetParams, x: torch.Tensor) -> Activations:

    if x.dim() != 2 or x.shape[0] < 1:
        raise ShapeError(f"input must be [batch >= 1, in], got shape {tuple(x.shape)}", layer=0)

    acts = Activations()
    last = len(params.layers) - 1
    h = x.to(params.dtype)

    for i, layer in enumerate(params.layers):
        if h.shape[1] != layer.weight.shape[0]:
            raise ShapeError(f"input size {h.shape[1]} != weight in {layer.weight.shape[0]}", layer=i)

        acts.inputs.append(h)
        z = torch.addmm(layer.bias, h, layer.weight)

        if i == last:
            out = output_fwd(z, params.output_activation)
            acts.output = out.reshape(h.shape[0], *params.head_shape)
            break

        rstd = None
        if layer.has_layer_norm:
            z, rstd = layer_norm_fwd(z, params.layer_norm_eps)
        acts.normed.append(z)
        acts.rstds.append(rstd)

        h = torch.relu(z)
        acts.hidden.append(h)

    return acts


def mlp_backward(params: NetParams, acts: Activations, grad_output: torch.Tensor) -> NetGrads:
    """Reverse pass of `mlp_forward`: gradients of every block and of the input."""

    if grad_output.shape != acts.output.shape:
        raise ShapeError(f"grad_output shape {tuple(grad_output.shape)} does not match output "
                         f"{tuple(acts.output.shape)}", layer=len(params.layers) - 1)

    batch = grad_output.shape[0]
    dy = grad_output.to(params.dtype).reshape(batch, -1)
    dz = output_bwd(dy, acts.output.reshape(batch, -1), params.output_activation)

    grads: List[torch.Tensor] = [None] * (2 * len(params.layers))
    d_input = None

    for i in reversed(range(len(params.layers))):
        layer = params.layers[i]
        grads[2 * i] = acts.inputs[i].t() @ dz
        grads[2 * i + 1] = dz.sum(dim=0)
        dh = dz @ layer.weight.t()

        if i == 0:
            d_input = dh
            break

        dn = relu_bwd(dh, acts.hidden[i - 1])
        if params.layers[i - 1].has_layer_norm:
            dz = layer_norm_bwd(dn, acts.normed[i - 1], acts.rstds[i - 1])
        else:
            dz = dn

    return NetGrads(tuple(grads), d_input)


def mlp_apply(params: NetParams, x: torch.Tensor) -> torch.Tensor:
    """Forward pass returning only the `[batch, num_goals, head_dim]` output."""
    with torch.no_grad():
        return mlp_forward(params, x).output


def flatten_blocks(blocks: Sequence[torch.Tensor]) -> torch.Tensor:
    return torch.cat([x.reshape(-1) for x in blocks])


def unflatten_blocks(flat: torch.Tensor, like: Sequence[torch.Tensor]) -> List[torch.Tensor]:
    total = sum(x.numel() for x in like)
    if flat.numel() != total:
        raise ShapeError(f"flat vector has {flat.numel()} entries, expected {total}")
    out, offset = [], 0
    for x in like:
        out.append(flat[offset:offset + x.numel()].reshape(x.shape).clone())
        offset += x.numel()
    return out
