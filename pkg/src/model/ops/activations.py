import torch

OUTPUT_ACTIVATIONS = ("none", "sigmoid", "tanh")


def sigmoid_bound(logits: torch.Tensor) -> torch.Tensor:
    """
    Bounds value estimates to (0, 1). torch.sigmoid is evaluated in the numerically stable
    form, so large |x| saturates to 0 or 1 instead of producing inf/nan.
    """
    return torch.sigmoid(logits)


def sigmoid_bound_bwd(dy: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    return dy * y * (1.0 - y)


def relu_bwd(dy: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    return dy * (y > 0).to(dy.dtype)


def output_fwd(logits: torch.Tensor, activation: str) -> torch.Tensor:
    if activation == "sigmoid":
        return sigmoid_bound(logits)
    if activation == "tanh":
        return torch.tanh(logits)
    if activation == "none":
        return logits
    raise ValueError(f"Unknown output activation: {activation} - should be one of {OUTPUT_ACTIVATIONS}")


def output_bwd(dy: torch.Tensor, y: torch.Tensor, activation: str) -> torch.Tensor:
    if activation == "sigmoid":
        return sigmoid_bound_bwd(dy, y)
    if activation == "tanh":
        return dy * (1.0 - y * y)
    if activation == "none":
        return dy
    raise ValueError(f"Unknown output activation: {activation} - should be one of {OUTPUT_ACTIVATIONS}")
