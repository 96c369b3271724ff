import torch
from benchmark import Benchmark

from src.model.mlp import init_mlp, mlp_backward, mlp_forward

@Benchmark.parametrize("batch_size", [256, 1024])
@Benchmark.parametrize("hidden_size", [256, 512])
@Benchmark.parametrize("num_goals", [1, 16, 64])
def test_mlp_backward(batch_size: int, hidden_size: int, num_goals: int):
    """
    Benchmarks the hand-written forward/backward of the multi-head MLP against torch autograd
    """
    num_actions = 6
    params = init_mlp(128, [hidden_size, hidden_size], (num_goals, num_actions), seed=0)
    x = torch.randn(batch_size, 128)
    grad_output = torch.randn(batch_size, num_goals, num_actions)

    def fn_manual():
        return mlp_backward(params, mlp_forward(params, x), grad_output)

    leaves = [b.clone().requires_grad_() for b in params.blocks()]
    params_autograd = params.with_blocks(leaves)

    def fn_autograd():
        out = mlp_forward(params_autograd, x).output
        return torch.autograd.grad(out, leaves, grad_output)

    return {"Manual": fn_manual, "Autograd": fn_autograd}

print(test_mlp_backward._benchmark.run(export_csv="bench_mlp_backward.csv", export_graphics=True,
                                       key_split="num_goals", path_graphics="bench_mlp_backward"))
