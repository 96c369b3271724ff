from benchmark import Benchmark

from src.utils.throughput import make_workload

NUM_ENVS = 16
NUM_STEPS = 8

@Benchmark.parametrize("goal_count", [1, 4, 16, 64])
@Benchmark.parametrize("hidden_size", [256])
def test_all_goals_throughput(goal_count: int, hidden_size: int):
    """
    Training throughput of one goal per update, all goals per update (LEO), and naive relabelling
    against every goal, at equal network width and minibatch size
    """
    kwargs = dict(num_envs=NUM_ENVS, num_steps=NUM_STEPS, hidden_size=hidden_size, minibatch_size=128)

    return {
        "single_goal": make_workload("single_goal", goal_count, **kwargs),
        "leo": make_workload("leo", goal_count, **kwargs),
        "naive_relabel": make_workload("naive_relabel", goal_count, **kwargs),
    }

print(test_all_goals_throughput._benchmark.run(steps=lambda **_: NUM_ENVS * NUM_STEPS, export_csv="bench_all_goals.csv",
                                               export_graphics=True, key_split="goal_count", path_graphics="bench_all_goals"))
