import itertools
from typing import Any, List
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import os
import numpy as np

from src.utils.throughput import time_call

class Benchmark:
    def __init__(self):
        self.parameters = {}
        self.func = {}

    @classmethod
    def parametrize(cls, param_name: str, values: List[Any]):
        def decorator(func):
            if not hasattr(func, '_benchmark'):
                func._benchmark = cls()
            func._benchmark.parameters[param_name] = values
            func._benchmark.func = func
            return func
        return decorator

    def _plot_graphics(self, results, combinations, path_graphics, key_split, is_sps=False):
        """One grouped bar chart per combination of the parameters other than `key_split`."""
        dirname = path_graphics or "benchmark_results"
        os.makedirs(dirname, exist_ok=True)

        others = [p for p in self.parameters if p != key_split]
        split_values = self.parameters[key_split]
        func_names = list(next(iter(results.values())).keys())
        y_max = 1.2 * max(v for per_func in results.values() for v in per_func.values())

        groups = {}
        for key, params in combinations.items():
            group = tuple(params[p] for p in others)
            groups.setdefault(group, {})[params[key_split]] = results[key]

        for group, by_split in groups.items():
            x = np.arange(len(split_values))
            width = 1.0 / (len(func_names) + 1)
            fig, ax = plt.subplots(layout="constrained")
            for i, func_name in enumerate(func_names):
                heights = [round(by_split[s][func_name], 1) for s in split_values]
                ax.bar_label(ax.bar(x + i * width, heights, width, label=func_name), padding=3)

            label = ",".join(f"{p}-{v}" for p, v in zip(others, group))
            ax.set_title(" ".join(f"{p} {v}" for p, v in zip(others, group)), wrap=True)
            ax.set_xlabel(key_split)
            ax.set_ylabel("Steps per second" if is_sps else "Time (ms)")
            ax.set_xticks(x + width, split_values)
            ax.set_ylim(0, y_max)
            ax.legend(loc="upper right", ncols=2)
            fig.savefig(os.path.join(dirname, ("SPS" if is_sps else "TIME") + (f"-{label}" if label else "") + ".png"))
            plt.close(fig)

    def _export_csv(self, results, combinations, path):
        param_names = list(self.parameters.keys())
        with open(path, "w") as f:
            f.write(",".join(param_names + ["name", "value"]) + "\n")
            for key, per_func in results.items():
                params = combinations[key]
                for func_name, value in per_func.items():
                    f.write(",".join([str(params[p]) for p in param_names] + [func_name, f"{value:.3f}"]) + "\n")

    def run(self, steps=None, repeats=3, export_csv=None, export_graphics=False, key_split=None, path_graphics=None):
        """
        Times every function returned by the decorated function, for every combination of
        parameters. With `steps(**params)` (environment steps per call) the result is in steps
        per second, otherwise in milliseconds per call.
        """
        param_names = list(self.parameters.keys())
        param_values = list(self.parameters.values())

        results = {}
        combinations = {}

        for combination in itertools.product(*param_values):
            params = dict(zip(param_names, combination))
            funcs = self.func(**params)
            results[str(params)] = {}
            combinations[str(params)] = params
            for func_name, func in funcs.items():
                seconds = time_call(func, repeats=repeats)
                if steps is not None:
                    results[str(params)][func_name] = steps(**params) / seconds
                else:
                    results[str(params)][func_name] = seconds * 1000

        if export_csv is not None:
            self._export_csv(results, combinations, export_csv)

        if export_graphics:
            self._plot_graphics(results, combinations, path_graphics, key_split=key_split, is_sps=steps is not None)

        return results
