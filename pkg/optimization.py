from dataclasses import dataclass

from src.algos.pqn import epsilon_schedule
from src.configuration import TrainConfig
from src.model.mlp import NetParams
from src.utils.adam import Adam


def create_optimizer(params: NetParams, cfg: TrainConfig) -> Adam:
    return Adam(params, lr=cfg.lr, betas=cfg.betas, eps=cfg.adam_eps)


def linear_decay(start: float, progress: float, end: float = 0.0) -> float:
    """Linear interpolation from `start` at progress 0 to `end` at progress 1, constant afterwards."""
    progress = min(max(progress, 0.0), 1.0)
    return start + progress * (end - start)


@dataclass(frozen=True)
class Schedule:
    """Every scheduled quantity of one training iteration."""

    step: int
    lr: float
    epsilon: float
    alpha: float
    clone_scale: float


def create_schedule(cfg: TrainConfig, step: int, total_steps: int) -> Schedule:
    progress = step / total_steps if total_steps > 0 else 1.0
    return Schedule(
        step=step,
        lr=linear_decay(cfg.lr, progress) if cfg.lr_decay else cfg.lr,
        epsilon=epsilon_schedule(step, total_steps, cfg),
        alpha=linear_decay(cfg.alpha, progress) if cfg.anneal_alpha else cfg.alpha,
        clone_scale=linear_decay(1.0, progress) if cfg.anneal_clone else 1.0,
    )
