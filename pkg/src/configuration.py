import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Sequence, Tuple

import yaml

from .utils.errors import ConfigError

logger = logging.getLogger(__name__)

METHODS = ("uvfa_pqn", "uvfa_pqn_her", "leo", "dual_leo_pqn", "ppo", "dual_leo_ppo", "leo_dpg")
ENVS = ("gridcraft_small", "gridcraft_full", "pointmaze")
ACTING_MODES = ("max", "min", "linear")
HER_STRATEGIES = ("none", "random", "positive", "mixed")
HER_LEVELS = ("per_transition", "per_trajectory")
MASK_MODES = ("bernoulli", "exact")


def _check(condition: bool, field_name: str, message: str):
    if not condition:
        raise ConfigError(f"{field_name}: {message}")


def _coerce_numbers(obj):
    # YAML 1.1 reads "2e-4" as a string
    for f in fields(obj):
        value = getattr(obj, f.name)
        if f.type in (int, float) and not isinstance(value, bool):
            try:
                if f.type is int and isinstance(value, (str, float)) and float(value).is_integer():
                    value = float(value)
                setattr(obj, f.name, f.type(value))
            except (TypeError, ValueError):
                raise ConfigError(f"{f.name}: expected {f.type.__name__}, got {value!r}") from None


@dataclass
class TrainConfig:
    """
    Learning hyperparameters shared by every method. Defaults are desk-scale: the value
    learners follow the PQN lineage (Q(lambda) segments, layer norm, no target network).

    Parameters:
        gamma (`float`, defaults to 0.99): discount, in (0, 1].
        lambda_q (`float`, defaults to 0.65): Q(lambda) mixing.
        eps_start, eps_final, eps_decay_frac: linear epsilon-greedy schedule.
        alpha (`float`, defaults to 0.3): Dual LEO acting mix, `alpha * Q_leo + (1 - alpha) * Q_uvfa`.
        acting_mode (`str`, defaults to `"linear"`): Dual LEO acting, one of `max`, `min`, `linear`.
        anneal_alpha (`bool`, defaults to False): anneal `alpha` linearly to 0 over training.
        pc_coef, vc_coef (`float`): Dual LEO (PPO) policy and value cloning coefficients.
        anneal_clone (`bool`, defaults to True): anneal both cloning coefficients linearly to 0.
        clip_eps, gae_lambda, ent_coef, vf_coef: PPO scalars.
        mask_keep_prob (`float`, defaults to 1.0): proportion of LEO heads updated per minibatch.
        mask_mode (`str`, defaults to `"bernoulli"`): per-head Bernoulli draw, or `exact` count.
        lr, betas, adam_eps, lr_decay: Adam and its linear learning-rate decay.
        max_grad_norm (`float`, defaults to 10.0): global gradient-norm clip, 0 disables it.
        num_envs, num_steps: rollout lanes and segment length.
        minibatch_size, num_minibatches, num_epochs: update passes over a segment. PPO splits a
            segment into `num_minibatches`, the Q learners into minibatches of `minibatch_size`.
        hidden_size, num_layers, layer_norm_eps: MLP torso.
        her_strategy, her_n, her_m, her_level: hindsight relabelling of `uvfa_pqn_her`.
        exploration_noise (`float`, defaults to 0.2): LEO-DPG Gaussian action noise.
        eps_reach (`float`, defaults to 0.1): radius used when commanding a quantized goal.
        grid_spacing (`float`, defaults to 0.5): pointmaze quantization spacing.
    """

    gamma: float = 0.99
    lambda_q: float = 0.65
    eps_start: float = 0.2
    eps_final: float = 0.01
    eps_decay_frac: float = 0.5
    alpha: float = 0.3
    acting_mode: str = "linear"
    anneal_alpha: bool = False
    pc_coef: float = 0.1
    vc_coef: float = 0.0
    anneal_clone: bool = True
    clip_eps: float = 0.2
    gae_lambda: float = 0.95
    ent_coef: float = 0.005
    vf_coef: float = 0.5
    mask_keep_prob: float = 1.0
    mask_mode: str = "bernoulli"
    lr: float = 2e-4
    betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    lr_decay: bool = True
    max_grad_norm: float = 10.0
    num_envs: int = 64
    num_steps: int = 8
    minibatch_size: int = 256
    num_minibatches: int = 4
    num_epochs: int = 1
    hidden_size: int = 256
    num_layers: int = 2
    layer_norm_eps: float = 1e-5
    her_strategy: str = "mixed"
    her_n: int = 1
    her_m: int = 1
    her_level: str = "per_trajectory"
    exploration_noise: float = 0.2
    eps_reach: float = 0.1
    grid_spacing: float = 0.5

    def __post_init__(self):
        _coerce_numbers(self)
        self.betas = tuple(float(b) for b in self.betas)

        _check(0.0 < self.gamma <= 1.0, "gamma", f"must be in (0, 1], got {self.gamma}")
        for name in ("lambda_q", "eps_start", "eps_final", "eps_decay_frac", "alpha", "gae_lambda", "mask_keep_prob"):
            value = getattr(self, name)
            _check(0.0 <= value <= 1.0, name, f"must be in [0, 1], got {value}")
        _check(self.acting_mode in ACTING_MODES, "acting_mode", f"must be one of {ACTING_MODES}, got {self.acting_mode!r}")
        _check(self.mask_mode in MASK_MODES, "mask_mode", f"must be one of {MASK_MODES}, got {self.mask_mode!r}")
        _check(self.her_strategy in HER_STRATEGIES, "her_strategy",
               f"must be one of {HER_STRATEGIES}, got {self.her_strategy!r}")
        _check(self.her_level in HER_LEVELS, "her_level", f"must be one of {HER_LEVELS}, got {self.her_level!r}")
        _check(len(self.betas) == 2 and all(0.0 <= b < 1.0 for b in self.betas), "betas",
               f"must be two values in [0, 1), got {self.betas}")
        _check(self.lr >= 0.0, "lr", f"must be >= 0, got {self.lr}")
        _check(self.clip_eps > 0.0, "clip_eps", f"must be > 0, got {self.clip_eps}")
        for name in ("pc_coef", "vc_coef", "ent_coef", "vf_coef", "max_grad_norm", "exploration_noise", "adam_eps"):
            _check(getattr(self, name) >= 0.0, name, f"must be >= 0, got {getattr(self, name)}")
        for name in ("num_envs", "num_steps", "minibatch_size", "num_minibatches", "num_epochs", "hidden_size"):
            _check(int(getattr(self, name)) >= 1, name, f"must be >= 1, got {getattr(self, name)}")
        _check(self.num_layers >= 0, "num_layers", f"must be >= 0, got {self.num_layers}")
        _check(self.her_n >= 0 and self.her_m >= 0, "her_n/her_m", "relabel counts must be >= 0")
        _check(self.layer_norm_eps > 0.0, "layer_norm_eps", f"must be > 0, got {self.layer_norm_eps}")
        _check(self.eps_reach > 0.0, "eps_reach", f"must be > 0, got {self.eps_reach}")
        _check(self.grid_spacing > 0.0, "grid_spacing", f"must be > 0, got {self.grid_spacing}")

    @property
    def hidden_sizes(self) -> List[int]:
        return [self.hidden_size] * self.num_layers


@dataclass
class GoalSubsample:
    k: int
    must_include: Tuple[str, ...] = ()

    def __post_init__(self):
        self.must_include = tuple(self.must_include)
        _check(self.k >= 1, "goal_subsample.k", f"must be >= 1, got {self.k}")


@dataclass
class RunConfig:
    """
    A complete run: method, environment, learning hyperparameters and bookkeeping.

    `leo_dpg` is the only continuous-control method and `pointmaze` the only continuous
    environment, they go together.
    """

    method: str = "leo"
    env: str = "gridcraft_small"
    train: TrainConfig = field(default_factory=TrainConfig)
    total_steps: int = 200_000
    eval_every: int = 50_000
    checkpoint_every: int = 0
    episodes_per_goal: int = 16
    seed: int = 0
    autocurriculum: bool = True
    goal_subsample: Optional[GoalSubsample] = None
    goal_set_path: Optional[str] = None
    world_size: int = 9
    view_radius: int = 3
    t_max: int = 200
    maze: str = "umaze"
    out_dir: str = "runs/default"

    def __post_init__(self):
        if isinstance(self.train, dict):
            self.train = _build(TrainConfig, self.train, "train")
        if isinstance(self.goal_subsample, dict):
            self.goal_subsample = _build(GoalSubsample, self.goal_subsample, "goal_subsample")
        _coerce_numbers(self)

        _check(self.method in METHODS, "method", f"must be one of {METHODS}, got {self.method!r}")
        _check(self.env in ENVS, "env", f"must be one of {ENVS}, got {self.env!r}")
        if (self.method == "leo_dpg") != (self.env == "pointmaze"):
            raise ConfigError(f"method: {self.method!r} is not compatible with env {self.env!r} "
                              f"(leo_dpg runs on pointmaze only, and pointmaze needs leo_dpg)")
        _check(self.total_steps >= 1, "total_steps", f"must be >= 1, got {self.total_steps}")
        _check(self.eval_every >= 0, "eval_every", f"must be >= 0, got {self.eval_every}")
        _check(self.checkpoint_every >= 0, "checkpoint_every", f"must be >= 0, got {self.checkpoint_every}")
        _check(self.episodes_per_goal >= 1, "episodes_per_goal", f"must be >= 1, got {self.episodes_per_goal}")
        _check(self.world_size >= 6, "world_size", f"must be >= 6, got {self.world_size}")
        _check(self.view_radius >= 1, "view_radius", f"must be >= 1, got {self.view_radius}")
        _check(self.t_max >= 1, "t_max", f"must be >= 1, got {self.t_max}")

    @property
    def steps_per_iteration(self) -> int:
        return self.train.num_envs * self.train.num_steps

    @property
    def num_iterations(self) -> int:
        return max(1, math.ceil(self.total_steps / self.steps_per_iteration))

    @classmethod
    def from_dict(cls, config_dict: Dict[str, Any]) -> "RunConfig":
        return _build(cls, config_dict, None)

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["train"]["betas"] = list(self.train.betas)
        if self.goal_subsample is not None:
            d["goal_subsample"]["must_include"] = list(self.goal_subsample.must_include)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _build(cls, values: Dict[str, Any], prefix: Optional[str]):
    if not isinstance(values, dict):
        raise ConfigError(f"{prefix or 'config'}: expected a mapping, got {type(values).__name__}")
    known = {f.name for f in fields(cls)}
    for key in values:
        if key not in known:
            raise ConfigError(f"{prefix + '.' if prefix else ''}{key}: unknown configuration field")
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigError(f"{prefix or 'config'}: {e}") from None


def _set_dotted(config: Dict[str, Any], key: str, value: Any):
    parts = key.split(".")
    node = config
    for part in parts[:-1]:
        child = node.get(part)
        if child is None:
            child = node[part] = {}
        if not isinstance(child, dict):
            raise ConfigError(f"{key}: '{part}' is not a section")
        node = child
    node[parts[-1]] = value


def parse_overrides(overrides: Sequence[str]) -> List[Tuple[str, Any]]:
    """`key=value` pairs, values parsed as YAML scalars or flow collections (`0.3`, `true`, `[a, b]`)."""
    out = []
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must have the form key=value")
        key, raw = item.split("=", 1)
        out.append((key.strip(), yaml.safe_load(raw) if raw.strip() else None))
    return out


def apply_overrides(config_dict: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    for key, value in parse_overrides(overrides):
        _set_dotted(config_dict, key, value)
    return config_dict


def load_run_config(path: Optional[str] = None, overrides: Sequence[str] = ()) -> RunConfig:
    """
    Reads a JSON or YAML run configuration (JSON is valid YAML) and applies dotted
    `key=value` overrides, e.g. `train.alpha=0.5`.
    """

    config_dict: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "r") as config_file:
                config_dict = yaml.safe_load(config_file) or {}
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from None
        except yaml.YAMLError as e:
            raise ConfigError(f"config file {path} is not valid JSON/YAML: {e}") from None

    config = RunConfig.from_dict(apply_overrides(config_dict, overrides))
    logger.debug(f"loaded run configuration: {config.to_dict()}")
    return config


def save_run_config(config: RunConfig, path: str):
    with open(path, "w") as f:
        f.write(config.to_json())
