"""Run configuration: one flat JSON document fully specifies a run."""

import json
from dataclasses import asdict, dataclass, fields


@dataclass
class RunConfig:
    env_id: str = "catch"
    grid_size: int | None = None        # None: environment default
    render_size: int | None = None
    frame_stack: int | None = None
    episode_cap: int = 0                # 0: environment default
    mode: str = "baseline"              # baseline | seer
    total_steps: int = 30000
    freeze_step: int = 12000            # ignored in baseline mode
    capacity: int = 30000               # image-mode transition capacity
    byte_budget: int | None = None      # hard cap on observation storage bytes
    batch_size: int = 32
    gamma: float = 0.99
    learning_rate: float = 1e-3
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 6000
    target_sync_period: int = 250
    updates_per_step: int = 1
    initial_random_steps: int = 1000
    double_q: bool = False
    augment_enabled: bool = False
    augment_pad: int = 0
    augment_k: int = 1
    conv_channels: tuple = (4, 8)
    conv_kernels: tuple = (3, 3)
    conv_strides: tuple = (3, 2)
    conv_paddings: tuple = (0, 1)
    latent_dim: int = 32
    head_hidden: tuple = (32,)
    eval_interval: int = 1000
    eval_episodes: int = 20
    log_interval: int = 250


_TUPLE_KEYS = ("conv_channels", "conv_kernels", "conv_strides", "conv_paddings", "head_hidden")


def config_from_dict(d):
    known = {f.name for f in fields(RunConfig)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    d = dict(d)
    for key in _TUPLE_KEYS:
        if key in d:
            d[key] = tuple(d[key])
    return RunConfig(**d)


def config_to_dict(cfg):
    d = asdict(cfg)
    for key in _TUPLE_KEYS:
        d[key] = list(d[key])
    return d


def load_config(path):
    with open(path, "r", encoding="utf-8") as f:
        cfg = config_from_dict(json.load(f))
    validate_config(cfg)
    return cfg


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config_to_dict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")


def effective_aug(cfg):
    """(pad, k) actually applied; disabled augmentation is pad 0, K 1."""
    if not cfg.augment_enabled:
        return 0, 1
    return cfg.augment_pad, cfg.augment_k


def validate_config(cfg):
    if cfg.mode not in ("baseline", "seer"):
        raise ValueError(f"mode must be 'baseline' or 'seer', got {cfg.mode!r}")
    if cfg.env_id not in ("catch", "grid_goal"):
        raise ValueError(f"unknown env_id {cfg.env_id!r}")
    if cfg.total_steps < 0:
        raise ValueError("total_steps must be >= 0")
    if cfg.mode == "seer":
        if not 0 <= cfg.freeze_step < max(cfg.total_steps, 1):
            raise ValueError("seer mode needs 0 <= freeze_step < total_steps")
        if cfg.freeze_step != 0 and cfg.freeze_step < cfg.initial_random_steps:
            raise ValueError("freeze_step must be >= initial_random_steps (or 0)")
    if not 0 <= cfg.gamma < 1:
        raise ValueError("gamma must be in [0, 1)")
    if cfg.batch_size < 1 or cfg.capacity < 1:
        raise ValueError("batch_size and capacity must be >= 1")
    if cfg.initial_random_steps < cfg.batch_size:
        raise ValueError("initial_random_steps must be >= batch_size "
                         "(updates start only once a full batch exists)")
    if cfg.updates_per_step < 1:
        raise ValueError("updates_per_step must be >= 1")
    if cfg.epsilon_decay_steps < 1:
        raise ValueError("epsilon_decay_steps must be >= 1")
    if cfg.augment_k < 1 or cfg.augment_pad < 0:
        raise ValueError("augment_k must be >= 1 and augment_pad >= 0")
    if len({len(cfg.conv_channels), len(cfg.conv_kernels), len(cfg.conv_strides),
            len(cfg.conv_paddings)}) != 1:
        raise ValueError("conv_* lists must have equal length")
    if cfg.eval_interval % cfg.log_interval != 0:
        raise ValueError("eval_interval must be a multiple of log_interval")
    if cfg.eval_episodes < 1 or cfg.eval_interval < 1 or cfg.log_interval < 1:
        raise ValueError("eval/log intervals and eval_episodes must be >= 1")
    if cfg.byte_budget is not None and cfg.byte_budget < 1:
        raise ValueError("byte_budget must be positive when set")
    return cfg
