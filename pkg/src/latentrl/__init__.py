"""Latent replay reinforcement learning: freeze an encoder mid-training and
replay compact latent vectors instead of raw pixels, with exact accounting
of compute (multiply-accumulates) and replay memory (bytes)."""

from .accounting import (CostLedger, FlopModel, closed_form_total,
                         flops_post_freeze_per_iter, flops_pre_freeze_per_iter,
                         one_time_freeze_cost)
from .agent import DqnAgent, td_target
from .analysis import analyze_checkpoint, attention_map, export_pgm, parse_pgm
from .augment import AugmentConfig, augment_k, draw_offsets, random_shift_crop, shift_crop
from .checkpoint import load_checkpoint, save_checkpoint
from .compare import compare_runs, format_table
from .config import RunConfig, load_config, save_config, validate_config
from .engine import evaluate, run, run_many, stream
from .envs import CatchEnv, GridGoalEnv, make_env, optimal_catch_action
from .nn import (NetworkSpec, ParamStore, build_network, forward_full,
                 forward_encoder, forward_head_only, init_params, param_flops)
from .replay import NotReady, ReplayBuffer, capacity_for_budget, computed_capacity

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig", "CatchEnv", "CostLedger", "DqnAgent", "FlopModel",
    "GridGoalEnv", "NetworkSpec", "NotReady", "ParamStore", "ReplayBuffer",
    "RunConfig", "analyze_checkpoint", "attention_map", "augment_k",
    "build_network", "capacity_for_budget", "closed_form_total", "compare_runs",
    "computed_capacity", "draw_offsets", "evaluate", "export_pgm",
    "flops_post_freeze_per_iter", "flops_pre_freeze_per_iter", "forward_encoder",
    "forward_full", "forward_head_only", "format_table", "init_params",
    "load_checkpoint", "load_config", "make_env", "one_time_freeze_cost",
    "optimal_catch_action", "param_flops", "parse_pgm", "random_shift_crop",
    "run", "run_many", "save_checkpoint", "save_config", "shift_crop", "stream",
    "td_target", "validate_config",
]
