"""Command line entry points: train, compare, analyze."""

import argparse
import dataclasses
import json
import sys

from .analysis import analyze_checkpoint
from .compare import compare_runs, format_table
from .config import load_config
from .engine import run


def _add_train(sub):
    p = sub.add_parser("train", help="train one agent and write metrics/checkpoint")
    p.add_argument("--config", required=True, help="path to a flat JSON config file")
    p.add_argument("--seed", required=True, type=int, help="master seed")
    p.add_argument("--out", required=True, help="output directory for this run")
    p.add_argument("--mode", choices=["baseline", "seer"], default=None,
                   help="override the config's training mode")
    p.add_argument("--memory-budget", type=int, default=None,
                   help="override the config's replay byte budget")


def _add_compare(sub):
    p = sub.add_parser("compare", help="compare two experiment directories")
    p.add_argument("dir_a", help="first experiment root (contains seed_* dirs)")
    p.add_argument("dir_b", help="second experiment root")
    p.add_argument("--at-macs", type=float, default=None,
                   help="compute point for the matched-compute comparison")
    p.add_argument("--at-steps", type=float, default=None,
                   help="step point for the matched-step comparison")


def _add_analyze(sub):
    p = sub.add_parser("analyze", help="export a spatial attention map from a checkpoint")
    p.add_argument("--checkpoint", required=True, help="path to checkpoint.bin")
    p.add_argument("--obs", required=True, type=int,
                   help="observation index along a greedy rollout")
    p.add_argument("--out", default=None, help="output PGM path (default: beside checkpoint)")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="latentrl",
                                     description="latent replay training harness")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_train(sub)
    _add_compare(sub)
    _add_analyze(sub)
    args = parser.parse_args(argv)

    if args.command == "train":
        cfg = load_config(args.config)
        if args.mode is not None:
            cfg = dataclasses.replace(cfg, mode=args.mode)
        if args.memory_budget is not None:
            cfg = dataclasses.replace(cfg, byte_budget=args.memory_budget)
        summary = run(cfg, args.seed, args.out)
        print(json.dumps({"status": summary["status"], "out": args.out,
                          "total_macs": summary["total_macs"],
                          "final_eval_mean": summary["final_eval_mean"]},
                         indent=2, sort_keys=True))
        return 0

    if args.command == "compare":
        result = compare_runs(args.dir_a, args.dir_b, at_macs=args.at_macs,
                              at_steps=args.at_steps)
        print(format_table(result))
        return 0

    if args.command == "analyze":
        path, _ = analyze_checkpoint(args.checkpoint, obs_index=args.obs,
                                     out_path=args.out)
        print(path)
        return 0

    parser.error(f"unknown command {args.command}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
