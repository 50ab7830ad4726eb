"""Run the paired baseline / frozen-encoder experiment on Catch.

Trains both modes over several seeds from one config, then prints the
matched-compute and matched-step comparison together with the compute and
memory totals of each side.
"""

import argparse
import dataclasses
import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from latentrl.compare import compare_runs, format_table
from latentrl.config import load_config
from latentrl.engine import run_many


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=os.path.join(os.path.dirname(__file__),
                                                     os.pardir, "configs",
                                                     "catch_default.json"))
    ap.add_argument("--out", default="runs/catch")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    args = ap.parse_args()

    cfg = load_config(args.config)
    roots = {}
    for mode in ("baseline", "seer"):
        mode_cfg = dataclasses.replace(cfg, mode=mode)
        root = os.path.join(args.out, mode)
        print(f"training {mode} over seeds {args.seeds} -> {root}")
        summaries = run_many(mode_cfg, args.seeds, root)
        roots[mode] = root
        for s in summaries:
            print(f"  seed {s['seed']}: total_macs={s['total_macs']} "
                  f"final_eval={s['final_eval_mean']:.3f} "
                  f"bytes_used={s['final_bytes_used']}")

    result = compare_runs(roots["baseline"], roots["seer"])
    print()
    print(format_table(result))
    with open(os.path.join(args.out, "comparison.json"), "w", encoding="utf-8") as f:
        json.dump(result, f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
