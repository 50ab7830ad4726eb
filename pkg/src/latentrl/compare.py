"""Cross-run comparison: align learning curves on compute or step axes.

Reads the metrics.csv files written by the runner, interpolates evaluation
return onto a shared axis (cumulative multiply-accumulates or environment
steps), and aggregates across seeds. Values beyond a run's last sample are
clamped to its final value rather than extrapolated.
"""

import csv
import json
import os

import numpy as np

ENV_KEYS = ("env_id", "grid_size", "render_size", "frame_stack", "episode_cap")


def read_metrics(csv_path):
    """Parse one metrics.csv into a dict of numpy columns."""
    rows = []
    with open(csv_path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            rows.append(row)
    if not rows:
        raise ValueError(f"no rows in {csv_path}")
    out = {
        "step": np.asarray([int(r["step"]) for r in rows], dtype=np.int64),
        "cumulative_macs": np.asarray([int(r["cumulative_macs"]) for r in rows],
                                      dtype=np.int64),
    }
    ev_steps, ev_macs, ev_vals = [], [], []
    for r in rows:
        if r["eval_mean_return"] != "":
            ev_steps.append(int(r["step"]))
            ev_macs.append(int(r["cumulative_macs"]))
            ev_vals.append(float(r["eval_mean_return"]))
    if not ev_vals:
        raise ValueError(f"no evaluation samples in {csv_path}")
    out["eval_steps"] = np.asarray(ev_steps, dtype=np.float64)
    out["eval_macs"] = np.asarray(ev_macs, dtype=np.float64)
    out["eval_means"] = np.asarray(ev_vals, dtype=np.float64)
    return out


def seed_dirs(run_root):
    names = sorted(n for n in os.listdir(run_root)
                   if n.startswith("seed_") and os.path.isdir(os.path.join(run_root, n)))
    if not names:
        raise ValueError(f"no seed_* directories under {run_root}")
    return [os.path.join(run_root, n) for n in names]


def load_run(run_root):
    """Load config + per-seed metrics for one experiment directory."""
    with open(os.path.join(run_root, "config.json"), "r", encoding="utf-8") as f:
        cfg = json.load(f)
    metrics = [read_metrics(os.path.join(d, "metrics.csv")) for d in seed_dirs(run_root)]
    return cfg, metrics

def value_at(metrics, axis, point):
    """Interpolated eval return at a point on the macs or steps axis (clamped)."""
    x = metrics["eval_macs"] if axis == "macs" else metrics["eval_steps"]
    return float(np.interp(float(point), x, metrics["eval_means"]))


def aggregate_at(metrics_list, axis, point):
    vals = np.asarray([value_at(m, axis, point) for m in metrics_list], dtype=np.float64)
    return float(vals.mean()), float(vals.std()), vals.tolist()


def check_env_match(cfg_a, cfg_b):
    diffs = [k for k in ENV_KEYS if cfg_a.get(k) != cfg_b.get(k)]
    if diffs:
        raise ValueError("runs use different environments; mismatched keys: "
                         + ", ".join(diffs))


def compare_runs(root_a, root_b, at_macs=None, at_steps=None):
    """Compare two experiment directories at matched compute and matched steps."""
    cfg_a, met_a = load_run(root_a)
    cfg_b, met_b = load_run(root_b)
    check_env_match(cfg_a, cfg_b)
    if at_macs is None:
        at_macs = min(min(m["eval_macs"][-1] for m in met_a),
                      min(m["eval_macs"][-1] for m in met_b))
    if at_steps is None:
        at_steps = min(min(m["eval_steps"][-1] for m in met_a),
                       min(m["eval_steps"][-1] for m in met_b))
    result = {"a": root_a, "b": root_b, "at_macs": float(at_macs),
              "at_steps": float(at_steps), "n_seeds_a": len(met_a),
              "n_seeds_b": len(met_b)}
    for axis, point in (("macs", at_macs), ("steps", at_steps)):
        mean_a, std_a, vals_a = aggregate_at(met_a, axis, point)
        mean_b, std_b, vals_b = aggregate_at(met_b, axis, point)
        result[f"{axis}_a_mean"] = mean_a
        result[f"{axis}_a_std"] = std_a
        result[f"{axis}_a_values"] = vals_a
        result[f"{axis}_b_mean"] = mean_b
        result[f"{axis}_b_std"] = std_b
        result[f"{axis}_b_values"] = vals_b
    return result


def format_table(result):
    lines = [
        f"A: {result['a']}  ({result['n_seeds_a']} seeds)",
        f"B: {result['b']}  ({result['n_seeds_b']} seeds)",
        "",
        f"{'axis':<22}{'A mean +/- std':>22}{'B mean +/- std':>22}",
    ]
    for axis, point_key in (("macs", "at_macs"), ("steps", "at_steps")):
        label = f"{axis} @ {result[point_key]:.6g}"
        a = f"{result[f'{axis}_a_mean']:.4f} +/- {result[f'{axis}_a_std']:.4f}"
        b = f"{result[f'{axis}_b_mean']:.4f} +/- {result[f'{axis}_b_std']:.4f}"
        lines.append(f"{label:<22}{a:>22}{b:>22}")
    return "\n".join(lines)
