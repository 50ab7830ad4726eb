"""Experiment runner: seeded training loop, evaluation, CSV metrics.

Loop order per step t (1-based): act, env step, store transition (image
before the freeze step, latents after), freeze-and-convert exactly at the
freeze step, gradient update(s), target sync, episode reset bookkeeping,
evaluation, logging. With one update per step this reproduces the cost
model's per-iteration sums exactly; evaluation rollouts are never charged.

Every random stream is derived as PCG64(SeedSequence([seed, crc32(tag)])),
tags "env", "act", "init", "sample", "augment", "convert"; evaluation number
i uses SeedSequence([seed, crc32("eval"), i]). Identical (config, seed)
therefore reproduce byte-identical metrics files.
"""

import csv
import json
import math
import os
import zlib

import numpy as np

from .accounting import CostLedger, FlopModel
from .agent import DqnAgent
from .checkpoint import save_checkpoint
from .config import effective_aug, save_config, validate_config
from .envs import make_env
from .nn import build_network, forward_full, param_flops
from .replay import ReplayBuffer

CSV_COLUMNS = ("step", "episode_return", "eval_mean_return", "cumulative_macs",
               "bytes_used", "buffer_occupancy", "epsilon", "phase")


def stream(master_seed, tag, extra=None):
    entropy = [int(master_seed), zlib.crc32(tag.encode("utf-8"))]
    if extra is not None:
        entropy.append(int(extra))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def build_env(cfg, rng):
    return make_env(cfg.env_id, rng, cfg.grid_size, cfg.render_size, cfg.frame_stack,
                    cfg.episode_cap)


def build_spec(cfg, env):
    return build_network((env.frame_stack,) + env.frame_shape, cfg.conv_channels,
                         cfg.conv_kernels, cfg.conv_strides, cfg.conv_paddings,
                         cfg.latent_dim, cfg.head_hidden, env.n_actions)


def evaluate(spec, params, cfg, master_seed, eval_index):
    """Greedy rollouts on a fresh env; deterministic given (config, seed, index)."""
    rng = stream(master_seed, "eval", eval_index)
    env = build_env(cfg, rng)
    returns = []
    for _ in range(cfg.eval_episodes):
        obs = env.reset()
        done = False
        total = 0.0
        while not done:
            x = np.asarray(obs, dtype=np.float32) / np.float32(255.0)
            q, _, _ = forward_full(x[None], spec, params)
            obs, reward, done = env.step(int(np.argmax(q[0])))
            total += reward
        returns.append(total)
    arr = np.asarray(returns, dtype=np.float64)
    return float(arr.mean()), float(arr.std()), returns


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run(config, seed, out_dir, step_hook=None):
    """Train one seed; writes metrics.csv, summary.json and checkpoint.bin."""
    validate_config(config)
    os.makedirs(out_dir, exist_ok=True)
    pad, k = effective_aug(config)
    seer = config.mode == "seer"

    rng_act = stream(seed, "act")
    rng_sample = stream(seed, "sample")
    rng_augment = stream(seed, "augment")
    rng_convert = stream(seed, "convert")
    env = build_env(config, stream(seed, "env"))
    spec = build_spec(config, env)
    e_macs, m_macs = param_flops(spec)
    model = FlopModel(e_macs, m_macs, config.batch_size,
                      forwards=3 if config.double_q else 2, backwards=1, k=k, n=1)
    buffer = ReplayBuffer(env.frame_shape, env.frame_stack, config.capacity,
                          config.latent_dim, k=k, byte_budget=config.byte_budget)
    ledger = CostLedger(model, freeze_step=config.freeze_step if seer else None,
                        image_capacity=buffer.capacity)
    agent = DqnAgent(spec, stream(seed, "init"), ledger=ledger, gamma=config.gamma,
                     lr=config.learning_rate, batch_size=config.batch_size,
                     epsilon_start=config.epsilon_start, epsilon_end=config.epsilon_end,
                     epsilon_decay_steps=config.epsilon_decay_steps,
                     warmup_steps=config.initial_random_steps,
                     aug_pad=pad, aug_k=k, double_q=config.double_q)

    conversion_stats = None
    obs = env.reset()
    buffer.begin_episode(obs[-1])
    if seer and config.freeze_step == 0:
        # degenerate corner: freeze before any experience; head-only from scratch
        agent.freeze()
        conversion_stats = buffer.convert_to_latent(agent.encode_batch, pad, rng_convert)
        ledger.record("conversion")
        agent.set_z_cache(*agent.encode_for_storage(obs, rng_augment))

    episode_return = 0.0
    last_episode_return = None
    episodes = 0
    evals = []
    last_loss = None

    csv_path = os.path.join(out_dir, "metrics.csv")
    csv_file = open(csv_path, "w", encoding="utf-8", newline="")
    writer = csv.writer(csv_file, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)

    def fail(reason, step):
        summary = {"status": reason, "seed": seed, "mode": config.mode, "failed_at_step": step}
        with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
            f.write("\n")
        csv_file.close()

    try:
        for t in range(1, config.total_steps + 1):
            if t <= config.initial_random_steps:
                action = int(rng_act.integers(env.n_actions))
            else:
                action = agent.act(obs, t, rng_act)
            next_obs, reward, done = env.step(action)
            episode_return += reward

            if not agent.frozen:
                buffer.push_image(next_obs[-1], action, reward, done)
            else:
                z_next, off_next = agent.encode_for_storage(next_obs, rng_augment)
                buffer.push_latent(agent.z_cache, action, reward, z_next, done,
                                   agent.z_cache_offsets, off_next)
                agent.set_z_cache(z_next, off_next)

            if seer and t == config.freeze_step:
                agent.freeze()
                conversion_stats = buffer.convert_to_latent(agent.encode_batch, pad,
                                                            rng_convert)
                ledger.record("conversion")
                if buffer.occupancy > 0:
                    agent.set_z_cache(*buffer.newest_latents())
                else:
                    agent.set_z_cache(*agent.encode_for_storage(next_obs, rng_augment))

            if t > config.initial_random_steps:
                for _ in range(config.updates_per_step):
                    if agent.frozen:
                        if buffer.is_ready(config.batch_size):
                            batch = buffer.sample_latent_batch(config.batch_size, rng_sample)
                            last_loss = agent.update_post_freeze(batch)
                    elif buffer.is_ready(config.batch_size):
                        batch = buffer.sample_image_batch(config.batch_size, rng_sample)
                        last_loss = agent.update_pre_freeze(batch, rng_augment)
                    if last_loss is not None and math.isnan(last_loss):
                        raise FloatingPointError(f"NaN loss at step {t}")

            if t % config.target_sync_period == 0:
                agent.target_sync()

            if done:
                last_episode_return = episode_return
                episode_return = 0.0
                episodes += 1
                obs = env.reset()
                buffer.begin_episode(obs[-1])
                if agent.frozen:
                    agent.set_z_cache(*agent.encode_for_storage(obs, rng_augment))
            else:
                obs = next_obs

            eval_mean = None
            if t % config.eval_interval == 0:
                eval_mean, eval_std, _ = evaluate(spec, agent.params, config, seed,
                                                  t // config.eval_interval)
                evals.append((t, eval_mean, eval_std))

            if step_hook is not None:
                step_hook(t, agent, buffer, ledger)

            if t % config.log_interval == 0:
                ledger.note_bytes(t, buffer.bytes_used)
                writer.writerow([
                    t, _fmt(last_episode_return), _fmt(eval_mean), ledger.total_macs,
                    buffer.bytes_used, buffer.occupancy, _fmt(agent.epsilon(t)),
                    "post_freeze" if agent.frozen else "pre_freeze",
                ])
    except FloatingPointError as exc:
        fail(f"failed: {exc}", t)
        raise
    csv_file.close()

    meta = {"env_id": config.env_id, "grid_size": env.grid_size,
            "render_size": env.render_size, "frame_stack": env.frame_stack,
            "episode_cap": env.episode_cap, "n_actions": env.n_actions,
            "seed": seed, "mode": config.mode, "step": config.total_steps,
            "frozen": agent.frozen}
    save_checkpoint(os.path.join(out_dir, "checkpoint.bin"), spec, agent.params,
                    agent.target, meta)

    summary = {
        "status": "ok",
        "seed": seed,
        "mode": config.mode,
        "total_steps": config.total_steps,
        "episodes": episodes,
        "encoder_macs": e_macs,
        "head_macs": m_macs,
        "total_macs": ledger.total_macs,
        "macs_breakdown": ledger.breakdown,
        "event_counts": ledger.counts,
        "final_bytes_used": buffer.bytes_used,
        "buffer_capacity": buffer.capacity,
        "buffer_mode": buffer.mode,
        "freeze_events": agent.freeze_events,
        "degenerate_freeze": bool(seer and config.freeze_step == 0),
        "conversion": conversion_stats,
        "eval_steps": [e[0] for e in evals],
        "eval_means": [e[1] for e in evals],
        "eval_stds": [e[2] for e in evals],
        "final_eval_mean": evals[-1][1] if evals else None,
        "final_eval_std": evals[-1][2] if evals else None,
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return summary


def run_many(config, seeds, out_root, step_hook=None):
    """Run several seeds into out_root/seed_<n>/ and echo the config at the root."""
    os.makedirs(out_root, exist_ok=True)
    save_config(config, os.path.join(out_root, "config.json"))
    return [run(config, s, os.path.join(out_root, f"seed_{s}"), step_hook=step_hook)
            for s in seeds]
