"""Encoder diagnostics: spatial attention maps exported as plain PGM images.

The attention map of a conv activation tensor (C, H', W') is the channel mean
of absolute activations followed by a softmax over all spatial positions
jointly, so entries are positive and sum to 1. Maps are taken from
post-activation outputs (what the next layer actually sees).
"""

import os
import zlib

import numpy as np

from .checkpoint import load_checkpoint
from .envs import make_env
from .nn import ConvSpec, ReluSpec, _run_layers, forward_full


def attention_map(activations):
    """Channel-mean of |activations| then a stable 2-D softmax; sums to 1."""
    activations = np.asarray(activations)
    if activations.ndim != 3:
        raise ValueError(f"expected (C, H, W) activations, got shape {activations.shape}")
    pooled = np.mean(np.abs(activations), axis=0).astype(np.float64)
    flat = pooled.reshape(-1)
    shifted = flat - flat.max()
    e = np.exp(shifted)
    return (e / e.sum()).reshape(pooled.shape)


def export_pgm(map2d, path):
    """Write a plain-text (P2) graymap, max-normalized to 0..255."""
    m = np.asarray(map2d, dtype=np.float64)
    vmax = float(m.max())
    if vmax <= 0:
        raise ValueError("map must contain a positive value")
    pixels = np.rint(m / vmax * 255.0).astype(np.int64)
    h, w = pixels.shape
    lines = ["P2", f"{w} {h}", "255"]
    lines.extend(" ".join(str(v) for v in row) for row in pixels)
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")


def parse_pgm(path):
    """Read a plain P2 graymap back as an integer array of shape (H, W)."""
    with open(path, "r", encoding="ascii") as f:
        tokens = []
        for line in f:
            line = line.split("#", 1)[0]
            tokens.extend(line.split())
    if not tokens or tokens[0] != "P2":
        raise ValueError("not a plain PGM (P2) file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    values = np.array([int(t) for t in tokens[4:4 + w * h]], dtype=np.int64)
    if values.size != w * h or values.max(initial=0) > maxval:
        raise ValueError("malformed PGM payload")
    return values.reshape(h, w)


def conv_activations(x, spec, params, layer_index=None):
    """Post-activation output of the layer_index-th conv layer (default: last).

    x is a single prepared observation (C, H, W) in float.
    """
    outputs = []
    cur = x
    for layer, p in zip(spec.encoder_layers, params.encoder):
        cur, _ = _run_layers(cur, (layer,), (p,))
        outputs.append((layer, cur))
    conv_outs = []
    for i, (layer, out) in enumerate(outputs):
        if isinstance(layer, ConvSpec):
            chosen = out
            if i + 1 < len(outputs) and isinstance(outputs[i + 1][0], ReluSpec):
                chosen = outputs[i + 1][1]
            conv_outs.append(chosen)
    if not conv_outs:
        raise ValueError("network has no conv layers")
    idx = len(conv_outs) - 1 if layer_index is None else layer_index
    return conv_outs[idx]


def analyze_checkpoint(ckpt_path, obs_index=0, out_path=None, layer_index=None):
    """Greedy-rollout to the obs_index-th observation and export its attention map.

    The rollout environment is rebuilt from checkpoint metadata with a fixed
    derived seed, so the same checkpoint and index always yield the same map.
    Returns (pgm path, attention map).
    """
    spec, params, _, meta = load_checkpoint(ckpt_path)
    seed = int(meta.get("seed", 0))
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed, zlib.crc32(b"analysis")])))
    env = make_env(meta["env_id"], rng, meta.get("grid_size"), meta.get("render_size"),
                   meta.get("frame_stack"), meta.get("episode_cap", 0))
    obs = env.reset()
    for _ in range(obs_index):
        x = np.asarray(obs, dtype=np.float32) / np.float32(255.0)
        q, _, _ = forward_full(x[None], spec, params)
        obs, _, done = env.step(int(np.argmax(q[0])))
        if done:
            obs = env.reset()
    x = np.asarray(obs, dtype=np.float32) / np.float32(255.0)
    amap = attention_map(conv_activations(x, spec, params, layer_index))
    if out_path is None:
        base = os.path.dirname(os.path.abspath(ckpt_path))
        out_path = os.path.join(base, f"attention_obs{obs_index}.pgm")
    export_pgm(amap, out_path)
    return out_path, amap
