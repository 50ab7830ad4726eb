"""Shared test helpers: seeded RNGs, random small networks, finite differences."""

import numpy as np

from latentrl.nn import (backward_from_loss, build_network, conv_out_size,
                         forward_full, init_params)


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def fill_from_env(buffer, n_steps, seed, env_id="catch", **env_kw):
    """Drive an environment with random actions, pushing every transition.

    Returns the transitions as (obs, action, reward, next_obs, done) tuples
    for shadow comparison against what the buffer later reconstructs.
    """
    from latentrl.envs import make_env

    env = make_env(env_id, make_rng(seed), **env_kw)
    act = make_rng(seed + 1)
    shadow = []
    obs = env.reset()
    buffer.begin_episode(obs[-1])
    for _ in range(n_steps):
        a = int(act.integers(env.n_actions))
        next_obs, r, done = env.step(a)
        buffer.push_image(next_obs[-1], a, r, done)
        shadow.append((obs, a, r, next_obs, done))
        if done:
            obs = env.reset()
            buffer.begin_episode(obs[-1])
        else:
            obs = next_obs
    return shadow


def random_small_spec(rng):
    """A random conv->dense network small enough for coordinate-wise checks."""
    while True:
        stack = int(rng.integers(1, 4))
        size = int(rng.integers(5, 11))
        n_conv = int(rng.integers(1, 3))
        chans, kerns, strides, pads = [], [], [], []
        cur = size
        ok = True
        for _ in range(n_conv):
            k = int(rng.integers(2, 4))
            st = int(rng.integers(1, 3))
            p = int(rng.integers(0, 2))
            try:
                nxt = conv_out_size(cur, k, st, p)
            except ValueError:  # output would collapse; redraw the whole spec
                ok = False
                break
            chans.append(int(rng.integers(2, 5)))
            kerns.append(k)
            strides.append(st)
            pads.append(p)
            cur = nxt
        if not ok:
            continue
        latent = int(rng.integers(3, 7))
        hidden = tuple(int(rng.integers(3, 7)) for _ in range(int(rng.integers(0, 3))))
        actions = int(rng.integers(2, 5))
        return build_network((stack, size, size), tuple(chans), tuple(kerns),
                             tuple(strides), tuple(pads), latent, hidden, actions)


def param_tensors(params):
    """Yield (name, array) for every trainable tensor, in a fixed order."""
    for name, group in (("encoder", params.encoder), ("head", params.head)):
        for i, p in enumerate(group):
            if p is None:
                continue
            for key in ("w", "b"):
                yield f"{name}[{i}].{key}", p[key]


def analytic_grads(spec, params, x, proj):
    """Gradient of sum(q * proj) w.r.t. every parameter, via backprop."""
    q, _, cache = forward_full(x, spec, params)
    grads = backward_from_loss(proj.astype(q.dtype, copy=True), cache, spec, params)
    out = {}
    for name, group in (("encoder", grads.encoder), ("head", grads.head)):
        for i, g in enumerate(group):
            if g is None:
                continue
            out[f"{name}[{i}].w"] = g["w"]
            out[f"{name}[{i}].b"] = g["b"]
    return out


def projection_loss(spec, params, x, proj):
    q, _, _ = forward_full(x, spec, params)
    return float(np.sum(q * proj))


def _relu_kink_margin(spec, params, x):
    """Smallest |pre-activation| over every relu in the network."""
    from latentrl.nn import ReluSpec

    _, _, cache = forward_full(x, spec, params)
    margin = np.inf
    for layers, caches in ((spec.encoder_layers, cache.encoder),
                           (spec.head_layers, cache.head)):
        for layer, c in zip(layers, caches):
            if isinstance(layer, ReluSpec):
                margin = min(margin, float(np.min(np.abs(c))))
    return margin


def gradcheck_spec(spec, seed, h=1e-5, batch=2):
    """Worst relative error between backprop and central differences.

    Returns (worst_rel_error, n_coordinates). Double precision throughout;
    near-zero pairs are compared against a 1e-3 denominator floor so the
    ratio stays meaningful.

    Central differences are only valid away from relu kinks: a +-h parameter
    nudge moves any pre-activation by O(h), so inputs are redrawn (and biases
    de-zeroed) until every pre-activation clears the kink by a margin much
    larger than that. At the kink itself the subgradient convention makes the
    analytic and one-sided numeric values legitimately differ.
    """
    rng = make_rng(seed)
    params = init_params(spec, rng, dtype=np.float64)
    for _, arr in param_tensors(params):
        if arr.ndim == 1:
            arr[:] = 0.1 * rng.standard_normal(arr.shape)
    x = rng.standard_normal((batch,) + tuple(spec.input_shape))
    for _ in range(200):
        if _relu_kink_margin(spec, params, x) > 1e-3:
            break
        x = rng.standard_normal((batch,) + tuple(spec.input_shape))
    else:
        raise RuntimeError("could not find a kink-free input for this configuration")
    proj = rng.standard_normal((batch, spec.n_actions))
    ana = analytic_grads(spec, params, x, proj)
    worst = 0.0
    checked = 0
    for name, arr in param_tensors(params):
        g_flat = ana[name].reshape(-1)
        flat = arr.reshape(-1)
        for idx in range(flat.size):
            old = flat[idx]
            flat[idx] = old + h
            lp = projection_loss(spec, params, x, proj)
            flat[idx] = old - h
            lm = projection_loss(spec, params, x, proj)
            flat[idx] = old
            g_num = (lp - lm) / (2.0 * h)
            g_bp = float(g_flat[idx])
            rel = abs(g_num - g_bp) / max(abs(g_num), abs(g_bp), 1e-3)
            worst = max(worst, rel)
            checked += 1
    return worst, checked
