"""DQN agent with an encoder-freeze lifecycle.

Before the freeze step the full network trains on image batches; at the
freeze step the encoder becomes immutable and the replay buffer converts to
latent storage; afterwards only the head trains, on stored latent batches.
The same stored latent feeds both the online and the target head (their
head parameters stay separate and keep syncing).

The latent-batch update and the recompute-from-images update share the exact
same head arithmetic, so with a frozen encoder and identical augmentation
offsets the two produce bit-identical losses, gradients and parameter
updates. That equality is the correctness contract of latent replay: it
changes cost, not semantics.
"""

import numpy as np

from .augment import draw_offsets, shift_crop
from .nn import (ForwardCache, adam_step, backward_from_loss, clone_params, forward_encoder,
                 forward_full, forward_head_only, init_adam, init_params)


def td_target(reward, next_q_values, done, gamma):
    """y = r if done else r + gamma * max(next_q)."""
    if done:
        return reward
    return reward + gamma * float(np.max(next_q_values))


class DqnAgent:
    def __init__(self, spec, rng_init, ledger=None, gamma=0.99, lr=1e-3, batch_size=32,
                 epsilon_start=1.0, epsilon_end=0.05, epsilon_decay_steps=6000,
                 warmup_steps=0, aug_pad=0, aug_k=1, double_q=False, dtype=np.float32):
        self.spec = spec
        self.n_actions = spec.n_actions
        self.dtype = dtype
        self.params = init_params(spec, rng_init, dtype)
        self.target = clone_params(self.params)
        self.adam = init_adam(self.params, lr)
        self.ledger = ledger
        self.gamma = gamma
        self.batch_size = batch_size
        self.epsilon_start = epsilon_start
        self.epsilon_end = epsilon_end
        self.epsilon_decay_steps = epsilon_decay_steps
        self.warmup_steps = warmup_steps
        self.aug_pad = aug_pad
        self.aug_k = aug_k
        self.double_q = double_q
        self.frozen = False
        self.freeze_events = 0
        self._z_cache = None
        self._z_cache_off = None
        self.last_loss = None
        self.last_update_grads = None

    # -- acting ------------------------------------------------------------

    def epsilon(self, t):
        progress = max(0, t - self.warmup_steps) / self.epsilon_decay_steps
        return self.epsilon_end + (self.epsilon_start - self.epsilon_end) \
            * max(0.0, 1.0 - progress)

    def _prep(self, obs_u8):
        return np.asarray(obs_u8, dtype=self.dtype) / self.dtype(255.0)

    def act(self, obs, t, rng):
        """Epsilon-greedy action; the q forward pass always runs and is charged."""
        q, _, _ = forward_full(self._prep(obs)[None], self.spec, self.params)
        if self.ledger is not None:
            self.ledger.record("action_forward")
        if rng.random() < self.epsilon(t):
            return int(rng.integers(self.n_actions))
        return int(np.argmax(q[0]))

    def greedy_action(self, obs):
        """Evaluation-time argmax action; not cost-tracked."""
        q, _, _ = forward_full(self._prep(obs)[None], self.spec, self.params)
        return int(np.argmax(q[0]))

    # -- shared update math --------------------------------------------------

    def _td_loss_grad(self, q_t, actions, rewards, next_val, dones):
        b = q_t.shape[0]
        rows = np.arange(b)
        not_done = (~dones).astype(q_t.dtype)
        y = rewards.astype(q_t.dtype) + q_t.dtype.type(self.gamma) * next_val * not_done
        diff = q_t[rows, actions] - y
        loss = float(np.mean(diff * diff))
        grad_q = np.zeros_like(q_t)
        grad_q[rows, actions] = diff * q_t.dtype.type(2.0 / b)
        return loss, grad_q

    def _next_value_from_q(self, q_next_target, q_next_online):
        if self.double_q:
            best = np.argmax(q_next_online, axis=1)
            return q_next_target[np.arange(q_next_target.shape[0]), best]
        return np.max(q_next_target, axis=1)

    def _update_from_latents(self, z_t, actions, rewards, z_next, dones):
        q_t, head_cache = forward_head_only(z_t, self.spec, self.params, want_cache=True)
        q_next_target, _ = forward_head_only(z_next, self.spec, self.target)
        q_next_online = None
        if self.double_q:
            q_next_online, _ = forward_head_only(z_next, self.spec, self.params)
        next_val = self._next_value_from_q(q_next_target, q_next_online)
        loss, grad_q = self._td_loss_grad(q_t, actions, rewards, next_val, dones)
        cache = ForwardCache(encoder=[], head=head_cache, latent=z_t)
        grads = backward_from_loss(grad_q, cache, self.spec, self.params,
                                   stop_at_freeze_boundary=True)
        adam_step(self.params, grads, self.adam)
        self.last_loss = loss
        self.last_update_grads = grads
        return loss

    # -- image-phase update --------------------------------------------------

    def update_pre_freeze(self, batch, rng_augment, offsets=None):
        """Full-network update on an image batch.

        One augmentation offset per transition, applied to both o_t and
        o_{t+1}; `offsets` overrides the draws (used by tests).
        """
        if self.frozen:
            raise RuntimeError("image update requested after the encoder froze")
        obs_u8, next_u8 = batch["obs"], batch["next_obs"]
        b = obs_u8.shape[0]
        if self.aug_pad > 0:
            offs = draw_offsets(self.aug_pad, b, rng_augment) if offsets is None else offsets
            obs_u8 = np.stack([shift_crop(obs_u8[i], offs[i], self.aug_pad) for i in range(b)])
            next_u8 = np.stack([shift_crop(next_u8[i], offs[i], self.aug_pad) for i in range(b)])
        x_t = self._prep(obs_u8)
        x_next = self._prep(next_u8)
        q_t, _, cache = forward_full(x_t, self.spec, self.params)
        q_next_target, _, _ = forward_full(x_next, self.spec, self.target)
        q_next_online = None
        if self.double_q:
            q_next_online, _, _ = forward_full(x_next, self.spec, self.params)
        next_val = self._next_value_from_q(q_next_target, q_next_online)
        loss, grad_q = self._td_loss_grad(q_t, batch["actions"], batch["rewards"], next_val,
                                          batch["dones"])
        grads = backward_from_loss(grad_q, cache, self.spec, self.params,
                                   stop_at_freeze_boundary=False)
        adam_step(self.params, grads, self.adam)
        self.last_loss = loss
        self.last_update_grads = grads
        if self.ledger is not None:
            self.ledger.record("pre_update")
        return loss

    # -- latent-phase update ---------------------------------------------------

    def update_post_freeze(self, batch):
        """Head-only update on a latent batch; stored z_{t+1} feeds both heads."""
        if not self.frozen:
            raise RuntimeError("latent update requested before the encoder froze")
        loss = self._update_from_latents(batch["z_t"], batch["actions"], batch["rewards"],
                                         batch["z_next"], batch["dones"])
        if self.ledger is not None:
            self.ledger.record("post_update")
        return loss

    def update_from_images_frozen(self, obs_u8, actions, rewards, next_u8, dones,
                                  off_t, off_next):
        """Verification route: recompute latents from images through the frozen
        encoder with the given offsets, then run the identical head update.
        Not cost-tracked; exists so latent-batch updates can be checked
        bit-for-bit against the image path."""
        if not self.frozen:
            raise RuntimeError("frozen-image update requires a frozen encoder")
        z_t = self.encode_batch(obs_u8, off_t[:, None, :])[:, 0]
        z_next = self.encode_batch(next_u8, off_next[:, None, :])[:, 0]
        return self._update_from_latents(z_t, actions, rewards, z_next, dones)

    # -- encoding for storage ---------------------------------------------------

    def encode_batch(self, obs_u8, offsets):
        """Latents for n observations under per-observation offsets (n, K, 2).

        Runs the strict-arithmetic encoder path, so each output row depends
        only on its own observation and the batching here never changes the
        stored bits.
        """
        n, k = obs_u8.shape[0], offsets.shape[1]
        out = np.empty((n, k, self.spec.latent_dim), dtype=self.dtype)
        for ki in range(k):
            if self.aug_pad > 0:
                crops = np.stack([shift_crop(obs_u8[i], offsets[i, ki], self.aug_pad)
                                  for i in range(n)])
            else:
                crops = obs_u8
            z, _ = forward_encoder(self._prep(crops), self.spec, self.params, exact=True)
            out[:, ki, :] = z
        return out

    def encode_for_storage(self, obs_u8, rng):
        """(K latents, offsets) for one new observation, drawing K fresh offsets."""
        offsets = draw_offsets(self.aug_pad, self.aug_k, rng)
        z = self.encode_batch(obs_u8[None], offsets[None])[0]
        return z, offsets

    def set_z_cache(self, z, offsets):
        self._z_cache = z
        self._z_cache_off = offsets

    @property
    def z_cache(self):
        return self._z_cache

    @property
    def z_cache_offsets(self):
        return self._z_cache_off

    # -- lifecycle ---------------------------------------------------------------

    def freeze(self):
        if self.frozen:
            raise RuntimeError("freeze event fired twice")
        self.frozen = True
        self.params.frozen_encoder = True
        self.target.frozen_encoder = True
        self.freeze_events += 1

    def target_sync(self):
        """Hard copy online -> target; encoder copies stop once frozen."""
        groups = [(self.params.head, self.target.head)]
        if not self.frozen:
            groups.append((self.params.encoder, self.target.encoder))
        for src, dst in groups:
            for ps, pd in zip(src, dst):
                if ps is None:
                    continue
                np.copyto(pd["w"], ps["w"])
                np.copyto(pd["b"], ps["b"])

    def encoder_bytes(self):
        """Bitwise fingerprint of the encoder parameters."""
        chunks = []
        for p in self.params.encoder:
            if p is not None:
                chunks.append(p["w"].tobytes())
                chunks.append(p["b"].tobytes())
        return b"".join(chunks)
