"""Dual-mode experience replay with byte accounting.

Image mode stores frames once in a ring (stacked observations of consecutive
transitions share frames) and transitions as index records; latent mode stores
K augmented latent vectors per observation. The buffer converts from image to
latent mode exactly once, growing its transition capacity to

    new_capacity = floor(C * P / (4 * N * K * L))

where C is the image-mode transition capacity, P the bytes of one raw frame,
L the latent length, K the augmentation count and N the encoder count (1 for
Q-learning). A latent transition physically holds both z_t and z_{t+1}
(2 * 4 * K * L bytes), so under a byte budget the latent capacity is
additionally capped at budget // (8 * K * L).
"""

import numpy as np

from .augment import draw_offsets

CONVERT_CHUNK = 512


class NotReady(Exception):
    """Raised when a sample is requested before the buffer holds enough data."""


def computed_capacity(c, p, n, k, latent_dim):
    """Adaptive latent capacity floor(C*P / (4*N*K*L)), exact integer arithmetic."""
    if min(c, p, n, k, latent_dim) <= 0:
        raise ValueError("all capacity parameters must be positive")
    return (c * p) // (4 * n * k * latent_dim)


def capacity_for_budget(byte_budget, mode, frame_bytes=None, latent_dim=None, k=1):
    """Whole transitions fitting in a byte budget.

    Image mode counts one frame per transition (frame-wise storage); latent
    mode counts 8*K*L bytes (z_t and z_{t+1}, 4-byte floats).
    """
    if byte_budget <= 0:
        raise ValueError("byte budget must be positive")
    if mode == "image":
        per = frame_bytes
    elif mode == "latent":
        per = 8 * k * latent_dim
    else:
        raise ValueError(f"unknown mode {mode!r}")
    cap = byte_budget // per
    if cap < 1:
        raise ValueError(f"budget {byte_budget} below one {mode} transition ({per} bytes)")
    return cap


class ReplayBuffer:
    def __init__(self, frame_shape, frame_stack, capacity, latent_dim, k=1,
                 n_encoders=1, byte_budget=None):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.frame_shape = tuple(frame_shape)
        self.frame_bytes = int(np.prod(frame_shape))
        self.frame_stack = frame_stack
        self.latent_dim = latent_dim
        self.k = k
        self.n_encoders = n_encoders
        self.byte_budget = byte_budget
        if byte_budget is not None:
            capacity = min(capacity, capacity_for_budget(byte_budget, "image",
                                                         frame_bytes=self.frame_bytes))
        self.capacity = capacity
        self.mode = "image"

        ring = 2 * capacity + frame_stack + 4
        self._ring = ring
        self._frames = np.zeros((ring,) + self.frame_shape, dtype=np.uint8)
        self._frames_total = 0
        self._ep_start = 0
        self._episode_open = False

        self._t_next_frame = np.zeros(capacity, dtype=np.int64)
        self._t_ep_start = np.zeros(capacity, dtype=np.int64)
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity, dtype=np.float32)
        self._dones = np.zeros(capacity, dtype=bool)
        self._total = 0
        self._count = 0

        self._z_t = None
        self._z_next = None
        self._off_t = None
        self._off_next = None
        self.conversion_peak_bytes = None
        self.converted_transitions = None
        self.boundary_encodes = None

    # -- shared state ------------------------------------------------------

    @property
    def occupancy(self):
        return self._count

    def is_ready(self, batch):
        return self._count >= batch

    def _slot(self, logical):
        return (self._total - self._count + logical) % self.capacity

    def latent_capacity(self):
        cap = computed_capacity(self.capacity, self.frame_bytes, self.n_encoders,
                                self.k, self.latent_dim)
        if self.byte_budget is not None:
            cap = min(cap, capacity_for_budget(self.byte_budget, "latent",
                                               latent_dim=self.latent_dim, k=self.k))
        return cap

    @property
    def bytes_used(self):
        if self.mode == "latent":
            return self._count * 8 * self.k * self.latent_dim
        return (self._frames_total - self._min_live_frame()) * self.frame_bytes

    # -- image mode --------------------------------------------------------

    def _trans_min_frame(self, logical):
        slot = self._slot(logical)
        return int(max(self._t_ep_start[slot], self._t_next_frame[slot] - self.frame_stack))

    def _min_live_frame(self):
        if self._frames_total == 0:
            return 0
        tail = max(self._ep_start, self._frames_total - self.frame_stack) \
            if self._episode_open else self._frames_total
        if self._count == 0:
            return tail
        return min(self._trans_min_frame(0), tail)

    def _store_frame(self, frame):
        window = self._frames_total - self._min_live_frame()
        if window >= self._ring:
            raise RuntimeError("frame ring overrun; this is a bug")
        self._frames[self._frames_total % self._ring] = frame
        self._frames_total += 1

    def begin_episode(self, first_frame):
        """Register a reset: the stack at episode start repeats this frame."""
        if self.mode == "latent":
            return
        self._store_frame(first_frame)
        self._ep_start = self._frames_total - 1
        self._episode_open = True
        # The reset frame consumes storage too, so a saturated budget must
        # shed oldest transitions here, not only on push.
        if self.byte_budget is not None:
            while self._count > 0 and self.bytes_used > self.byte_budget:
                self._count -= 1

    def push_image(self, new_frame, action, reward, done):
        if self.mode != "image":
            raise RuntimeError("push_image after conversion to latent mode")
        if not self._episode_open:
            raise RuntimeError("push_image before begin_episode")
        self._store_frame(new_frame)
        slot = self._total % self.capacity
        self._t_next_frame[slot] = self._frames_total - 1
        self._t_ep_start[slot] = self._ep_start
        self._actions[slot] = action
        self._rewards[slot] = reward
        self._dones[slot] = done
        self._total += 1
        self._count = min(self._count + 1, self.capacity)
        if done:
            self._episode_open = False
        if self.byte_budget is not None:
            while self._count > 0 and self.bytes_used > self.byte_budget:
                self._count -= 1

    def _stack(self, newest, ep_start):
        idx = [max(ep_start, newest - (self.frame_stack - 1 - s)) % self._ring
               for s in range(self.frame_stack)]
        return self._frames[idx].copy()

    def get_transition_images(self, logical):
        """(o_t, action, reward, o_next, done) reconstructed for one transition."""
        slot = self._slot(logical)
        nf, ep = self._t_next_frame[slot], self._t_ep_start[slot]
        return (self._stack(nf - 1, ep), int(self._actions[slot]),
                float(self._rewards[slot]), self._stack(nf, ep), bool(self._dones[slot]))

    def sample_image_batch(self, batch, rng):
        if self._count < batch:
            raise NotReady(f"occupancy {self._count} < batch {batch}")
        idx = rng.integers(0, self._count, size=batch)
        obs = np.empty((batch, self.frame_stack) + self.frame_shape, dtype=np.uint8)
        next_obs = np.empty_like(obs)
        slots = np.empty(batch, dtype=np.int64)
        for i, j in enumerate(idx):
            slot = self._slot(j)
            slots[i] = slot
            nf, ep = self._t_next_frame[slot], self._t_ep_start[slot]
            obs[i] = self._stack(nf - 1, ep)
            next_obs[i] = self._stack(nf, ep)
        return {"obs": obs, "actions": self._actions[slots].copy(),
                "rewards": self._rewards[slots].copy(), "next_obs": next_obs,
                "dones": self._dones[slots].copy(), "idx": idx}

    # -- conversion --------------------------------------------------------

    def convert_to_latent(self, encode_batch, aug_pad, rng):
        """Replace image transitions with K augmented latents per observation.

        encode_batch(obs_u8 (n,S,H,W), offsets (n,K,2)) -> (n,K,L) float32.
        Consecutive transitions of one episode share the observation between
        o_{t+1} and the next o_t, so each shared observation is encoded once
        with one set of K offset draws. Offsets are drawn here, in storage
        order, and recorded for later exact recomputation.
        """
        if self.mode != "image":
            raise RuntimeError("convert_to_latent called twice")
        count = self._count
        k, ldim = self.k, self.latent_dim

        job_obs = []
        job_off = []
        pair = np.empty((count, 2), dtype=np.int64)
        carry_key = None
        carry_job = -1
        boundary = 0
        for j in range(count):
            slot = self._slot(j)
            nf, ep = int(self._t_next_frame[slot]), int(self._t_ep_start[slot])
            if carry_key == (nf - 1, ep):
                job_t = carry_job
            else:
                job_obs.append(self._stack(nf - 1, ep))
                job_off.append(draw_offsets(aug_pad, k, rng))
                job_t = len(job_obs) - 1
                boundary += 1
            job_obs.append(self._stack(nf, ep))
            job_off.append(draw_offsets(aug_pad, k, rng))
            job_n = len(job_obs) - 1
            pair[j] = (job_t, job_n)
            carry_key = (nf, ep)
            carry_job = job_n

        n_jobs = len(job_obs)
        latents = np.empty((n_jobs, k, ldim), dtype=np.float32)
        for lo in range(0, n_jobs, CONVERT_CHUNK):
            hi = min(lo + CONVERT_CHUNK, n_jobs)
            latents[lo:hi] = encode_batch(np.stack(job_obs[lo:hi]),
                                          np.stack(job_off[lo:hi]))

        new_cap = self.latent_capacity()
        start = max(0, count - new_cap)
        kept = count - start
        z_t = np.zeros((new_cap, k, ldim), dtype=np.float32)
        z_next = np.zeros((new_cap, k, ldim), dtype=np.float32)
        off_t = np.zeros((new_cap, k, 2), dtype=np.int64)
        off_next = np.zeros((new_cap, k, 2), dtype=np.int64)
        actions = np.zeros(new_cap, dtype=np.int64)
        rewards = np.zeros(new_cap, dtype=np.float32)
        dones = np.zeros(new_cap, dtype=bool)

        peak = self.bytes_used
        per_latent = 8 * k * ldim
        for j in range(count):
            remaining = (self._frames_total - self._trans_min_frame(j)) * self.frame_bytes
            peak = max(peak, remaining + (j + 1) * per_latent)
            if j < start:
                continue
            slot = self._slot(j)
            dst = j - start
            z_t[dst] = latents[pair[j, 0]]
            z_next[dst] = latents[pair[j, 1]]
            off_t[dst] = job_off[pair[j, 0]]
            off_next[dst] = job_off[pair[j, 1]]
            actions[dst] = self._actions[slot]
            rewards[dst] = self._rewards[slot]
            dones[dst] = self._dones[slot]

        self.mode = "latent"
        self.capacity = new_cap
        self._z_t, self._z_next = z_t, z_next
        self._off_t, self._off_next = off_t, off_next
        self._actions, self._rewards, self._dones = actions, rewards, dones
        self._total = kept
        self._count = kept
        self._frames = None
        self.conversion_peak_bytes = peak
        self.converted_transitions = count
        self.boundary_encodes = boundary
        return {"transitions": count, "observations_encoded": n_jobs,
                "boundary_encodes": boundary, "capacity": new_cap}

    # -- latent mode -------------------------------------------------------

    def push_latent(self, z_t, action, reward, z_next, done, off_t=None, off_next=None):
        if self.mode != "latent":
            raise RuntimeError("push_latent before conversion")
        if z_t.shape != (self.k, self.latent_dim) or z_next.shape != (self.k, self.latent_dim):
            raise ValueError(f"latents must have shape ({self.k}, {self.latent_dim})")
        slot = self._total % self.capacity
        self._z_t[slot] = z_t
        self._z_next[slot] = z_next
        if off_t is not None:
            self._off_t[slot] = off_t
        if off_next is not None:
            self._off_next[slot] = off_next
        self._actions[slot] = action
        self._rewards[slot] = reward
        self._dones[slot] = done
        self._total += 1
        self._count = min(self._count + 1, self.capacity)

    def sample_latent_batch(self, batch, rng):
        """Uniform with replacement; one augmentation index k per transition,
        shared by z_t and z_{t+1}. Draw order: transition indices, then ks."""
        if self._count < batch:
            raise NotReady(f"occupancy {self._count} < batch {batch}")
        idx = rng.integers(0, self._count, size=batch)
        ks = rng.integers(0, self.k, size=batch)
        slots = (self._total - self._count + idx) % self.capacity
        return {"z_t": self._z_t[slots, ks].copy(), "actions": self._actions[slots].copy(),
                "rewards": self._rewards[slots].copy(), "z_next": self._z_next[slots, ks].copy(),
                "dones": self._dones[slots].copy(), "idx": idx, "ks": ks}

    def get_latent_transition(self, logical):
        slot = self._slot(logical)
        return {"z_t": self._z_t[slot].copy(), "z_next": self._z_next[slot].copy(),
                "off_t": self._off_t[slot].copy(), "off_next": self._off_next[slot].copy(),
                "action": int(self._actions[slot]), "reward": float(self._rewards[slot]),
                "done": bool(self._dones[slot])}

    def newest_latents(self):
        """(z_{t+1}, offsets) of the most recent transition; seeds the next push."""
        if self._count == 0:
            raise NotReady("buffer is empty")
        slot = self._slot(self._count - 1)
        return self._z_next[slot].copy(), self._off_next[slot].copy()
