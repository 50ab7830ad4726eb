"""Random shift-crop augmentation for stacked grayscale observations.

An observation is zero-padded by `pad` pixels on every side and an H x W
window is cropped back out at a random offset. The same offset is applied to
every frame in the stack so the shift is temporally consistent. pad=0 is an
exact identity and consumes no random draws.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AugmentConfig:
    pad: int = 0
    k: int = 1
    enabled: bool = True

    @property
    def effective_pad(self):
        return self.pad if self.enabled else 0

    @property
    def effective_k(self):
        return self.k if self.enabled else 1

    def validate(self, height, width):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.pad < 0 or self.pad >= min(height, width):
            raise ValueError("pad must satisfy 0 <= pad < min(H, W)")


def shift_crop(obs, offset, pad):
    """Crop an H x W window at (dy, dx) from the zero-padded observation.

    offset (0, 0) shifts content down-right by `pad` pixels; offset
    (pad, pad) is the identity.
    """
    if pad == 0:
        return obs.copy()
    s, h, w = obs.shape
    dy, dx = int(offset[0]), int(offset[1])
    if not (0 <= dy <= 2 * pad and 0 <= dx <= 2 * pad):
        raise ValueError(f"offset {(dy, dx)} out of range for pad {pad}")
    padded = np.zeros((s, h + 2 * pad, w + 2 * pad), dtype=obs.dtype)
    padded[:, pad:pad + h, pad:pad + w] = obs
    return padded[:, dy:dy + h, dx:dx + w].copy()


def draw_offsets(pad, k, rng):
    """k independent (dy, dx) draws; pad=0 draws nothing and returns zeros."""
    if pad == 0:
        return np.zeros((k, 2), dtype=np.int64)
    return rng.integers(0, 2 * pad + 1, size=(k, 2))


def random_shift_crop(obs, pad, rng):
    """One random crop; returns (augmented observation, offset used)."""
    offset = draw_offsets(pad, 1, rng)[0]
    return shift_crop(obs, offset, pad), offset


def augment_k(obs, pad, k, rng):
    """K independent random crops; returns (list of observations, offsets (k, 2))."""
    offsets = draw_offsets(pad, k, rng)
    return [shift_crop(obs, offsets[i], pad) for i in range(k)], offsets
