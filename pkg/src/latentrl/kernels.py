"""Compiled inner loops for the layer math.

Every kernel runs serially with a fixed reduction order, so identical inputs
give identical bits on every run. BLAS is deliberately not used here: its
kernel selection can change with matrix shape, which would break run-to-run
and batch-to-batch equality.

Two affine forwards exist on purpose. The fast one (fastmath) is for the
training path, where only run-to-run reproducibility matters. The exact one
compiles with strict IEEE semantics, which forbids the compiler from
reassociating a row's reduction differently depending on how rows are
grouped; latents that get stored in the replay buffer go through it, so a
stored latent never depends on the batching used to compute it.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def affine_forward(x, w, bias, out):
    # out[i, o] = bias[o] + sum_j x[i, j] * w[o, j]
    n, k = x.shape
    m = w.shape[0]
    for i in range(n):
        for o in range(m):
            acc = bias[o]
            for j in range(k):
                acc += x[i, j] * w[o, j]
            out[i, o] = acc


@njit(cache=True)
def affine_forward_exact(x, w, bias, out):
    # same contraction as affine_forward under strict IEEE-754 evaluation:
    # each output row is a pure function of its own input row
    n, k = x.shape
    m = w.shape[0]
    for i in range(n):
        for o in range(m):
            acc = bias[o]
            for j in range(k):
                acc += x[i, j] * w[o, j]
            out[i, o] = acc


@njit(cache=True, fastmath=True)
def affine_grad_input(gout, w, gx):
    # gx[i, j] = sum_o gout[i, o] * w[o, j]; gx must be zeroed by the caller
    n, m = gout.shape
    k = w.shape[1]
    for i in range(n):
        for o in range(m):
            g = gout[i, o]
            for j in range(k):
                gx[i, j] += g * w[o, j]


@njit(cache=True, fastmath=True)
def affine_grad_params(x, gout, gw, gb):
    # gw[o, j] = sum_i gout[i, o] * x[i, j]; gb[o] = sum_i gout[i, o]
    # batch index i is the outer loop so the accumulation order is fixed
    n, k = x.shape
    m = gout.shape[1]
    for i in range(n):
        for o in range(m):
            g = gout[i, o]
            gb[o] += g
            for j in range(k):
                gw[o, j] += g * x[i, j]


@njit(cache=True, fastmath=True)
def col2im_add(gcols, gpad, out_h, out_w, kernel, stride):
    # scatter-add column gradients back onto the zero-padded input gradient
    b, c = gpad.shape[0], gpad.shape[1]
    patch = c * kernel * kernel
    for r in range(gcols.shape[0]):
        bi = r // (out_h * out_w)
        rem = r - bi * (out_h * out_w)
        oh = rem // out_w
        ow = rem - oh * out_w
        h0 = oh * stride
        w0 = ow * stride
        for ci in range(c):
            for kh in range(kernel):
                for kw in range(kernel):
                    j = ci * kernel * kernel + kh * kernel + kw
                    gpad[bi, ci, h0 + kh, w0 + kw] += gcols[r, j]


def im2col(x_pad, kernel, stride, out_h, out_w):
    """Unfold a padded (B, C, Hp, Wp) batch into (B*out_h*out_w, C*k*k) columns.

    Pure gather, so any implementation is bit-exact; numpy's stride tricks are
    used for speed. Column order is (channel, kh, kw), matching the flattened
    weight layout.
    """
    win = np.lib.stride_tricks.sliding_window_view(x_pad, (kernel, kernel), axis=(2, 3))
    win = win[:, :, ::stride, ::stride, :, :]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(-1, x_pad.shape[1] * kernel * kernel)
    return np.ascontiguousarray(cols)
