"""Small convolutional Q-network library with manual backpropagation.

The network is split into an encoder (conv trunk ending in a dense projection
to a latent vector) and a head (dense MLP to per-action values). The split is
the freeze boundary: once the encoder is frozen, updates touch head parameters
only and the backward pass stops at the boundary, never executing encoder
arithmetic.

Cost accounting counts multiply-adds (MACs) per forward pass; bias adds and
ReLU are not counted. A backward pass is modeled as twice a forward pass.
"""

from dataclasses import dataclass, field

import numpy as np

from .kernels import (affine_forward, affine_forward_exact, affine_grad_input,
                      affine_grad_params, col2im_add, im2col)


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0


@dataclass(frozen=True)
class DenseSpec:
    in_dim: int
    out_dim: int


@dataclass(frozen=True)
class ReluSpec:
    pass


@dataclass(frozen=True)
class FlattenSpec:
    pass


@dataclass(frozen=True)
class NetworkSpec:
    """Layer program for encoder and head plus the input image shape."""

    input_shape: tuple          # (channels, height, width)
    encoder_layers: tuple
    head_layers: tuple
    latent_dim: int

    @property
    def freeze_boundary(self):
        return len(self.encoder_layers)

    @property
    def n_actions(self):
        for layer in reversed(self.head_layers):
            if isinstance(layer, DenseSpec):
                return layer.out_dim
        return self.latent_dim


def conv_out_size(size, kernel, stride, padding):
    out = (size + 2 * padding - kernel) // stride + 1
    if out < 1:
        raise ValueError("convolution output collapsed to zero size")
    return out


def layer_output_shape(shape, layer):
    """Shape propagation for one layer; shape is (C, H, W) or (D,)."""
    if isinstance(layer, ConvSpec):
        c, h, w = shape
        if c != layer.in_channels:
            raise ValueError(f"conv expects {layer.in_channels} channels, got {c}")
        return (
            layer.out_channels,
            conv_out_size(h, layer.kernel, layer.stride, layer.padding),
            conv_out_size(w, layer.kernel, layer.stride, layer.padding),
        )
    if isinstance(layer, DenseSpec):
        if len(shape) != 1 or shape[0] != layer.in_dim:
            raise ValueError(f"dense expects ({layer.in_dim},), got {shape}")
        return (layer.out_dim,)
    if isinstance(layer, FlattenSpec):
        return (int(np.prod(shape)),)
    if isinstance(layer, ReluSpec):
        return shape
    raise TypeError(f"unknown layer {layer!r}")


def validate_spec(spec):
    shape = tuple(spec.input_shape)
    for layer in spec.encoder_layers:
        shape = layer_output_shape(shape, layer)
    if shape != (spec.latent_dim,):
        raise ValueError(f"encoder produces {shape}, expected ({spec.latent_dim},)")
    for layer in spec.head_layers:
        shape = layer_output_shape(shape, layer)
    return shape


def layer_flops(shape, layer):
    """Forward multiply-adds for one layer given its input shape."""
    if isinstance(layer, ConvSpec):
        _, oh, ow = layer_output_shape(shape, layer)
        return oh * ow * layer.out_channels * layer.kernel * layer.kernel * layer.in_channels
    if isinstance(layer, DenseSpec):
        return layer.in_dim * layer.out_dim
    return 0


def param_flops(spec):
    """(E, M): forward MACs of the encoder and of the head."""
    e = m = 0
    shape = tuple(spec.input_shape)
    for layer in spec.encoder_layers:
        e += layer_flops(shape, layer)
        shape = layer_output_shape(shape, layer)
    for layer in spec.head_layers:
        m += layer_flops(shape, layer)
        shape = layer_output_shape(shape, layer)
    return e, m


# ---------------------------------------------------------------------------
# parameters


@dataclass
class ParamStore:
    encoder: list
    head: list
    frozen_encoder: bool = False


def _init_layer(layer, rng, dtype):
    if isinstance(layer, ConvSpec):
        fan_in = layer.in_channels * layer.kernel * layer.kernel
        bound = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound, (layer.out_channels, layer.in_channels, layer.kernel, layer.kernel))
        return {"w": w.astype(dtype), "b": np.zeros(layer.out_channels, dtype=dtype)}
    if isinstance(layer, DenseSpec):
        bound = np.sqrt(6.0 / layer.in_dim)
        w = rng.uniform(-bound, bound, (layer.out_dim, layer.in_dim))
        return {"w": w.astype(dtype), "b": np.zeros(layer.out_dim, dtype=dtype)}
    return None


def init_params(spec, rng, dtype=np.float32):
    """He-uniform weights, zero biases; draw order is fixed (encoder, then head)."""
    validate_spec(spec)
    encoder = [_init_layer(layer, rng, dtype) for layer in spec.encoder_layers]
    head = [_init_layer(layer, rng, dtype) for layer in spec.head_layers]
    return ParamStore(encoder=encoder, head=head)


def clone_params(params):
    def cp(group):
        return [None if p is None else {"w": p["w"].copy(), "b": p["b"].copy()} for p in group]

    return ParamStore(encoder=cp(params.encoder), head=cp(params.head),
                      frozen_encoder=params.frozen_encoder)


# ---------------------------------------------------------------------------
# per-layer forward/backward


def conv_forward(x, spec, w, b, exact=False):
    """Cross-correlation (no kernel flip). x is (C,H,W) or (B,C,H,W)."""
    single = x.ndim == 3
    if single:
        x = x[None]
    batch, c, h, w_in = x.shape
    if c != spec.in_channels:
        raise ValueError(f"conv expects {spec.in_channels} channels, got {c}")
    out_h = conv_out_size(h, spec.kernel, spec.stride, spec.padding)
    out_w = conv_out_size(w_in, spec.kernel, spec.stride, spec.padding)
    if spec.padding:
        pad = spec.padding
        x_pad = np.zeros((batch, c, h + 2 * pad, w_in + 2 * pad), dtype=x.dtype)
        x_pad[:, :, pad:pad + h, pad:pad + w_in] = x
    else:
        x_pad = np.ascontiguousarray(x)
    cols = im2col(x_pad, spec.kernel, spec.stride, out_h, out_w)
    w_mat = np.ascontiguousarray(w.reshape(spec.out_channels, -1))
    out_mat = np.empty((cols.shape[0], spec.out_channels), dtype=x.dtype)
    (affine_forward_exact if exact else affine_forward)(cols, w_mat, b, out_mat)
    y = np.ascontiguousarray(
        out_mat.reshape(batch, out_h, out_w, spec.out_channels).transpose(0, 3, 1, 2))
    cache = (cols, x.shape, (out_h, out_w))
    return (y[0] if single else y), cache


def conv_backward(grad_out, cache, spec, w, need_input_grad=True):
    """Returns (grad_input, grad_w, grad_b); grad_input is None when skipped."""
    cols, x_shape, (out_h, out_w) = cache
    single = grad_out.ndim == 3
    if single:
        grad_out = grad_out[None]
    batch, c, h, w_in = x_shape
    gmat = np.ascontiguousarray(grad_out.transpose(0, 2, 3, 1).reshape(-1, spec.out_channels))
    w_mat = np.ascontiguousarray(w.reshape(spec.out_channels, -1))
    gw = np.zeros_like(w_mat)
    gb = np.zeros(spec.out_channels, dtype=w.dtype)
    affine_grad_params(cols, gmat, gw, gb)
    gx = None
    if need_input_grad:
        gcols = np.zeros_like(cols)
        affine_grad_input(gmat, w_mat, gcols)
        pad = spec.padding
        gpad = np.zeros((batch, c, h + 2 * pad, w_in + 2 * pad), dtype=cols.dtype)
        col2im_add(gcols, gpad, out_h, out_w, spec.kernel, spec.stride)
        gx = np.ascontiguousarray(gpad[:, :, pad:pad + h, pad:pad + w_in])
        if single:
            gx = gx[0]
    return gx, gw.reshape(w.shape), gb


def dense_forward(x, w, b, exact=False):
    single = x.ndim == 1
    if single:
        x = x[None]
    x = np.ascontiguousarray(x)
    out = np.empty((x.shape[0], w.shape[0]), dtype=x.dtype)
    (affine_forward_exact if exact else affine_forward)(x, w, b, out)
    return (out[0] if single else out), x


def dense_backward(grad_out, cache, w, need_input_grad=True):
    x = cache
    single = grad_out.ndim == 1
    if single:
        grad_out = grad_out[None]
    gmat = np.ascontiguousarray(grad_out)
    gw = np.zeros_like(w)
    gb = np.zeros(w.shape[0], dtype=w.dtype)
    affine_grad_params(x, gmat, gw, gb)
    gx = None
    if need_input_grad:
        gx = np.zeros((gmat.shape[0], w.shape[1]), dtype=x.dtype)
        affine_grad_input(gmat, w, gx)
        if single:
            gx = gx[0]
    return gx, gw, gb


def relu_forward(x):
    return np.maximum(x, 0), x


def relu_backward(grad_out, cache):
    # subgradient at 0 is 0
    return grad_out * (cache > 0)


# ---------------------------------------------------------------------------
# network-level forward/backward


def _run_layers(x, layers, group, exact=False):
    caches = []
    for layer, p in zip(layers, group):
        if isinstance(layer, ConvSpec):
            x, cache = conv_forward(x, layer, p["w"], p["b"], exact=exact)
        elif isinstance(layer, DenseSpec):
            x, cache = dense_forward(x, p["w"], p["b"], exact=exact)
        elif isinstance(layer, ReluSpec):
            x, cache = relu_forward(x)
        elif isinstance(layer, FlattenSpec):
            cache = x.shape
            x = np.ascontiguousarray(x.reshape(x.shape[0], -1) if x.ndim == 4 else x.reshape(-1))
        else:
            raise TypeError(f"unknown layer {layer!r}")
        caches.append(cache)
    return x, caches


def _backward_layers(grad, layers, group, caches, grads_out, need_first_input_grad):
    for i in range(len(layers) - 1, -1, -1):
        layer, p, cache = layers[i], group[i], caches[i]
        need_gx = i > 0 or need_first_input_grad
        if isinstance(layer, ConvSpec):
            grad, gw, gb = conv_backward(grad, cache, layer, p["w"], need_input_grad=need_gx)
            grads_out[i] = {"w": gw, "b": gb}
        elif isinstance(layer, DenseSpec):
            grad, gw, gb = dense_backward(grad, cache, p["w"], need_input_grad=need_gx)
            grads_out[i] = {"w": gw, "b": gb}
        elif isinstance(layer, ReluSpec):
            grad = relu_backward(grad, cache) if need_gx else None
        elif isinstance(layer, FlattenSpec):
            grad = grad.reshape(cache) if need_gx else None
    return grad


@dataclass
class ForwardCache:
    encoder: list
    head: list
    latent: np.ndarray


@dataclass
class Grads:
    encoder: list
    head: list


def forward_encoder(obs, spec, params, want_cache=False, exact=False):
    """Encode observations to latents.

    exact=True evaluates under strict IEEE semantics so each latent is a pure
    function of its own observation, independent of batch grouping; use it
    whenever the result is stored or compared bit-for-bit.
    """
    latent, caches = _run_layers(obs, spec.encoder_layers, params.encoder, exact=exact)
    return (latent, caches) if want_cache else (latent, None)


def forward_head_only(latent, spec, params, want_cache=False):
    if latent.shape[-1] != spec.latent_dim:
        raise ValueError(f"latent length {latent.shape[-1]} != {spec.latent_dim}")
    q, caches = _run_layers(latent, spec.head_layers, params.head)
    return (q, caches) if want_cache else (q, None)


def forward_full(obs, spec, params):
    """Returns (q_values, latent, cache); cache feeds backward_from_loss."""
    latent, enc_caches = _run_layers(obs, spec.encoder_layers, params.encoder)
    q, head_caches = _run_layers(latent, spec.head_layers, params.head)
    return q, latent, ForwardCache(encoder=enc_caches, head=head_caches, latent=latent)


def backward_from_loss(grad_q, cache, spec, params, stop_at_freeze_boundary=False):
    """Backpropagate d(loss)/d(q) through the head and optionally the encoder.

    With stop_at_freeze_boundary=True no encoder gradient is produced and no
    encoder arithmetic runs; head gradients are identical either way.
    """
    head_grads = [None] * len(spec.head_layers)
    grad = _backward_layers(grad_q, spec.head_layers, params.head, cache.head,
                            head_grads, need_first_input_grad=not stop_at_freeze_boundary)
    if stop_at_freeze_boundary:
        return Grads(encoder=[], head=head_grads)
    if isinstance(cache, ForwardCache) and not cache.encoder:
        raise ValueError("cache has no encoder activations for a full backward")
    enc_grads = [None] * len(spec.encoder_layers)
    _backward_layers(grad, spec.encoder_layers, params.encoder, cache.encoder,
                     enc_grads, need_first_input_grad=False)
    return Grads(encoder=enc_grads, head=head_grads)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m_encoder: list = field(default_factory=list)
    v_encoder: list = field(default_factory=list)
    m_head: list = field(default_factory=list)
    v_head: list = field(default_factory=list)


def init_adam(params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    def zeros(group):
        return [None if p is None else {"w": np.zeros_like(p["w"]), "b": np.zeros_like(p["b"])}
                for p in group]

    return AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps,
                     m_encoder=zeros(params.encoder), v_encoder=zeros(params.encoder),
                     m_head=zeros(params.head), v_head=zeros(params.head))


def _adam_group(group, grads, m, v, state, c1, c2):
    for p, g, mi, vi in zip(group, grads, m, v):
        if p is None or g is None:
            continue
        for key in ("w", "b"):
            gk = g[key]
            if np.isnan(gk).any():
                raise FloatingPointError(f"NaN gradient in parameter '{key}' "
                                         f"of shape {gk.shape}; aborting update")
            mi[key] += (1.0 - state.beta1) * (gk - mi[key])
            vi[key] += (1.0 - state.beta2) * (gk * gk - vi[key])
            m_hat = mi[key] / c1
            v_hat = vi[key] / c2
            p[key] -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def adam_step(params, grads, state):
    """One Adam update. Frozen encoders are never touched, whatever is passed."""
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    if not params.frozen_encoder and grads.encoder:
        _adam_group(params.encoder, grads.encoder, state.m_encoder, state.v_encoder,
                    state, c1, c2)
    _adam_group(params.head, grads.head, state.m_head, state.v_head, state, c1, c2)


# ---------------------------------------------------------------------------
# builder


def build_network(in_shape, conv_channels, conv_kernels, conv_strides, conv_paddings,
                  latent_dim, head_hidden, n_actions):
    """Assemble the conv-trunk + dense-latent encoder and the MLP head."""
    c, h, w = in_shape
    enc = []
    shape = (c, h, w)
    for oc, k, s, p in zip(conv_channels, conv_kernels, conv_strides, conv_paddings):
        layer = ConvSpec(shape[0], oc, k, s, p)
        enc.extend([layer, ReluSpec()])
        shape = layer_output_shape(shape, layer)
    enc.append(FlattenSpec())
    flat = int(np.prod(shape))
    enc.extend([DenseSpec(flat, latent_dim), ReluSpec()])
    head = []
    d = latent_dim
    for hdim in head_hidden:
        head.extend([DenseSpec(d, hdim), ReluSpec()])
        d = hdim
    head.append(DenseSpec(d, n_actions))
    spec = NetworkSpec(input_shape=(c, h, w), encoder_layers=tuple(enc),
                       head_layers=tuple(head), latent_dim=latent_dim)
    validate_spec(spec)
    return spec
