"""Versioned binary checkpoint of all network parameters.

Layout: magic "LRLC", uint32 format version, uint32 header length, a JSON
header (layer program, latent dim, input shape, run metadata), then one
record per parameter tensor: uint16 name length, name bytes, uint8 ndim,
uint32 dims, raw float32 payload. All integers and floats are little-endian;
tensors are stored as 4-byte floats in row-major order.
"""

import json
import struct

import numpy as np

from .nn import ConvSpec, DenseSpec, FlattenSpec, NetworkSpec, ParamStore, ReluSpec

MAGIC = b"LRLC"
VERSION = 1


def _encode_layers(layers):
    out = []
    for layer in layers:
        if isinstance(layer, ConvSpec):
            out.append(["conv", layer.in_channels, layer.out_channels, layer.kernel,
                        layer.stride, layer.padding])
        elif isinstance(layer, DenseSpec):
            out.append(["dense", layer.in_dim, layer.out_dim])
        elif isinstance(layer, ReluSpec):
            out.append(["relu"])
        elif isinstance(layer, FlattenSpec):
            out.append(["flatten"])
        else:
            raise TypeError(f"unknown layer {layer!r}")
    return out


def _decode_layers(encoded):
    out = []
    for item in encoded:
        kind = item[0]
        if kind == "conv":
            out.append(ConvSpec(*item[1:]))
        elif kind == "dense":
            out.append(DenseSpec(*item[1:]))
        elif kind == "relu":
            out.append(ReluSpec())
        elif kind == "flatten":
            out.append(FlattenSpec())
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
    return tuple(out)


def _tensor_records(params, target):
    for group_name, group in (("online.encoder", params.encoder),
                              ("online.head", params.head),
                              ("target.encoder", target.encoder),
                              ("target.head", target.head)):
        for i, p in enumerate(group):
            if p is None:
                continue
            yield f"{group_name}.{i}.w", p["w"]
            yield f"{group_name}.{i}.b", p["b"]


def save_checkpoint(path, spec, params, target, meta):
    header = {
        "format_version": VERSION,
        "input_shape": list(spec.input_shape),
        "encoder_layers": _encode_layers(spec.encoder_layers),
        "head_layers": _encode_layers(spec.head_layers),
        "latent_dim": spec.latent_dim,
        "frozen_encoder": bool(params.frozen_encoder),
        "meta": meta,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for name, arr in _tensor_records(params, target):
            nb = name.encode("utf-8")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path):
    """Returns (spec, online ParamStore, target ParamStore, meta dict)."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ValueError("not a checkpoint file (bad magic)")
    version, hlen = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    header = json.loads(data[12:12 + hlen].decode("utf-8"))
    spec = NetworkSpec(input_shape=tuple(header["input_shape"]),
                       encoder_layers=_decode_layers(header["encoder_layers"]),
                       head_layers=_decode_layers(header["head_layers"]),
                       latent_dim=header["latent_dim"])
    groups = {"online.encoder": [None] * len(spec.encoder_layers),
              "online.head": [None] * len(spec.head_layers),
              "target.encoder": [None] * len(spec.encoder_layers),
              "target.head": [None] * len(spec.head_layers)}
    pos = 12 + hlen
    while pos < len(data):
        (nlen,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (ndim,) = struct.unpack_from("<B", data, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(data, dtype="<f4", count=size, offset=pos).reshape(shape).copy()
        pos += 4 * size
        group_name, idx, key = name.rsplit(".", 2)
        slot = groups[group_name]
        if slot[int(idx)] is None:
            slot[int(idx)] = {}
        slot[int(idx)][key] = arr
    frozen = bool(header.get("frozen_encoder", False))
    params = ParamStore(encoder=groups["online.encoder"], head=groups["online.head"],
                        frozen_encoder=frozen)
    target = ParamStore(encoder=groups["target.encoder"], head=groups["target.head"],
                        frozen_encoder=frozen)
    return spec, params, target, header["meta"]
