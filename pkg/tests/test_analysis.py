"""Attention maps and PGM export: normalization, round trips, rollout export."""

import os

import numpy as np
import pytest

from conftest import make_rng
from latentrl.analysis import (analyze_checkpoint, attention_map, conv_activations,
                               export_pgm, parse_pgm)
from latentrl.checkpoint import save_checkpoint
from latentrl.nn import build_network, clone_params, conv_forward, init_params, relu_forward


def test_attention_sums_to_one_across_shapes_and_scales():
    rng = make_rng(200)
    for _ in range(50):
        c = int(rng.integers(1, 9))
        h = int(rng.integers(1, 15))
        w = int(rng.integers(1, 15))
        scale = float(rng.choice([1e-3, 1.0, 50.0, 1e4]))
        act = rng.standard_normal((c, h, w)) * scale
        amap = attention_map(act)
        assert amap.shape == (h, w)
        # entries can underflow to exactly 0 at extreme scales, never below
        assert np.all(amap >= 0)
        if scale <= 50.0:
            assert np.all(amap > 0)
        assert abs(float(amap.sum()) - 1.0) < 1e-6


def test_attention_of_uniform_activations_is_uniform():
    for h, w in ((1, 1), (3, 5), (8, 8)):
        act = np.full((4, h, w), 2.5)
        amap = attention_map(act)
        assert np.array_equal(amap, np.full((h, w), 1.0 / (h * w)))


def test_attention_concentrates_on_a_dominant_position():
    act = np.zeros((2, 6, 6))
    act[:, 4, 1] = 40.0
    amap = attention_map(act)
    assert np.unravel_index(np.argmax(amap), amap.shape) == (4, 1)
    assert amap[4, 1] > 0.99


def test_attention_rejects_wrong_rank():
    with pytest.raises(ValueError):
        attention_map(np.zeros((3, 3)))


def test_pgm_round_trip_is_exact():
    rng = make_rng(201)
    for shape in ((1, 1), (4, 7), (12, 12)):
        m = rng.random(shape) + 1e-6
        path = f"/tmp/amap_{shape[0]}x{shape[1]}.pgm"
        export_pgm(m, path)
        expected = np.rint(m / m.max() * 255.0).astype(np.int64)
        got = parse_pgm(path)
        assert got.dtype == np.int64
        assert np.array_equal(got, expected)
        assert got.max() == 255  # max-normalized output always hits full scale


def test_pgm_parser_ignores_comments_and_whitespace(tmp_path):
    path = tmp_path / "commented.pgm"
    path.write_text("P2  # plain graymap\n# a comment line\n 3 2\n255\n"
                    "0 10 20 # trailing comment\n\n  30\t40 250\n")
    got = parse_pgm(path)
    assert np.array_equal(got, np.array([[0, 10, 20], [30, 40, 250]]))


def test_pgm_parser_rejects_malformed_files(tmp_path):
    binary = tmp_path / "binary.pgm"
    binary.write_text("P5\n3 2\n255\n0 1 2 3 4 5\n")
    with pytest.raises(ValueError):
        parse_pgm(binary)
    short = tmp_path / "short.pgm"
    short.write_text("P2\n3 2\n255\n0 1 2 3\n")
    with pytest.raises(ValueError):
        parse_pgm(short)
    over = tmp_path / "over.pgm"
    over.write_text("P2\n2 1\n255\n0 300\n")
    with pytest.raises(ValueError):
        parse_pgm(over)


def test_export_rejects_nonpositive_map(tmp_path):
    with pytest.raises(ValueError):
        export_pgm(np.zeros((3, 3)), tmp_path / "zero.pgm")


def test_conv_activations_match_manual_forward():
    rng = make_rng(202)
    spec = build_network((2, 12, 12), (4, 6), (3, 3), (3, 1), (0, 1), 16, (), 3)
    params = init_params(spec, rng, np.float32)
    x = rng.random((2, 12, 12)).astype(np.float32)

    first_conv, _ = conv_forward(x, spec.encoder_layers[0], params.encoder[0]["w"],
                                 params.encoder[0]["b"])
    first_relu, _ = relu_forward(first_conv)
    got_first = conv_activations(x, spec, params, layer_index=0)
    assert np.array_equal(got_first, first_relu)

    # default picks the last conv layer's post-activation output
    got_last = conv_activations(x, spec, params)
    second_conv, _ = conv_forward(first_relu, spec.encoder_layers[2],
                                  params.encoder[2]["w"], params.encoder[2]["b"])
    second_relu, _ = relu_forward(second_conv)
    assert np.array_equal(got_last, second_relu)


def test_analyze_checkpoint_produces_readable_map(tmp_path):
    rng = make_rng(203)
    spec = build_network((2, 12, 12), (4,), (3,), (3,), (0,), 16, (16,), 3)
    params = init_params(spec, rng, np.float32)
    meta = {"seed": 5, "env_id": "catch", "grid_size": 6, "render_size": 12,
            "frame_stack": 2, "episode_cap": 0, "step": 100, "mode": "baseline"}
    ckpt = tmp_path / "checkpoint.bin"
    save_checkpoint(ckpt, spec, params, clone_params(params), meta)

    out_path, amap = analyze_checkpoint(str(ckpt), obs_index=3)
    assert out_path == str(tmp_path / "attention_obs3.pgm")
    assert os.path.exists(out_path)
    assert abs(float(amap.sum()) - 1.0) < 1e-6
    parsed = parse_pgm(out_path)
    assert parsed.shape == amap.shape == (4, 4)  # 12x12 through k3 s3 conv

    # same checkpoint and index give the same map; a custom path is honored
    custom = tmp_path / "again.pgm"
    out2, amap2 = analyze_checkpoint(str(ckpt), obs_index=3, out_path=str(custom))
    assert out2 == str(custom)
    assert np.array_equal(amap, amap2)
    assert np.array_equal(parse_pgm(custom), parsed)
