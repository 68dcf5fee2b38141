# Copyright 2026 The qgraph Authors
# SPDX-License-Identifier: Apache-2.0
"""End-to-end smoke tests for the python module."""

import json

import numpy as np
import pytest

import qgraph


def toy(**overrides):
    cfg = dict(d_model=8, heads=2, layers=1, seq_len=8, vocab=16,
               decode_steps=2, beam=2, sigma=0.05, seed=3)
    cfg.update(overrides)
    return qgraph.build_toy_transformer(**cfg)


def sentences(n, seed, vocab=16, min_len=4):
    corpus = qgraph.generate_corpus(count=n, vocab=vocab, min_len=min_len,
                                    seed=seed)
    return [s["tokens"] for s in corpus]


def test_version():
    assert qgraph.__version__ == "0.1.0"


def test_toy_run_shape_and_determinism():
    g = toy()
    out = qgraph.run_tokens(g, [1, 2, 3, 4, 5])
    assert list(out) == g.outputs()
    (probs,) = out.values()
    assert probs.shape == (2, 2, 16)  # (beam, decode_steps, vocab)
    assert probs.dtype == np.float32
    assert np.isfinite(probs).all()
    # Softmax rows sum to one.
    np.testing.assert_allclose(probs.sum(axis=-1), 1.0, rtol=1e-5)

    again = qgraph.run_tokens(toy(), [1, 2, 3, 4, 5])
    np.testing.assert_array_equal(probs, next(iter(again.values())))


def test_graph_json_round_trip():
    g = toy()
    h = qgraph.Graph.from_json(g.to_json())
    assert h.to_json() == g.to_json()
    assert h.census() == g.census()
    assert h.size() == g.size()
    assert "MatMul" in g.census()


def test_quantize_round_trip_bound():
    rng = np.random.default_rng(7)
    x = rng.uniform(-0.7, 1.3, size=(64,)).astype(np.float32)
    params = qgraph.compute_scale(-0.7, 1.3, "U8")
    q = qgraph.quantize_array(x, -0.7, 1.3, "U8")
    assert q.dtype == np.uint8
    x2 = qgraph.dequantize_array(q, -0.7, 1.3, "U8")
    assert np.abs(x2 - x).max() <= 0.5 / params["scale"] + 1e-7

    xs = rng.uniform(-1.0, 1.0, size=(64,)).astype(np.float32)
    qs = qgraph.quantize_array(xs, -1.0, 1.0, "S8")
    assert qs.dtype == np.int8
    ps = qgraph.compute_scale(-1.0, 1.0, "S8")
    assert ps["zero_offset"] == 0.0
    x2s = qgraph.dequantize_array(qs, -1.0, 1.0, "S8")
    assert np.abs(x2s - xs).max() <= 0.5 / ps["scale"] + 1e-7

    with pytest.raises(ValueError):
        qgraph.compute_scale(-0.5, 1.0, "S8")  # S8 demands min == -max


def test_gemm_matches_numpy():
    rng = np.random.default_rng(11)
    a = rng.integers(-127, 128, size=(3, 5), dtype=np.int8)
    b = rng.integers(0, 256, size=(5, 4), dtype=np.uint8)
    c = rng.integers(-100, 100, size=(3, 4), dtype=np.int32)
    got = qgraph.gemm_s8u8s32(a, b, alpha=2, beta=3, oa=1, ob=-4, oc=7, c=c)
    want = (2 * (a.astype(np.int32) + 1) @ (b.astype(np.int32) - 4)
            + 3 * c + 7)
    np.testing.assert_array_equal(got, want)
    assert got.dtype == np.int32


def test_calibrate_quantize_verify():
    g = toy()
    table = qgraph.calibrate(g, sentences(40, seed=21), mode="conjugate")
    taps = table.taps()
    assert taps and all("t_max" in v for v in taps.values())

    table2 = qgraph.CalibrationTable.from_json(table.to_json())
    assert table2.to_json() == table.to_json()

    q, report = qgraph.calibrated_quantize(g, table)
    rep = json.loads(report)
    assert rep["pass"] == "calibrated_quantize"
    assert q.census().get("QuantizedMatMul", 0) > 0

    q2, report2 = qgraph.quantize_gathernd(q, table)
    assert json.loads(report2)["pass"] == "quantize_gathernd"

    result = qgraph.verify(g, q2, sentences(4, seed=22), tol=5e-2)
    assert result["pass"]
    assert result["worst_rel_l2"] <= 5e-2
    assert all(d["rel_l2"] <= 5e-2 for d in result["outputs"])


def test_naive_quantize_census_delta():
    g = toy()
    q, _ = qgraph.naive_quantize(g)
    before, after = g.census(), q.census()
    assert after.get("QuantizedMatMul", 0) == before["MatMul"]
    assert "MatMul" not in after
    assert after["RequantizationRange"] == before["MatMul"]


def test_errors_surface_as_value_error():
    with pytest.raises(ValueError, match="token list"):
        qgraph.run_tokens(toy(), [])
    with pytest.raises(ValueError):
        qgraph.Graph.from_json("not json")
    with pytest.raises(ValueError, match="preset"):
        toy(preset="bimodal")
