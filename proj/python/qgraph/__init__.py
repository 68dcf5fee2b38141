# Copyright 2026 The qgraph Authors
# SPDX-License-Identifier: Apache-2.0
"""INT8 quantization toolkit for qgraph compute graphs."""

from ._qgraph import (
    CalibrationTable,
    Graph,
    QGraphError,
    __version__,
    build_toy_transformer,
    calibrate,
    calibrated_quantize,
    compute_scale,
    dequantize_array,
    gemm_s8u8s32,
    generate_corpus,
    naive_quantize,
    quantize_array,
    quantize_gathernd,
    run_tokens,
    verify,
)

__all__ = [
    "CalibrationTable",
    "Graph",
    "QGraphError",
    "__version__",
    "build_toy_transformer",
    "calibrate",
    "calibrated_quantize",
    "compute_scale",
    "dequantize_array",
    "gemm_s8u8s32",
    "generate_corpus",
    "naive_quantize",
    "quantize_array",
    "quantize_gathernd",
    "run_tokens",
    "verify",
]
