# autodiff_modules/__init__.py
"""Reverse-mode autodiff over dense float64 tensors"""
from autodiff_modules.autodiff_value import Value, as_tensor, backward, constant
from autodiff_modules.autodiff_layers import (
    GruParams,
    concat,
    conv1d,
    dense,
    grl,
    gru_sequence,
    mean_pool_time,
    weighted_cross_entropy,
)
from autodiff_modules.autodiff_gradcheck import finite_diff_check
