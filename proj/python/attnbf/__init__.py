# Copyright 2026 The attnbf Authors
# License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
"""Causal multichannel speech enhancement with attention-driven spatial filters."""

from ._attnbf import (
    AttnbfError,
    ConfigError,
    GeometryError,
    InvalidInput,
    IoError,
    NumericalError,
    effective_config,
    enhance,
    interior_range,
    istft,
    mvdr_weights,
    num_workers,
    oracle_mask,
    sdr,
    si_sdr,
    simulate,
    snr_loss,
    stft,
)

__all__ = [
    "AttnbfError",
    "ConfigError",
    "GeometryError",
    "InvalidInput",
    "IoError",
    "NumericalError",
    "effective_config",
    "enhance",
    "interior_range",
    "istft",
    "mvdr_weights",
    "num_workers",
    "oracle_mask",
    "sdr",
    "si_sdr",
    "simulate",
    "snr_loss",
    "stft",
]
