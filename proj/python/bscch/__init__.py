"""Bulk-surface convective Cahn-Hilliard simulator."""

from ._core import (
    BscchError,
    Model,
    __version__,
    certify,
    config_hash,
    decay_gronwall_Q,
    normalize_config,
    preset,
    run_experiment,
    uniform_gronwall_bound,
    yosida_derivative,
)

__all__ = [
    "BscchError",
    "Model",
    "__version__",
    "certify",
    "config_hash",
    "decay_gronwall_Q",
    "normalize_config",
    "preset",
    "run_experiment",
    "uniform_gronwall_bound",
    "yosida_derivative",
]
