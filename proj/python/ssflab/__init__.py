"""Spectral shift function experiments for random alloy models."""

from ._core import (
    ConfigError,
    OnSpectrumError,
    __version__,
    birman_krein_residual,
    count_below,
    default_config,
    experiment_names,
    free_hamiltonian,
    gaussian_bound_halfspace,
    hamiltonian,
    philox,
    run,
    ssf,
    table_csv,
    validate,
)

__all__ = [
    "ConfigError",
    "OnSpectrumError",
    "__version__",
    "birman_krein_residual",
    "count_below",
    "default_config",
    "experiment_names",
    "free_hamiltonian",
    "gaussian_bound_halfspace",
    "hamiltonian",
    "philox",
    "run",
    "ssf",
    "table_csv",
    "validate",
]
