"""Coupled compressive sensing for asynchronous neighbor discovery.

Library modules: ``tree_code`` (outer code), ``codebook`` (partial-DFT
dictionary), ``channel`` (fading, delays, frame synthesis), ``cs_decoder``
(per-slot LASSO), ``simulator`` (Monte Carlo sweeps) and ``cli``.
"""
from .config import ExperimentConfig, load_config
from .errors import ConfigError
from .simulator import ErrorStats, run_experiment, run_trial

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ErrorStats",
    "ExperimentConfig",
    "load_config",
    "run_experiment",
    "run_trial",
    "__version__",
]
