"""Conformal set-valued classification with outlier detection."""

import json as _json

from ._core import (
    METHODS,
    OUTLIER,
    UNLABELED,
    ConfigError,
    Data,
    DataError,
    audit,
    example1,
    from_arrays,
    load_csv,
    run_method,
    split_conformal_pvalue,
    type_errors,
)
from ._core import make_data as _make_data
from ._core import run_experiment as _run_experiment


def make_data(source, seed=1):
    """`source` is the `data` section of a config, as a dict or JSON string."""
    if not isinstance(source, str):
        source = _json.dumps(source)
    return _make_data(source, seed)


def run_experiment(config, output_dir=""):
    """Runs a config given as a dict or JSON string; returns written paths."""
    if not isinstance(config, str):
        config = _json.dumps(config)
    return _run_experiment(config, output_dir)


__all__ = [
    "METHODS", "OUTLIER", "UNLABELED", "ConfigError", "Data", "DataError", "audit", "example1",
    "from_arrays", "load_csv", "make_data", "run_experiment", "run_method", "split_conformal_pvalue",
    "type_errors",
]
