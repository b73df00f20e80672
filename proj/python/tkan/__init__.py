"""Python access to the TKAN benchmark core."""

from ._tkan import (
    CheckpointError,
    ContractError,
    DimensionError,
    FetchError,
    Model,
    UndefinedMetricError,
    aggregate,
    bspline_basis,
    naive_last_value,
    prepare,
    r_squared,
    run_benchmark,
    synthetic_series,
)

__all__ = [
    "CheckpointError",
    "ContractError",
    "DimensionError",
    "FetchError",
    "Model",
    "UndefinedMetricError",
    "aggregate",
    "bspline_basis",
    "naive_last_value",
    "prepare",
    "r_squared",
    "run_benchmark",
    "synthetic_series",
]
