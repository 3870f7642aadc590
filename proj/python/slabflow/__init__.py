"""Spectral free-surface Navier-Stokes solver on a flattened slab."""

from ._slabflow import (
    EXIT_FAILURE,
    EXIT_MONITOR,
    EXIT_OK,
    EXIT_SOLVER,
    ConfigError,
    Error,
    MonitorError,
    RunConfig,
    SolverError,
    bench,
    extend,
    lemma_suite,
    load_config,
    parse_config,
    read_dump,
    run,
    verify,
)

__all__ = [
    "EXIT_FAILURE",
    "EXIT_MONITOR",
    "EXIT_OK",
    "EXIT_SOLVER",
    "ConfigError",
    "Error",
    "MonitorError",
    "RunConfig",
    "SolverError",
    "bench",
    "extend",
    "lemma_suite",
    "load_config",
    "parse_config",
    "read_dump",
    "run",
    "verify",
]
