"""Query-waiting policies and mean binary freshness of a remotely monitored CTMC."""

from ._core import (
    POLICIES,
    Delay,
    FreshQueryError,
    Generator,
    Model,
    Policy,
    mbf,
    preset_names,
    run,
    run_csv,
    sampled_chain,
    simulate,
    synthesize,
)

__all__ = [
    "POLICIES",
    "Delay",
    "FreshQueryError",
    "Generator",
    "Model",
    "Policy",
    "mbf",
    "preset_names",
    "run",
    "run_csv",
    "sampled_chain",
    "simulate",
    "synthesize",
]
