"""Differential prevalence analysis with an asymmetric-Laplace shrinkage model.

The numerical work happens in the compiled ``_core`` extension. This package
re-exports it and adds a small convenience wrapper around the CLI commands.
"""

import json

from ._core import __version__
from ._core import (
    CapabilityError,
    DesignError,
    ParseError,
    SchemaError,
    ValidationError,
    al_logpdf,
    bh_adjust,
    fit_dipper,
    frequentist_dpa,
    logistic_test,
    read_results,
    run_command,
    simulate,
)

__all__ = [
    "CapabilityError",
    "DesignError",
    "ParseError",
    "SchemaError",
    "ValidationError",
    "al_logpdf",
    "bh_adjust",
    "fit_dipper",
    "frequentist_dpa",
    "logistic_test",
    "read_results",
    "run",
    "run_command",
    "simulate",
]


def run(command, **config):
    """Run a CLI command with keyword settings; returns (exit code, log text).

    Keys are the fields of the JSON config accepted by ``dipper --config``,
    e.g. ``run("run", input=["table.tsv"], method="wald", out="res")``.
    """
    return run_command(command, json.dumps(config))
