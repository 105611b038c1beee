"""Likelihood ratios for body-fluid mixtures from mRNA profiles."""

import json

from ._core import (
    ConfigError,
    DataError,
    Model,
    NumericError,
    cap_lr,
    cllr,
    fit_calibrator,
    fluids,
    n_over_2 as _n_over_2,
    panel_markers,
    roc_auc,
    run_experiment as _run_experiment,
    synthesize,
    verbal_scale,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Model",
    "NumericError",
    "cap_lr",
    "cllr",
    "evaluate",
    "fit_calibrator",
    "fluids",
    "n_over_2",
    "panel_markers",
    "roc_auc",
    "run_experiment",
    "synthesize",
    "verbal_scale",
]


def _case_text(case):
    return case if isinstance(case, str) else json.dumps(case)


def _fluid_text(fluids):
    return fluids if isinstance(fluids, str) else "+".join(fluids)


def evaluate(model, case, interest, fixed_present=(), fixed_absent=(), cap=1000.0):
    """Evaluate a case ({"markers": {name: {"detected", "total"}}}) and return the report dict."""
    return json.loads(
        model.evaluate(
            _case_text(case),
            _fluid_text(interest),
            _fluid_text(fixed_present),
            _fluid_text(fixed_absent),
            cap,
        )
    )


def n_over_2(case, fluids):
    return _n_over_2(_case_text(case), _fluid_text(fluids))


def run_experiment(toml, threads=0):
    return json.loads(_run_experiment(toml, threads))
