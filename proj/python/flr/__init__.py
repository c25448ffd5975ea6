"""Python bindings for the flr adaptive functional estimation library."""

import json

from ._core import (
    InvalidArgument,
    NumericalError,
    coefficients,
    lemma_suite,
    normalize_functional,
    run_cli,
    simulate,
)

__all__ = [
    "InvalidArgument",
    "NumericalError",
    "adaptive_estimate",
    "cli",
    "coefficients",
    "lemma_suite",
    "normalize_functional",
    "rates",
    "simulate",
]


def adaptive_estimate(x, y, functional, penalty_constant=700.0):
    """Run the adaptive selection on a design matrix and response; returns a dict."""
    from ._core import adaptive_estimate_json

    return json.loads(adaptive_estimate_json(x, y, functional, penalty_constant))


def cli(*args):
    """Run the command line interface in-process; returns (exit_code, stdout, stderr)."""
    return run_cli([str(a) for a in args])


def rates(n, functional="point:0.3", regime="pp", p=1.0, a=1.0):
    """Oracle dimensions and rate descriptors as reported by `flr rates`."""
    code, out, err = cli("rates", "--n", n, "--functional", functional, "--regime", regime, "--p", p, "--a", a)
    if code != 0:
        raise RuntimeError(json.loads(err)["error"]["detail"])
    return json.loads(out)
