"""Linear-systems analysis and control-synthesis toolkit.

Library layout, one module per concern:

- numkit: dense matrix and polynomial kit shared by everything else
- model: state-space containers, equilibria, linearization
- realization: transfer function <-> state space conversions
- response: state-transition matrices and simulation
- stability: internal/external stability tests and certificates
- structural: controllability, observability, canonical decompositions
- synthesis: state feedback, observers, integral and polynomial design
- lqr: Riccati solvers, stationary regulators, frequency-domain checks
- minprin: two-point boundary-value and bang-bang optimal control
- registry: named example models
- cli: batch front end (entry point: statespace-kit)

Submodules load on first attribute access so the command-line tool can
cap numeric threading before the array backend initializes.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "cli",
    "errors",
    "lqr",
    "minprin",
    "model",
    "numkit",
    "realization",
    "registry",
    "response",
    "stability",
    "structural",
    "synthesis",
)

__all__ = list(_SUBMODULES) + ["__version__"]


def __getattr__(name):
    if name in _SUBMODULES:
        module = importlib.import_module("." + name, __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(set(globals()) | set(_SUBMODULES))
