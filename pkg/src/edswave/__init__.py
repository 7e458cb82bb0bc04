"""Blow-up experiments for u_tt - t^(-2k) Delta u + (mu/t) u_t = |u_t|^p.

Modules: ``special_functions`` (Bessel multipliers), ``exponents``
(critical powers), ``solver`` (finite differences with blow-up detection),
``functionals`` (weighted averages and their lower bounds),
``certificate`` (the blow-up argument replayed on a run), and the harness
(``config``, ``records``, ``sweep``, ``plots``, ``cli``).
"""
from ._accel import USE_NUMBA
from .model import ConfigError, FieldState, Grid, ModelParams
from .solver import SolveOutcome, StoppingPolicy, run, step, stable_dt
from .special_functions import DomainError, EvalControls

__version__ = "0.1.0"

__all__ = [
    "USE_NUMBA",
    "ConfigError",
    "DomainError",
    "EvalControls",
    "FieldState",
    "Grid",
    "ModelParams",
    "SolveOutcome",
    "StoppingPolicy",
    "run",
    "step",
    "stable_dt",
]
