"""Constrained optimization through Legendre transforms.

Primal methods (penalty, augmented Lagrangian, SUMT barriers, nonlinear
rescaling, Lagrangian transformation) and the dual regularization or prox
methods they are equivalent to, plus a self-concordant Newton solver.
"""

from . import acceptance, equality_methods, harness, lt, merit, model, nr, sc_newton, sumt, transforms
from .errors import LegendreError
from .harness import RunConfig, compare, emit, run
from .model import ConvexProgram, make_problem
from .transforms import get_kernel, get_transform

__version__ = "0.1.0"

__all__ = [
    "acceptance",
    "equality_methods",
    "harness",
    "lt",
    "merit",
    "model",
    "nr",
    "sc_newton",
    "sumt",
    "transforms",
    "LegendreError",
    "RunConfig",
    "compare",
    "emit",
    "run",
    "ConvexProgram",
    "make_problem",
    "get_kernel",
    "get_transform",
]
