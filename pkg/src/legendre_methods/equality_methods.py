"""Equality-constrained methods: quadratic penalty and augmented Lagrangian.

Each primal method has a dual twin solved independently from the dual oracle:

* penalty ``f + (k/2)||c||^2`` with ``lam(k) = k c(x(k))``  <->  Tikhonov
  regularization ``max d(u) - ||u||^2 / (2k)``;
* augmented Lagrangian ``f - lam'c + (k/2)||c||^2`` with ``lam - k c``  <->
  quadratic prox ``max d(u) - ||u - lam||^2 / (2k)``.

The penalty side uses the Lagrangian ``f + lam'c`` (so its multipliers carry
the opposite sign of the stored ``lstar``); the augmented Lagrangian side uses
``f - lam'c``, the package-wide convention.  ``d3(u) = d(-u)`` bridges them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .merit import InnerStats, minimize_merit, separable_merit
from .model import ConvexProgram, dual_hessian, dual_value
from .transforms import get_transform

__all__ = [
    "EqualityIterate",
    "courant_step",
    "tikhonov_dual",
    "al_step",
    "quad_prox_dual",
    "al_run",
    "prox_value",
    "penalty_dual_value",
    "tikhonov_sequence",
]

_QUAD = get_transform("quadratic")


@dataclass(frozen=True)
class EqualityIterate:
    x: np.ndarray
    lam: np.ndarray
    k: float
    residual: float
    inner: InnerStats


def _require_equality(program: ConvexProgram):
    if not program.all_equality:
        raise DimensionError(f"{program.name}: equality-constrained program required")


def _start(program, x0):
    return np.zeros(program.n) if x0 is None else np.asarray(x0, dtype=float)


def courant_step(program: ConvexProgram, k: float, x0=None, tol: float = 1e-12) -> EqualityIterate:
    """Minimize ``f + (k/2)||c||^2``; multipliers ``k c(x(k))`` (Lagrangian ``f + lam'c``)."""
    _require_equality(program)
    if not k > 0:
        raise DomainError("k must be positive")
    oracle = separable_merit(program, _QUAD, k, 1.0, name="courant")
    x, stats, _ = minimize_merit(oracle, _start(program, x0), tol=tol)
    c = program.constraints(x)
    return EqualityIterate(x, k * c, k, float(np.linalg.norm(c)), stats)


def _dual_quadratic(program):
    """``d(u) = d(0) + g'u - 0.5 u'Su`` for the QP dual."""
    base = dual_value(program, np.zeros(program.m))
    return base.d, base.grad, -dual_hessian(program)


def penalty_dual_value(program: ConvexProgram, u) -> float:
    """Dual in the penalty convention, ``min_x f + u'c = d(-u)``."""
    return dual_value(program, -np.asarray(u, dtype=float)).d


def tikhonov_dual(program: ConvexProgram, k: float) -> np.ndarray:
    """``argmax d3(u) - ||u||^2/(2k)`` with ``d3(u) = d(-u)``: ``(S + I/k) u = -g``."""
    _require_equality(program)
    _, g, S = _dual_quadratic(program)
    return np.linalg.solve(S + np.eye(program.m) / k, -g)


def al_step(program: ConvexProgram, lam, k: float, x0=None, tol: float = 1e-12) -> EqualityIterate:
    """Minimize ``f - lam'c + (k/2)||c||^2`` and return ``lam - k c(x)``."""
    _require_equality(program)
    lam = np.asarray(lam, dtype=float)
    oracle = separable_merit(program, _QUAD, k, 1.0, linear=-lam, name="augmented_lagrangian")
    x, stats, _ = minimize_merit(oracle, _start(program, x0), tol=tol)
    c = program.constraints(x)
    return EqualityIterate(x, lam - k * c, k, float(np.linalg.norm(c)), stats)


def quad_prox_dual(program: ConvexProgram, lam, k: float) -> np.ndarray:
    """``argmax d(u) - ||u - lam||^2/(2k)``: ``(S + I/k) u = g + lam/k``."""
    _, g, S = _dual_quadratic(program)
    lam = np.asarray(lam, dtype=float)
    return np.linalg.solve(S + np.eye(program.m) / k, g + lam / k)


def prox_value(program: ConvexProgram, lam, k: float) -> float:
    """Moreau-type envelope ``p(lam) = max_u d(u) - ||u - lam||^2/(2k)``."""
    u = quad_prox_dual(program, lam, k)
    diff = u - np.asarray(lam, dtype=float)
    return dual_value(program, u).d - float(diff @ diff) / (2 * k)


def al_run(program: ConvexProgram, lam0, k: float, steps: int, tol: float = 1e-12) -> list[EqualityIterate]:
    lam = np.asarray(lam0, dtype=float)
    out = []
    x = None
    for _ in range(steps):
        it = al_step(program, lam, k, x0=x, tol=tol)
        out.append(it)
        lam, x = it.lam, it.x
    return out


def tikhonov_sequence(program: ConvexProgram, ks) -> list[tuple[float, np.ndarray, float]]:
    """``(k, u(k), d3(u(k)))`` along a k schedule."""
    return [(k, u, penalty_dual_value(program, u)) for k in ks for u in [tikhonov_dual(program, k)]]
