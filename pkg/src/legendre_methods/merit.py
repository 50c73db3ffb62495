"""Separable merit functions ``f(x) + l'c(x) + sum_i w_i h(s_i c_i(x))``.

Every primal method in the package (penalty, augmented Lagrangian, SUMT,
nonlinear rescaling, Lagrangian transformation) minimizes a merit of this
shape, so one builder feeds them all into the Newton solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MaxIterations, SingularHessian, UnboundedMerit
from .model import ConvexProgram
from .sc_newton import MinimizeResult, SmoothOracle, minimize

__all__ = ["separable_merit", "minimize_merit", "InnerStats"]


def separable_merit(program: ConvexProgram, h, weight, scale, linear=None, name="merit") -> SmoothOracle:
    """Oracle for ``f + linear'c + sum w_i h(s_i c_i)``.

    ``h`` needs ``eval(t, order)`` and ``contains(t)`` (a ``ScalarTransform`` does).
    """
    A, b = program.A, program.b
    w = np.broadcast_to(np.asarray(weight, dtype=float), (program.m,)).copy()
    s = np.broadcast_to(np.asarray(scale, dtype=float), (program.m,)).copy()
    lin = np.zeros(program.m) if linear is None else np.asarray(linear, dtype=float)

    def args(x):
        return s * (A @ x - b)

    def in_domain(x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(np.isfinite(x))) and h.contains(args(x))

    def value(x):
        x = np.asarray(x, dtype=float)
        if not in_domain(x):
            return math.inf
        c = A @ x - b
        return program.objective(x) + float(lin @ c) + float(w @ np.atleast_1d(h.eval(s * c, 0)))

    def grad(x):
        x = np.asarray(x, dtype=float)
        return program.gradient(x) + A.T @ (lin + w * s * np.atleast_1d(h.eval(args(x), 1)))

    def hess(x):
        d = w * s * s * np.atleast_1d(h.eval(args(x), 2))
        return program.Q + (A.T * d) @ A

    def d3(x, u):
        au = A @ u
        return float(np.sum(w * s**3 * np.atleast_1d(h.eval(args(x), 3)) * au**3))

    return SmoothOracle(program.n, value, grad, hess, in_domain, d3, name)


@dataclass(frozen=True)
class InnerStats:
    steps: int
    decrement: float


def minimize_merit(oracle: SmoothOracle, x0, tol: float = 1e-12, max_iter: int = 500) -> tuple[np.ndarray, InnerStats, MinimizeResult]:
    try:
        res = minimize(oracle, x0, tol=tol, max_iter=max_iter, step_rule="armijo")
    except (SingularHessian, MaxIterations) as exc:
        raise UnboundedMerit(f"{oracle.name}: inner minimization failed ({exc})") from exc
    return res.x, InnerStats(res.steps, res.decrement), res
