"""SUMT: log barrier, hyperbolic barrier, exponential penalty and log-sigmoid.

Primal side: ``x(k) = argmin f - k^{-1+a} sum pi(k c_i)`` with multipliers
``lam_i(k) = k^a pi'(k c_i(x(k)))`` (``a = 0`` except for the modified
log-sigmoid).  Dual side: ``max d(u) + k^{a-1} sum pi*(k^{-a} u_i)``, i.e.

=============  ===============================  ============================
kind           pi(t)                            dual regularizer r(u)
=============  ===============================  ============================
log            ln t                             sum ln u (+ const)
hyperbolic     -1/t                             2 sum sqrt(u)
exponential    -exp(-t)                         -sum u (ln u - 1)
log_sigmoid    t - ln(1 + e^t)                  Fermi-Dirac entropy on (0, k^a)
=============  ===============================  ============================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InfeasibleStart, UnsupportedKind
from .merit import InnerStats, minimize_merit, separable_merit
from .model import ConvexProgram, dual_hessian, dual_value, kkt_residual
from .sc_newton import SmoothOracle, minimize
from .transforms import ScalarTransform, get_transform

__all__ = [
    "SUMT_KINDS",
    "DEFAULT_ALPHA",
    "SumtPoint",
    "BarrierRun",
    "GapReport",
    "resolve_kind",
    "sumt_minimize",
    "sumt_path",
    "dual_regularized",
    "regularizer",
    "gap_report",
    "k_grid",
    "DualMonotonicity",
    "dual_monotonicity",
    "InfeasibilityReport",
    "infeasibility_report",
]

DEFAULT_ALPHA = 0.25

_PI = {
    "log": "log_barrier",
    "hyperbolic": "hyperbolic_barrier",
    "exponential": "exponential",
    "log_sigmoid": "log_sigmoid",
}
_ALIASES = {"hyp": "hyperbolic", "exp": "exponential", "ls": "log_sigmoid"}
SUMT_KINDS = tuple(_PI)
BARRIER_KINDS = ("log", "hyperbolic")


def resolve_kind(kind: str) -> str:
    kind = _ALIASES.get(kind, kind)
    if kind not in _PI:
        raise UnsupportedKind(f"unknown SUMT kind {kind!r}")
    return kind


def _pi(kind: str) -> ScalarTransform:
    return get_transform(_PI[kind])


def _alpha(kind: str, alpha: float | None) -> float:
    if kind != "log_sigmoid":
        return 0.0
    a = DEFAULT_ALPHA if alpha is None else float(alpha)
    if not 0 <= a < 0.5:
        raise DomainError("log-sigmoid modification needs 0 <= alpha < 0.5")
    return a


def k_grid(k0: float = 1.0, factor: float = 10.0, kmax: float = 1e3) -> list[float]:
    ks, k = [], float(k0)
    while k <= kmax * (1 + 1e-12):
        ks.append(k)
        k *= factor
    return ks


@dataclass(frozen=True)
class SumtPoint:
    kind: str
    k: float
    x: np.ndarray
    lam: np.ndarray
    c: np.ndarray
    inner: InnerStats

    @property
    def gap(self) -> float:
        """``(c(x(k)), lam(k))``."""
        return float(self.c @ self.lam)


@dataclass
class BarrierRun:
    kind: str
    alpha: float
    points: list[SumtPoint] = field(default_factory=list)

    @property
    def L(self) -> float:
        return max(float(np.max(p.lam)) for p in self.points)


def sumt_minimize(kind: str, program: ConvexProgram, k: float, x_start=None, alpha: float | None = None, tol: float = 1e-12) -> SumtPoint:
    """Minimize the SUMT merit at fixed ``k`` and extract multipliers."""
    kind = resolve_kind(kind)
    if not program.all_inequality:
        raise UnsupportedKind("SUMT methods handle inequality constraints only")
    if not k > 0:
        raise DomainError("k must be positive")
    a = _alpha(kind, alpha)
    pi = _pi(kind)
    if x_start is None:
        x_start = program.slater if program.slater is not None else np.zeros(program.n)
    x_start = np.asarray(x_start, dtype=float)
    if kind in BARRIER_KINDS and np.any(program.constraints(x_start) <= 0):
        raise InfeasibleStart(f"{kind} barrier needs a strictly feasible start")
    oracle = separable_merit(program, pi, -(k ** (a - 1.0)), k, name=f"sumt:{kind}")
    x, stats, _ = minimize_merit(oracle, x_start, tol=tol)
    c = program.constraints(x)
    lam = k**a * np.atleast_1d(pi.eval(k * c, 1))
    return SumtPoint(kind, k, x, lam, c, stats)


def sumt_path(kind: str, program: ConvexProgram, ks, alpha: float | None = None, x_start=None, tol: float = 1e-12) -> BarrierRun:
    """Warm-started sequence of SUMT minimizers along the schedule ``ks``."""
    kind = resolve_kind(kind)
    run = BarrierRun(kind, _alpha(kind, alpha))
    x = x_start
    for k in ks:
        p = sumt_minimize(kind, program, k, x, alpha, tol=tol)
        run.points.append(p)
        x = p.x
    return run


def regularizer(kind: str, u, k: float, alpha: float | None = None) -> float:
    """``k^a sum pi*(k^{-a} u)`` (so the dual merit is ``d(u) + r(u)/k``)."""
    kind = resolve_kind(kind)
    a = _alpha(kind, alpha)
    s = k**-a * np.asarray(u, dtype=float)
    return k**a * float(np.sum(_pi(kind).conjugate(s)))


def dual_regularized(kind: str, program: ConvexProgram, k: float, alpha: float | None = None, u0=None, tol: float = 1e-12) -> np.ndarray:
    """Maximize ``d(u) + k^{a-1} sum pi*(k^{-a} u)`` by damped Newton on the negated merit."""
    kind = resolve_kind(kind)
    a = _alpha(kind, alpha)
    pi = _pi(kind)
    sc = k**-a
    lo, hi = pi.conj_domain
    S = -dual_hessian(program)

    def inside(u):
        s = sc * u
        return bool(np.all(np.isfinite(u)) and np.all(s > lo) and np.all(s < hi))

    def value(u):
        if not inside(u):
            return math.inf
        return -dual_value(program, u).d - k ** (a - 1.0) * float(np.sum(pi.conjugate(sc * u)))

    def grad(u):
        return -dual_value(program, u).grad - np.atleast_1d(pi.conjugate(sc * u, 1)) / k

    def hess(u):
        # clip so the curvature of multipliers that underflow towards 0 stays finite
        s = np.maximum(sc * u, lo + 1e-300)
        return S - np.diag(np.atleast_1d(pi.conjugate(s, 2))) * sc / k

    oracle = SmoothOracle(program.m, value, grad, hess, inside, name=f"dual:{kind}", bounds=(lo / sc, hi / sc))
    if u0 is None:
        u0 = np.full(program.m, 0.5 * hi / sc if math.isfinite(hi) else 1.0)
    return minimize(oracle, u0, tol=tol, step_rule="interior").x


@dataclass(frozen=True)
class GapReport:
    k: float
    gap: float
    bound: float | None
    satisfied: bool | None
    stationarity: float


def gap_report(run: BarrierRun, program: ConvexProgram | None = None) -> list[GapReport]:
    """Measured gap per ``k`` against the closed-form bound of the kind.

    log: ``gap = m/k`` (equality, relative 1e-6); hyperbolic: ``gap <= m sqrt(L)/k``;
    other kinds carry no bound.
    """
    out = []
    L = run.L
    for p in run.points:
        m = p.lam.size
        if run.kind == "log":
            bound = m / p.k
            ok = abs(p.gap - bound) <= 1e-6 * bound
        elif run.kind == "hyperbolic":
            bound = m * math.sqrt(L) / p.k
            ok = p.gap <= bound + 1e-9
        else:
            bound, ok = None, None
        stat = kkt_residual(program, p.x, p.lam).stationarity if program is not None else float("nan")
        out.append(GapReport(p.k, p.gap, bound, ok, stat))
    return out


@dataclass(frozen=True)
class DualMonotonicity:
    ks: list[float]
    d: list[float]
    r: list[float]

    @property
    def d_increasing(self) -> bool:
        return all(b > a for a, b in zip(self.d, self.d[1:]))

    @property
    def r_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.r, self.r[1:]))


def dual_monotonicity(program: ConvexProgram, ks, alpha: float | None = None) -> DualMonotonicity:
    """``d(lam_s)`` and ``r(lam_s) = sum pi*(k_s^{-a} lam_s)`` along the log-sigmoid path."""
    a = _alpha("log_sigmoid", alpha)
    run = sumt_path("log_sigmoid", program, ks, alpha=a)
    pi = _pi("log_sigmoid")
    d = [dual_value(program, p.lam).d for p in run.points]
    r = [float(np.sum(pi.conjugate(np.clip(p.k**-a * p.lam, 0.0, 1.0)))) for p in run.points]
    return DualMonotonicity(list(ks), d, r)


@dataclass(frozen=True)
class InfeasibilityReport:
    k: float
    violation: float
    bound: float
    satisfied: bool


def _unconstrained_min(program: ConvexProgram) -> float:
    try:
        x = np.linalg.solve(program.Q, -program.q)
    except np.linalg.LinAlgError:
        return -math.inf
    return program.objective(x)


def infeasibility_report(run: BarrierRun, program: ConvexProgram) -> list[InfeasibilityReport]:
    """Largest violation ``max |c_i(x(k))|`` over violated constraints against
    ``k^{-a} f(x*) + m ln 2 / k``.

    The bound presumes ``f >= 0``; it is applied to ``f - inf f`` (the
    unconstrained minimum of the quadratic), which leaves the method unchanged.
    """
    if program.xstar is None:
        raise DomainError(f"{program.name}: stored solution required")
    f_star = program.objective(program.xstar) - _unconstrained_min(program)
    out = []
    for p in run.points:
        viol = float(np.max(-p.c[p.c < 0], initial=0.0))
        bound = p.k**-run.alpha * f_star + p.lam.size * math.log(2.0) / p.k
        out.append(InfeasibilityReport(p.k, viol, bound, viol <= bound + 1e-9))
    return out
