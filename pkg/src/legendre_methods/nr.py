"""Nonlinear rescaling: rescaled-Lagrangian steps and their dual prox twins.

One NR step minimizes ``f - k^{-1} sum lam_i psi(k c_i)`` and updates
``lam_i <- lam_i psi'(k c_i(x))``.  By LEID the new multipliers maximize
``d(u) - k^{-1} sum lam_i phi(u_i/lam_i)`` with the kernel ``phi = -psi*``;
for ``psi(t) = ln(t + 1)`` (MBF) that distance is Kullback-Leibler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, DomainViolation, StepGuardExhausted
from .merit import InnerStats, minimize_merit, separable_merit
from .model import ConvexProgram, dual_hessian, dual_value, kkt_residual
from .sc_newton import SmoothOracle, minimize
from .transforms import KernelFunction, ScalarTransform, get_transform, kernel_of

__all__ = [
    "LAMBDA_FLOOR",
    "NR_TRANSFORMS",
    "NRStep",
    "NRState",
    "NRRun",
    "MultiplicativeRun",
    "resolve_psi",
    "nr_step",
    "mbf_run",
    "nr_run",
    "kernel_prox",
    "phi_prox",
    "phi_divergence",
    "kl_divergence",
    "explicit_multiplicative",
    "implicit_residuals",
]

LAMBDA_FLOOR = 1e-300

# CLI short names
NR_TRANSFORMS = {"mbf": "mbf_log", "exp": "exponential_shifted", "hyp": "mbf_hyperbolic"}


def resolve_psi(psi) -> ScalarTransform:
    if isinstance(psi, ScalarTransform):
        return psi
    return get_transform(NR_TRANSFORMS.get(psi, psi))


def _positive(lam, m) -> np.ndarray:
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (m,)).copy()
    if np.any(~(lam > 0)):
        raise DomainError("multipliers must be strictly positive")
    return lam


@dataclass(frozen=True)
class NRStep:
    x: np.ndarray
    lam: np.ndarray
    inner: InnerStats
    stationarity: float
    events: tuple[str, ...] = ()


def nr_step(program: ConvexProgram, psi, lam, k: float, x0=None, tol: float = 1e-12) -> NRStep:
    """Minimize ``f - k^{-1} sum lam_i psi(k c_i)`` and rescale the multipliers."""
    psi = resolve_psi(psi)
    lam = _positive(lam, program.m)
    if not k > 0:
        raise DomainError("k must be positive")
    if x0 is None:
        x0 = program.slater if program.slater is not None else np.zeros(program.n)
    x0 = np.asarray(x0, dtype=float)
    if not psi.contains(k * program.constraints(x0)):
        raise DomainViolation(f"start point outside the domain of {psi.name} at k={k:g}")
    oracle = separable_merit(program, psi, -lam / k, k, name=f"nr:{psi.name}")
    x, stats, _ = minimize_merit(oracle, x0, tol=tol)
    lam_hat = lam * np.atleast_1d(psi.eval(k * program.constraints(x), 1))
    events = ()
    if np.any(lam_hat < LAMBDA_FLOOR):
        events = (f"multiplier underflow floored at {LAMBDA_FLOOR:g}",)
        lam_hat = np.maximum(lam_hat, LAMBDA_FLOOR)
    stat = kkt_residual(program, x, lam_hat).stationarity
    return NRStep(x, lam_hat, stats, stat, events)


def kl_divergence(u, v) -> float:
    """``sum u ln(u/v) - u + v`` with ``0 ln 0 = 0`` (``u >= 0``, ``v > 0``)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(u < 0) or np.any(v <= 0):
        raise DomainError("KL divergence needs u >= 0 and v > 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(u > 0, u * np.log(u / v), 0.0)
    return float(np.sum(t - u + v))


def phi_divergence(kernel: KernelFunction, u, lam) -> float:
    """``D(u, lam) = sum lam_i phi(u_i / lam_i)``."""
    lam = np.asarray(lam, dtype=float)
    return float(np.sum(lam * np.atleast_1d(kernel.eval(np.asarray(u, dtype=float) / lam))))


@dataclass(frozen=True)
class NRState:
    s: int
    k: float
    lam: np.ndarray
    x: np.ndarray | None
    d: float
    complementarity: float
    kl: float | None
    inner: InnerStats | None
    stationarity: float


@dataclass
class NRRun:
    psi: str
    states: list[NRState] = field(default_factory=list)
    events: list[str] = field(default_factory=list)

    @property
    def lams(self) -> list[np.ndarray]:
        return [st.lam for st in self.states]

    @property
    def d(self) -> np.ndarray:
        return np.array([st.d for st in self.states])

    def ergodic_x(self, start: int = 1) -> np.ndarray:
        """Average of the primal iterates from ``start`` on (a diagnostic only)."""
        xs = [st.x for st in self.states[start:] if st.x is not None]
        return np.mean(xs, axis=0)


def nr_run(program: ConvexProgram, psi, lam0, k: float, steps: int, k_factor: float = 1.0, x0=None, tol: float = 1e-12) -> NRRun:
    """``steps`` NR iterations at fixed ``k`` (or ``k *= k_factor`` per step).

    Row 0 holds ``lam0``; row ``s`` the multipliers after ``s`` updates with
    the primal minimizer that produced them.
    """
    psi = resolve_psi(psi)
    lam = _positive(lam0, program.m)
    lstar = program.lstar

    def state(s, k, lam, x, inner, stat):
        comp = float(lam @ program.constraints(x)) if x is not None else math.nan
        kl = kl_divergence(lstar, lam) if lstar is not None else None
        return NRState(s, k, lam, x, dual_value(program, lam).d, comp, kl, inner, stat)

    run = NRRun(psi.name)
    run.states.append(state(0, k, lam, None, None, math.nan))
    x = x0
    for s in range(1, steps + 1):
        if x is not None and not psi.contains(k * program.constraints(x)):
            x = None
        step = nr_step(program, psi, lam, k, x0=x, tol=tol)
        run.events.extend(f"step {s}: {e}" for e in step.events)
        lam, x = step.lam, step.x
        run.states.append(state(s, k, lam, x, step.inner, step.stationarity))
        k *= k_factor
    return run


def mbf_run(program: ConvexProgram, lam0, k: float, steps: int, k_factor: float = 1.0) -> NRRun:
    """Modified-barrier run: ``lam <- lam / (k c(x) + 1)``."""
    return nr_run(program, "mbf_log", lam0, k, steps, k_factor)


def kernel_prox(program: ConvexProgram, kernel: KernelFunction, lam, k: float, weights=None, tol: float = 1e-12) -> np.ndarray:
    """``argmax d(u) - k^{-1} sum w_i phi(u_i / lam_i)`` over the kernel's box.

    ``weights=None`` means ``w = lam`` (phi-divergence); LT passes ones.
    """
    lam = _positive(lam, program.m)
    w = lam.copy() if weights is None else np.broadcast_to(np.asarray(weights, dtype=float), lam.shape).copy()
    lo, hi = kernel.domain
    S = -dual_hessian(program)

    def inside(u):
        s = u / lam
        return bool(np.all(np.isfinite(u)) and np.all(s > lo) and np.all(s < hi))

    def value(u):
        if not inside(u):
            return math.inf
        return -dual_value(program, u).d + float(np.sum(w * np.atleast_1d(kernel.eval(u / lam)))) / k

    def grad(u):
        return -dual_value(program, u).grad + w * np.atleast_1d(kernel.eval(u / lam, 1)) / (k * lam)

    def hess(u):
        s = np.maximum(u / lam, lo + 1e-300)
        return S + np.diag(w * np.atleast_1d(kernel.eval(s, 2)) / (k * lam * lam))

    oracle = SmoothOracle(program.m, value, grad, hess, inside, name=f"prox:{kernel.name}", bounds=(lo * lam, hi * lam))
    u0 = lam.copy() if hi > 1 else 0.5 * (lo + hi) * lam
    return minimize(oracle, u0, tol=tol, step_rule="interior").x


def phi_prox(program: ConvexProgram, kernel, lam, k: float, tol: float = 1e-12) -> np.ndarray:
    """Dual prox ``max d(u) - k^{-1} sum lam_i phi(u_i/lam_i)`` (NR's twin)."""
    if not isinstance(kernel, KernelFunction):
        kernel = kernel_of(resolve_psi(kernel))
    return kernel_prox(program, kernel, lam, k, tol=tol)


@dataclass
class MultiplicativeRun:
    lams: list[np.ndarray]
    ks: list[float]
    events: list[str] = field(default_factory=list)


def explicit_multiplicative(dual_oracle, lam0, k: float, steps: int, max_halvings: int = 60) -> MultiplicativeRun:
    """``lam <- lam / (1 - k grad d(lam))``; ``k`` is halved while a denominator is not positive.

    ``dual_oracle`` is a ``ConvexProgram`` (analytic QP dual) or a callable
    returning the dual gradient.
    """
    if isinstance(dual_oracle, ConvexProgram):
        program = dual_oracle

        def grad(u):
            return dual_value(program, u).grad

    else:
        grad = dual_oracle
    lam = np.asarray(lam0, dtype=float).copy()
    if np.any(~(lam > 0)):
        raise DomainError("multipliers must be strictly positive")
    run = MultiplicativeRun([lam.copy()], [k])
    for s in range(1, steps + 1):
        g = np.asarray(grad(lam), dtype=float)
        halvings = 0
        while np.any(1.0 - k * g <= 0):
            halvings += 1
            if halvings > max_halvings:
                raise StepGuardExhausted("k underflowed while enforcing 1 - k grad d > 0")
            k *= 0.5
            run.events.append(f"step {s}: k halved to {k:g}")
        lam = lam / (1.0 - k * g)
        run.lams.append(lam.copy())
        run.ks.append(k)
    return run


def implicit_residuals(program: ConvexProgram, run: NRRun) -> list[float]:
    """``max |lam_{s+1} - lam_s - k lam_{s+1} grad d(lam_{s+1})|`` per MBF step."""
    out = []
    for a, b in zip(run.states, run.states[1:]):
        g = dual_value(program, b.lam).grad
        out.append(float(np.max(np.abs(b.lam - a.lam - a.k * b.lam * g))))
    return out
