"""Self-concordant toolkit and the damped/pure Newton minimizer.

``minimize`` is also the inner solver for every primal method in the package.
It runs damped steps ``x - (1 + lam)^{-1} H^{-1} g`` while the Newton decrement
exceeds ``beta`` and pure Newton steps afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import linalg

from .errors import (
    DomainError,
    DomainViolation,
    MaxIterations,
    RadiusTooLarge,
    SingularHessian,
)

__all__ = [
    "SmoothOracle",
    "NewtonStep",
    "MinimizeResult",
    "omega",
    "omega_star",
    "kappa_bound",
    "newton_decrement",
    "newton_direction",
    "damped_step",
    "minimize",
    "sc_check",
    "local_norms",
    "bounds_audit",
    "dikin_membership",
    "log_barrier_oracle",
    "quadratic_oracle",
    "neg_log_oracle",
    "quartic_oracle",
    "analytic_center_instance",
    "superlinear_pairs",
    "random_barrier_instance",
    "random_pairs",
]

BETA_MAX = (3.0 - math.sqrt(5.0)) / 2.0
DEFAULT_BETA = 0.25
DEFAULT_TOL = 1e-12
# below this decrement a step that fails to shrink it is taken as the float floor
FLOOR_DECREMENT = 1e-9


@dataclass(frozen=True)
class SmoothOracle:
    """Value/gradient/Hessian callbacks on an open domain.

    ``value`` may return ``inf`` outside the domain; ``in_domain`` is the
    authoritative membership test.  ``d3(x, u)`` returns ``D^3F(x)[u,u,u]``.
    ``bounds = (lo, hi)`` describes a box domain for the ``interior`` step
    rule (default: the positive orthant).
    """

    n: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    in_domain: Callable[[np.ndarray], bool] = lambda x: True
    d3: Callable[[np.ndarray, np.ndarray], float] | None = None
    name: str = "oracle"
    bounds: tuple | None = None

    def __call__(self, x) -> float:
        return self.value(x)


class NewtonStep(NamedTuple):
    index: int
    x: np.ndarray
    F: float
    decrement: float
    step_type: str
    step_length: float
    decrease: float
    omega: float
    backtracks: int


@dataclass
class MinimizeResult:
    x: np.ndarray
    F: float
    decrement: float
    trace: list[NewtonStep] = field(default_factory=list)
    events: list[str] = field(default_factory=list)
    converged: bool = True

    @property
    def steps(self) -> int:
        return len(self.trace)

    @property
    def damped_steps(self) -> list[NewtonStep]:
        return [s for s in self.trace if s.step_type == "damped"]

    @property
    def pure_steps(self) -> list[NewtonStep]:
        return [s for s in self.trace if s.step_type == "pure"]


def omega(t):
    """``t - ln(1 + t)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= -1):
        raise DomainError("omega requires t > -1")
    out = t - np.log1p(t)
    return float(out) if out.ndim == 0 else out


def omega_star(s):
    """``-s - ln(1 - s)``, the conjugate of ``omega``."""
    s = np.asarray(s, dtype=float)
    if np.any(s >= 1):
        raise DomainError("omega_star requires s < 1")
    out = -s - np.log1p(-s)
    return float(out) if out.ndim == 0 else out


def kappa_bound(lam: float) -> float:
    """Log-scale progress ratio ``ln(omega(-lam) - omega(lam)) / ln omega(lam)`` of a damped step."""
    if not 0 < lam < 1:
        raise DomainError("kappa_bound requires 0 < lam < 1")
    return math.log(omega(-lam) - omega(lam)) / math.log(omega(lam))


def _factor(H: np.ndarray):
    H = np.asarray(H, dtype=float)
    if not np.all(np.isfinite(H)):
        raise SingularHessian("Hessian has non-finite entries")
    try:
        return linalg.cho_factor(H, lower=True, check_finite=False)
    except linalg.LinAlgError:
        n = H.shape[0]
        bump = 1e-12 * max(np.trace(H), 0.0) / n
        try:
            return linalg.cho_factor(H + bump * np.eye(n), lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise SingularHessian("Hessian is not positive definite") from exc


def newton_direction(F: SmoothOracle, x) -> tuple[np.ndarray, float, np.ndarray]:
    """Return ``(dx, decrement, grad)`` with ``dx = -H^{-1} g``."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(F.grad(x), dtype=float).reshape(-1)
    cf = _factor(np.atleast_2d(F.hess(x)))
    dx = -linalg.cho_solve(cf, g, check_finite=False)
    return dx, math.sqrt(max(-float(g @ dx), 0.0)) + 0.0, g


def newton_decrement(F: SmoothOracle, x) -> float:
    """``lam(x) = (H^{-1} g, g)^{1/2}``."""
    if not F.in_domain(np.asarray(x, dtype=float)):
        raise DomainError("x is outside the oracle domain")
    return newton_direction(F, x)[1]


def damped_step(F: SmoothOracle, x) -> np.ndarray:
    """One step ``x - (1 + lam)^{-1} H^{-1} g``; leaving the domain is an error."""
    x = np.asarray(x, dtype=float)
    if not F.in_domain(x):
        raise DomainError("x is outside the oracle domain")
    dx, lam, _ = newton_direction(F, x)
    x_next = x + dx / (1.0 + lam)
    if not F.in_domain(x_next):
        raise DomainViolation("damped Newton step left the domain; oracle is not self-concordant")
    return x_next


def minimize(
    F: SmoothOracle,
    x0,
    beta: float = DEFAULT_BETA,
    tol: float = DEFAULT_TOL,
    max_iter: int = 500,
    globalize: bool = True,
    step_rule: str = "damped",
) -> MinimizeResult:
    """Damped Newton while ``lam > beta``, pure Newton afterwards.

    With ``globalize`` (default) a step that leaves the domain or fails an
    Armijo test is halved; this never triggers on self-concordant oracles.
    ``step_rule="armijo"`` starts every step at full length instead of
    ``1/(1 + lam)``, which is far faster on merits that are not
    self-concordant (exponential penalties with large ``k``).
    ``step_rule="interior"`` is the Armijo rule for variables confined to a
    box (``F.bounds``, default the positive orthant): the distance to a bound
    is changed geometrically (the Newton direction in log coordinates), so
    multipliers many orders of magnitude below their start are reached in a
    few steps.
    """
    if step_rule not in ("damped", "armijo", "interior"):
        raise DomainError(f"unknown step rule {step_rule!r}")
    if not 0 < beta < BETA_MAX:
        raise DomainError(f"beta must lie in (0, {BETA_MAX:.6f})")
    x = np.array(x0, dtype=float).reshape(-1)
    if not F.in_domain(x):
        raise DomainError("starting point is outside the oracle domain")
    fx = float(F.value(x))
    trace: list[NewtonStep] = []
    events: list[str] = []
    prev_lam = prev_free = math.inf
    for it in range(max_iter + 1):
        dx, lam, g = newton_direction(F, x)
        if step_rule == "interior":
            lam_free = lam if lam <= tol else _free_decrement(F, x, g)
            done = lam_free <= tol or (lam_free <= FLOOR_DECREMENT and lam_free >= 0.5 * prev_free)
            prev_free = lam_free
        else:
            done = lam <= tol or (lam <= FLOOR_DECREMENT and lam >= 0.5 * prev_lam)
        if done:
            return MinimizeResult(x, fx, lam, trace, events, True)
        if it == max_iter:
            break
        if step_rule == "damped":
            step_type = "damped" if lam > beta else "pure"
        else:
            step_type = "armijo" if lam > beta else "pure"
        t = 1.0 / (1.0 + lam) if step_type == "damped" else 1.0
        path = _interior_path(x, dx, F.bounds) if step_rule == "interior" else (lambda t, x=x, dx=dx: x + t * dx)
        x_new = path(t)
        if step_type == "pure" and step_rule == "damped" and not F.in_domain(x_new):
            events.append(f"step {it}: pure step left the domain, damped fallback")
            step_type, t = "damped", 1.0 / (1.0 + lam)
            x_new = x + t * dx
        backtracks = 0
        if globalize:
            slope = -lam * lam
            slack = 1e-13 * (1.0 + abs(fx))
            while True:
                ok = F.in_domain(x_new)
                f_new = float(F.value(x_new)) if ok else math.inf
                if ok and math.isfinite(f_new) and (
                    f_new <= fx + 1e-4 * t * slope or (lam < 1e-6 and f_new <= fx + slack)
                ):
                    break
                backtracks += 1
                if backtracks > 60:
                    raise DomainViolation("line search failed to find an acceptable step")
                t *= 0.5
                x_new = path(t)
        else:
            if not F.in_domain(x_new):
                raise DomainViolation("Newton step left the domain")
            f_new = float(F.value(x_new))
        trace.append(NewtonStep(it, x.copy(), fx, lam, step_type, t, fx - f_new, omega(lam), backtracks))
        x, fx, prev_lam = x_new, f_new, lam
    exc = MaxIterations(f"no convergence in {max_iter} Newton steps (decrement {lam:.3e})")
    exc.x = x
    raise exc


def _parked(x, g, bounds, gap=1e-12):
    """Components pressed against a bound they already touch (to within ``gap``)."""
    lo, hi = (np.broadcast_to(np.asarray(v, dtype=float), x.shape) for v in (bounds or (0.0, math.inf)))
    with np.errstate(invalid="ignore"):
        at_lo = (g > 0) & np.isfinite(lo) & (x - lo <= gap * np.maximum(1.0, np.abs(lo)))
        at_hi = (g < 0) & np.isfinite(hi) & (hi - x <= gap * np.maximum(1.0, np.abs(hi)))
    return at_lo | at_hi


def _free_decrement(F: SmoothOracle, x, g) -> float:
    """Newton decrement over the components not parked at a bound.

    A parked component keeps a decrement that floating point cannot remove
    (its true value underflows), so interior solves stop on the rest.
    """
    free = ~_parked(x, g, F.bounds)
    if not free.any():
        return 0.0
    H = np.asarray(F.hess(x), dtype=float)[np.ix_(free, free)]
    gf = g[free]
    try:
        return math.sqrt(max(float(gf @ np.linalg.solve(H, gf)), 0.0))
    except np.linalg.LinAlgError:
        return math.inf


def _interior_path(x, dx, bounds):
    """Curve with tangent ``dx`` at ``t = 0`` that never leaves the box.

    Towards a finite bound the gap shrinks geometrically (a Newton step in
    log-gap coordinates); components that would round onto a bound stay put.
    """
    lo, hi = (np.broadcast_to(np.asarray(v, dtype=float), x.shape) for v in (bounds or (0.0, math.inf)))
    down = (dx < 0) & np.isfinite(lo)
    up = (dx > 0) & np.isfinite(hi)
    gap_lo = np.where(down, x - lo, 1.0)
    gap_hi = np.where(up, hi - x, 1.0)

    def path(t):
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            y = x + t * dx
            # expm1 keeps increments far below the gap from rounding away
            y = np.where(down, x + gap_lo * np.expm1(np.clip(t * dx / gap_lo, -50.0, 0.0)), y)
            y = np.where(up, x - gap_hi * np.expm1(np.clip(-t * dx / gap_hi, -50.0, 0.0)), y)
            return np.where((y <= lo) | (y >= hi), x, y)

    return path


# ---------------------------------------------------------------- SC diagnostics


def _segment(F: SmoothOracle, x, u, cap=10.0):
    """In-domain parameter interval of ``x + t u`` (capped at ``+-cap``)."""

    def reach(sign):
        if F.in_domain(x + sign * cap * u):
            return cap
        lo, hi = 0.0, cap
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if F.in_domain(x + sign * mid * u):
                lo = mid
            else:
                hi = mid
        return lo

    return -reach(-1.0), reach(1.0)


@dataclass(frozen=True)
class ScCheck:
    max_leinv: float
    verdict: bool
    t: np.ndarray
    values: np.ndarray


def sc_check(F: SmoothOracle, x, u, M: float = 2.0, samples: int = 201) -> ScCheck:
    """Sample ``|f'''| f''^{-3/2}`` for ``f(t) = F(x + t u)`` on the in-domain segment."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if not F.in_domain(x):
        raise DomainError("x is outside the oracle domain")
    lo, hi = _segment(F, x, u)
    ts = lo + (hi - lo) * np.linspace(0.02, 0.98, samples)
    vals = np.empty(samples)
    for j, t in enumerate(ts):
        y = x + t * u
        f2 = float(u @ F.hess(y) @ u)
        if F.d3 is not None:
            f3 = float(F.d3(y, u))
        else:
            h = 1e-4 * min(1.0, t - lo, hi - t)
            f3 = (float(u @ F.hess(y + h * u) @ u) - float(u @ F.hess(y - h * u) @ u)) / (2 * h)
        vals[j] = math.inf if f2 <= 0 else abs(f3) * f2**-1.5
    mx = float(np.max(vals))
    return ScCheck(mx, bool(mx <= M + 1e-3), ts, vals)


def local_norms(F: SmoothOracle, x, u, v) -> tuple[float, float]:
    """``(||u||_x, ||v||_x^*)`` from the Hessian at ``x``."""
    x = np.asarray(x, dtype=float)
    H = np.atleast_2d(F.hess(x))
    cf = _factor(H)
    u = np.asarray(u, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    return math.sqrt(float(u @ H @ u)), math.sqrt(float(v @ linalg.cho_solve(cf, v)))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def bounds_audit(F: SmoothOracle, x, y, upper: bool = True) -> dict[str, float]:
    """Slack of each self-concordance inequality for the pair ``(x, y)``.

    Keys name the inequality; every slack should be ``>= 0`` up to rounding.
    Upper bounds need ``r = ||y - x||_x < 1``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if not (F.in_domain(x) and F.in_domain(y)):
        raise DomainError("both points must lie in the domain")
    d = y - x
    Hx = np.atleast_2d(F.hess(x))
    Hy = np.atleast_2d(F.hess(y))
    r = math.sqrt(max(float(d @ Hx @ d), 0.0))
    ry = math.sqrt(max(float(d @ Hy @ d), 0.0))
    if upper and r >= 1:
        raise RadiusTooLarge(f"||y - x||_x = {r:.4f} >= 1")
    taus = 0.5 * (_GL_NODES + 1.0)
    G = sum(0.5 * w * np.atleast_2d(F.hess(x + t * d)) for t, w in zip(taus, _GL_WEIGHTS))
    ev_y = linalg.eigh(Hy, Hx, eigvals_only=True)
    ev_g = linalg.eigh(0.5 * (G + G.T), Hx, eigvals_only=True)
    dg = float((np.asarray(F.grad(y)) - np.asarray(F.grad(x))) @ d)
    df = float(F.value(y)) - float(F.value(x)) - float(np.asarray(F.grad(x)) @ d)

    out = {
        "norm_lower": ry - r / (1 + r),
        "hessian_lower": float(ev_y.min()) - (1 - r) ** 2 if r < 1 else 0.0,
        "integral_lower": float(ev_g.min()) - (1 - r + r * r / 3),
        "gradient_lower": dg - r * r / (1 + r),
        "value_lower": df - omega(r),
    }
    if upper:
        out.update(
            {
                "norm_upper": r / (1 - r) - ry,
                "hessian_upper": (1 - r) ** -2 - float(ev_y.max()),
                "integral_upper": 1 / (1 - r) - float(ev_g.max()),
                "gradient_upper": r * r / (1 - r) - dg,
                "value_upper": omega_star(r) - df,
            }
        )
    return out


@dataclass(frozen=True)
class DikinVerdict:
    ok: bool
    failures: int
    samples: int


def dikin_membership(F: SmoothOracle, x, r: float, samples: int = 1000, seed: int = 0) -> DikinVerdict:
    """Draw points with ``||y - x||_x = r`` and test domain membership."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if not F.in_domain(x):
        raise DomainError("x is outside the oracle domain")
    L = np.linalg.cholesky(np.atleast_2d(F.hess(x)))
    rng = np.random.default_rng(seed)
    fails = 0
    for _ in range(samples):
        z = rng.standard_normal(x.size)
        y = x + r * linalg.solve_triangular(L.T, z / np.linalg.norm(z), lower=False)
        fails += not F.in_domain(y)
    return DikinVerdict(fails == 0, fails, samples)


def superlinear_pairs(values, f_star: float, lo: float = 1e-9, hi: float = 1.0):
    """Consecutive value errors ``(D_k, D_{k+1})`` with ``lo < D_k < hi``."""
    err = np.asarray(values, dtype=float) - f_star
    return [(err[i], err[i + 1]) for i in range(len(err) - 1) if lo < err[i] < hi]


# ---------------------------------------------------------------- oracles


def log_barrier_oracle(A, b, name: str = "log_barrier") -> SmoothOracle:
    """``F(x) = -sum ln(b_i - a_i^T x)``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)

    def slack(x):
        return b - A @ np.asarray(x, dtype=float).reshape(-1)

    def value(x):
        s = slack(x)
        return -float(np.sum(np.log(s))) if np.all(s > 0) else math.inf

    def grad(x):
        return A.T @ (1.0 / slack(x))

    def hess(x):
        s = slack(x)
        return (A.T / s**2) @ A

    def d3(x, u):
        w = A @ u
        return 2.0 * float(np.sum((w / slack(x)) ** 3))

    return SmoothOracle(A.shape[1], value, grad, hess, lambda x: bool(np.all(slack(x) > 0)), d3, name)


def quadratic_oracle(n: int) -> SmoothOracle:
    """``0.5 ||x||^2``."""
    return SmoothOracle(
        n,
        lambda x: 0.5 * float(np.dot(x, x)),
        lambda x: np.array(x, dtype=float),
        lambda x: np.eye(n),
        lambda x: True,
        lambda x, u: 0.0,
        "half_sq_norm",
    )


def neg_log_oracle() -> SmoothOracle:
    """``-ln x`` on ``x > 0``."""
    return log_barrier_oracle([[-1.0]], [0.0], name="neg_log")


def quartic_oracle() -> SmoothOracle:
    """``x^4``: convex but not self-concordant near 0 (negative control)."""
    return SmoothOracle(
        1,
        lambda x: float(x[0] ** 4),
        lambda x: np.array([4 * x[0] ** 3]),
        lambda x: np.array([[12 * x[0] ** 2]]),
        lambda x: True,
        lambda x, u: 24 * x[0] * u[0] ** 3,
        "quartic",
    )


def analytic_center_instance():
    """Six-sided polygon barrier in the plane: ``(oracle, A, b, x0)``.

    ``x0`` sits close to one face so the run has a visible damped phase.
    """
    angles = np.deg2rad([0.0, 55.0, 115.0, 170.0, 235.0, 300.0])
    A = np.column_stack([np.cos(angles), np.sin(angles)])
    b = np.array([1.0, 1.6, 1.2, 2.0, 1.5, 1.1])
    x0 = np.array([0.97, 0.02])
    return log_barrier_oracle(A, b, name="analytic_center"), A, b, x0


def random_barrier_instance(n: int = 5, m: int = 10, seed: int = 0):
    """Random polyhedral barrier containing the origin: ``(oracle, x0)``."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    b = rng.uniform(0.5, 1.5, m)
    return log_barrier_oracle(A, b, name=f"random_barrier({n},{m},{seed})"), np.zeros(n)


def random_pairs(F: SmoothOracle, x, count: int, r_max: float = 0.9, seed: int = 0):
    """``count`` points ``y`` with ``||y - x||_x`` uniform in ``(0, r_max)``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    L = np.linalg.cholesky(np.atleast_2d(F.hess(x)))
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        z = rng.standard_normal(x.size)
        r = rng.uniform(0.01, r_max)
        out.append(x + r * linalg.solve_triangular(L.T, z / np.linalg.norm(z), lower=False))
    return out
