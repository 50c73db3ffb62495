"""Lagrangian transformation: LT steps, Bregman-type prox twins and ellipsoid views.

An LT step minimizes ``f - k^{-1} sum psi(k lam_i c_i)`` (the multiplier sits
inside the transform) and updates ``lam_i <- lam_i psi'(k lam_i c_i(x))``.
The dual twin maximizes ``d(u) - k^{-1} B_phi(u, lam)`` with the Bregman-type
distance ``B_phi(u, v) = sum phi(u_i / v_i)``.  Close to the solution the prox
is a step to the boundary of a Dikin ellipsoid of the dual log-barrier, and on
an LP it becomes an affine-scaling method for the dual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, DomainViolation, NotInLatePhase, UnboundedBelow
from .merit import InnerStats, minimize_merit, separable_merit
from .model import ConvexProgram, dual_hessian, dual_value, kkt_residual
from .nr import LAMBDA_FLOOR, kernel_prox
from .transforms import DEFAULT_TAU, KernelFunction, ScalarTransform, get_kernel, get_transform, kernel_of

__all__ = [
    "LT_TRANSFORMS",
    "LATE_BAND",
    "BregmanDistance",
    "LTStep",
    "LTState",
    "LTRun",
    "EllipsoidStep",
    "IQPReport",
    "LPTrace",
    "resolve_lt_psi",
    "lt_step",
    "lt_run",
    "bregman_prox",
    "lp_bregman_prox",
    "bregman_distance",
    "log_barrier_bregman",
    "three_point_residual",
    "kernel_constants",
    "late_phase_start",
    "iqp_view",
    "lt_lp_run",
]

LT_TRANSFORMS = {"mbf": "mbf_log", "exp": "exponential_shifted", "chks": "chks", "hyp": "mbf_hyperbolic"}
# the late phase starts once every multiplier ratio lies in this band
LATE_BAND = (0.9, 1.1)


def resolve_lt_psi(psi, tau: float = DEFAULT_TAU) -> ScalarTransform:
    """Truncated member of a rescaling transform (``"mbf"``, ``"exp"``, ``"chks"`` ...)."""
    if isinstance(psi, ScalarTransform):
        return psi
    return get_transform(LT_TRANSFORMS.get(psi, psi), tau=tau)


# ---------------------------------------------------------------- distances


def _pos(v, name):
    v = np.asarray(v, dtype=float)
    if np.any(~(v > 0)):
        raise DomainError(f"{name} must be strictly positive")
    return v


def bregman_distance(kernel: KernelFunction, u, v) -> float:
    """``B_phi(u, v) = sum phi(u_i / v_i)``."""
    v = _pos(v, "v")
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise DomainError("u must be nonnegative")
    with np.errstate(divide="ignore"):
        return float(np.sum(np.atleast_1d(kernel.eval(u / v))))


def log_barrier_bregman(u, v) -> float:
    """Classical Bregman distance of ``F(t) = -sum ln t_i``."""
    v = _pos(v, "v")
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise DomainError("u must be nonnegative")
    with np.errstate(divide="ignore"):
        return float(np.sum(-np.log(u) + np.log(v) + (u - v) / v))


def three_point_residual(u, v, w) -> float:
    """``|B(u,v) - B(u,w) - B(w,v) - (grad F(v) - grad F(w), w - u)|`` for the log barrier."""
    u = _pos(u, "u")
    v = _pos(v, "v")
    w = _pos(w, "w")
    lhs = log_barrier_bregman(u, v) - log_barrier_bregman(u, w) - log_barrier_bregman(w, v)
    rhs = float((-1.0 / v + 1.0 / w) @ (w - u))
    return abs(lhs - rhs)


def kernel_constants(psi: ScalarTransform, t_max: float = 60.0, samples: int = 20001) -> tuple[float, float]:
    """``(m0, M)`` with ``|psi''| <= 1/m0`` everywhere and ``|psi''| >= 1/M`` on ``t <= 0``.

    Then ``phi'' >= m0`` on ``(0, inf)`` and ``phi'' <= M`` on ``[1, inf)``.
    """
    lo = psi.tau if psi.truncated else max(psi.domain[0] + 1e-6, -t_max)
    t = np.linspace(lo, t_max, samples)
    curv = np.abs(np.atleast_1d(psi.eval(t, 2)))
    neg = np.abs(np.atleast_1d(psi.eval(np.linspace(lo, 0.0, samples), 2)))
    return 1.0 / float(np.max(curv)), 1.0 / float(np.min(neg))


@dataclass(frozen=True)
class BregmanDistance:
    """Bregman-type distance ``sum phi(u_i/v_i)`` or the classical log-barrier one."""

    kernel: KernelFunction | None = None
    form: str = "bregman_type"

    def __post_init__(self):
        if self.form not in ("bregman_type", "classical"):
            raise DomainError(f"unknown distance form {self.form!r}")
        if self.form == "bregman_type" and self.kernel is None:
            object.__setattr__(self, "kernel", get_kernel("mbf_kernel"))

    def __call__(self, u, v) -> float:
        if self.form == "classical":
            return log_barrier_bregman(u, v)
        return bregman_distance(self.kernel, u, v)

    def grad_u(self, u, v) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        v = _pos(v, "v")
        if self.form == "classical":
            return -1.0 / u + 1.0 / v
        return np.atleast_1d(self.kernel.eval(u / v, 1)) / v

    def quadratic_bounds(self, u, v, m0: float, M: float) -> tuple[float, float]:
        """``(m0/2, M/2) * sum (u_i/v_i - 1)^2``."""
        q = float(np.sum((np.asarray(u, dtype=float) / _pos(v, "v") - 1.0) ** 2))
        return 0.5 * m0 * q, 0.5 * M * q


# ---------------------------------------------------------------- LT steps


@dataclass(frozen=True)
class LTStep:
    x: np.ndarray
    lam: np.ndarray
    inner: InnerStats
    stationarity: float
    events: tuple[str, ...] = ()


def lt_step(program: ConvexProgram, psi, lam, k: float, x0=None, tol: float = 1e-12) -> LTStep:
    """Minimize ``f - k^{-1} sum psi(k lam_i c_i)``; ``lam_i <- lam_i psi'(k lam_i c_i)``."""
    psi = resolve_lt_psi(psi)
    lam = _pos(np.broadcast_to(np.asarray(lam, dtype=float), (program.m,)).copy(), "multipliers")
    if not k > 0:
        raise DomainError("k must be positive")
    if x0 is None:
        x0 = program.slater if program.slater is not None else np.zeros(program.n)
    x0 = np.asarray(x0, dtype=float)
    if not psi.contains(k * lam * program.constraints(x0)):
        raise DomainViolation(f"start point outside the domain of {psi.name}")
    oracle = separable_merit(program, psi, -1.0 / k, k * lam, name=f"lt:{psi.name}")
    x, stats, _ = minimize_merit(oracle, x0, tol=tol)
    lam_hat = lam * np.atleast_1d(psi.eval(k * lam * program.constraints(x), 1))
    events = ()
    if np.any(lam_hat < LAMBDA_FLOOR):
        events = (f"multiplier underflow floored at {LAMBDA_FLOOR:g}",)
        lam_hat = np.maximum(lam_hat, LAMBDA_FLOOR)
    return LTStep(x, lam_hat, stats, kkt_residual(program, x, lam_hat).stationarity, events)


def _dual_or_nan(program, lam) -> float:
    try:
        return dual_value(program, lam).d
    except UnboundedBelow:
        return math.nan


@dataclass(frozen=True)
class LTState:
    s: int
    k: float
    lam: np.ndarray
    x: np.ndarray | None
    d: float
    inner: InnerStats | None
    stationarity: float


@dataclass
class LTRun:
    psi: ScalarTransform
    k: float
    states: list[LTState] = field(default_factory=list)
    events: list[str] = field(default_factory=list)

    @property
    def lams(self) -> list[np.ndarray]:
        return [st.lam for st in self.states]

    def ratios(self) -> list[np.ndarray]:
        """``lam_{s+1} / lam_s`` per step."""
        return [b.lam / a.lam for a, b in zip(self.states, self.states[1:])]

    def ratio_deviation(self) -> np.ndarray:
        return np.array([float(np.max(np.abs(r - 1.0))) for r in self.ratios()])


def lt_run(program: ConvexProgram, psi, lam0, k: float, steps: int, x0=None, tau: float = DEFAULT_TAU, tol: float = 1e-12) -> LTRun:
    """``steps`` LT iterations at fixed ``k``; row 0 holds ``lam0``."""
    psi = resolve_lt_psi(psi, tau)
    lam = _pos(np.broadcast_to(np.asarray(lam0, dtype=float), (program.m,)).copy(), "lam0")
    run = LTRun(psi, k)
    run.states.append(LTState(0, k, lam, None, _dual_or_nan(program, lam), None, math.nan))
    x = x0
    for s in range(1, steps + 1):
        step = lt_step(program, psi, lam, k, x0=x, tol=tol)
        run.events.extend(f"step {s}: {e}" for e in step.events)
        lam, x = step.lam, step.x
        run.states.append(LTState(s, k, lam, x, _dual_or_nan(program, lam), step.inner, step.stationarity))
    return run


def bregman_prox(program: ConvexProgram, kernel, lam, k: float, tol: float = 1e-12) -> np.ndarray:
    """``argmax d(u) - k^{-1} sum phi(u_i / lam_i)`` (LT's twin)."""
    if not isinstance(kernel, KernelFunction):
        kernel = kernel_of(resolve_lt_psi(kernel))
    if program.is_lp:
        return lp_bregman_prox(program, kernel, lam, k, tol=tol)
    return kernel_prox(program, kernel, lam, k, weights=1.0, tol=tol)


def lp_bregman_prox(lp: ConvexProgram, kernel: KernelFunction, lam, k: float, tol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """``argmax k (b, u) - B_phi(u, lam)`` subject to ``A^T u = a``, ``u > 0``.

    Infeasible-start Newton: each step solves the KKT system
    ``[[H, A], [A^T, 0]] [du; nu] = [-grad; a - A^T u]``, which eliminates the
    equality multipliers, with a fraction-to-boundary rule keeping ``u > 0``.
    """
    lam = _pos(np.broadcast_to(np.asarray(lam, dtype=float), (lp.m,)).copy(), "lam")
    A, a, b = lp.A, lp.q, lp.b
    m, n = A.shape

    def grad(u):
        return -k * b + np.atleast_1d(kernel.eval(u / lam, 1)) / lam

    def merit(u):
        return -k * float(b @ u) + float(np.sum(np.atleast_1d(kernel.eval(u / lam))))

    u = lam.copy()
    K = np.zeros((m + n, m + n))
    for _ in range(max_iter):
        g = grad(u)
        r = a - A.T @ u
        K[:m, :m] = np.diag(np.atleast_1d(kernel.eval(u / lam, 2)) / lam**2)
        K[:m, m:] = A
        K[m:, :m] = A.T
        sol = np.linalg.solve(K, np.concatenate([-g, r]))
        du = sol[:m]
        dec = math.sqrt(max(float(du @ K[:m, :m] @ du), 0.0))
        if dec <= tol and np.max(np.abs(r)) <= 1e-12 * (1 + np.max(np.abs(a))):
            return u
        shrink = du < 0
        t = min(1.0, 0.99 * float(np.min(-u[shrink] / du[shrink]))) if shrink.any() else 1.0
        if np.max(np.abs(r)) <= 1e-12 * (1 + np.max(np.abs(a))):
            f0 = merit(u)
            while merit(u + t * du) > f0 - 1e-4 * t * dec * dec and t > 1e-12:
                if dec < 1e-7 and merit(u + t * du) <= f0 + 1e-13 * (1 + abs(f0)):
                    break
                t *= 0.5
        u = u + t * du
    raise DomainViolation("equality-constrained prox did not converge")


# ---------------------------------------------------------------- ellipsoid views


def late_phase_start(run: LTRun, band: tuple[float, float] = LATE_BAND) -> int | None:
    """First step index ``s`` whose ratios ``lam_{s+1}/lam_s`` all lie in ``band``."""
    lo, hi = band
    for s, r in enumerate(run.ratios()):
        if np.all((r >= lo) & (r <= hi)):
            return s
    return None


def _secant_metric(kernel: KernelFunction, lam_s, lam_next) -> np.ndarray:
    """Diagonal ``H`` with ``phi'(r)/lam_s = H (lam_next - lam_s)`` exactly (``r`` the ratio).

    This is the mean-value form of the dual-prox metric; as ``r -> 1`` it
    tends to ``phi''(1) / lam_s^2``, the log-barrier Hessian for the MBF kernel.
    """
    r = lam_next / lam_s
    dr = r - 1.0
    near = np.abs(dr) < 1e-8
    slope = np.where(near, np.atleast_1d(kernel.eval(np.where(near, r, 1.0), 2)), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        secant = np.where(near, slope, np.atleast_1d(kernel.eval(r, 1)) / np.where(near, 1.0, dr))
    return secant / lam_s**2


@dataclass(frozen=True)
class EllipsoidStep:
    s: int
    radius: float
    identity_residual: float
    barrier_residual: float
    boundary_residual: float
    multiplier: float
    grad_norm: float

    @property
    def ok(self) -> bool:
        return self.identity_residual <= 1e-6 * (1 + self.grad_norm) and self.boundary_residual <= 1e-6


@dataclass
class IQPReport:
    s0: int
    k: float
    steps: list[EllipsoidStep]

    @property
    def ok(self) -> bool:
        return all(st.ok for st in self.steps)

    @property
    def max_identity_residual(self) -> float:
        return max((st.identity_residual for st in self.steps), default=0.0)

    @property
    def max_boundary_residual(self) -> float:
        return max((st.boundary_residual for st in self.steps), default=0.0)


def _trs_argmax(g0, S, H, radius):
    """``argmax g0'D - D'SD/2`` subject to ``D'HD <= radius^2`` (diagonal ``H``)."""
    h = np.sqrt(H)
    gt = g0 / h
    St = S / np.outer(h, h)
    w, V = np.linalg.eigh(St)
    beta = V.T @ gt

    def z(nu):
        return V @ (beta / (w + nu))

    if radius == 0.0:
        return np.zeros_like(g0), math.inf
    # the dual Hessian is singular when m > n; keep the bracket off the pole
    nu_lo = max(0.0, -float(w[0])) + 1e-12 * max(1.0, float(np.max(np.abs(w))))
    if np.linalg.norm(z(nu_lo)) <= radius:
        return z(nu_lo) / h, nu_lo
    hi = max(1.0, nu_lo)
    while np.linalg.norm(z(hi)) > radius:
        hi *= 2.0
    nu = brentq(lambda v: np.linalg.norm(z(v)) - radius, nu_lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
    return z(nu) / h, nu


def iqp_view(run: LTRun, program: ConvexProgram, band: tuple[float, float] = LATE_BAND) -> IQPReport:
    """Check every late step as a step to the boundary of a dual ellipsoid.

    For each ``s >= s0`` with ``D = lam_{s+1} - lam_s`` and ``g = -c(x_{s+1})``:

    * identity ``g = k^{-1} H D`` with the exact diagonal metric ``H`` of the step;
    * ``barrier_residual``: the same identity with ``H = diag(lam_s)^{-2}``
      (quadratic model of the MBF distance; first-order accurate only);
    * ``lam_{s+1}`` maximizes ``d`` over ``{D' H D <= r_s^2}``, ``r_s = ||D||_H``
      (QP: trust-region solve; LP: KKT fit with the equality multipliers).
      ``multiplier`` is the ellipsoid constraint's multiplier (ideal ``1/(2k)``).
    """
    s0 = late_phase_start(run, band)
    if s0 is None:
        raise NotInLatePhase("multiplier ratios never entered the late-phase band")
    kernel = kernel_of(run.psi)
    k = run.k
    out = []
    S = None if program.is_lp else -dual_hessian(program)
    for s in range(s0, len(run.states) - 1):
        a, b = run.states[s], run.states[s + 1]
        D = b.lam - a.lam
        g = -program.constraints(b.x)
        H = _secant_metric(kernel, a.lam, b.lam)
        gnorm = float(np.linalg.norm(g))
        ident = float(np.max(np.abs(g - H * D / k)))
        barrier = float(np.max(np.abs(g - D / (k * a.lam**2))))
        radius = math.sqrt(float(D @ (H * D)))
        if program.is_lp:
            boundary, mu = _lp_ellipsoid_kkt(program, H, D)
        else:
            g0 = dual_value(program, a.lam).grad
            Dt, nu = _trs_argmax(g0, S, H, radius)
            boundary = float(np.max(np.abs(Dt - D)))
            mu = 0.5 * nu
        out.append(EllipsoidStep(s, radius, ident, barrier, boundary, mu, gnorm))
    return IQPReport(s0, k, out)


def _lp_ellipsoid_kkt(lp: ConvexProgram, H, D) -> tuple[float, float]:
    """Fit ``b - A nu - 2 mu H D = 0``; returns (residual, mu)."""
    M = np.column_stack([lp.A, 2.0 * H * D])
    coef, *_ = np.linalg.lstsq(M, lp.b, rcond=None)
    resid = float(np.max(np.abs(M @ coef - lp.b)))
    return resid, float(coef[-1])


# ---------------------------------------------------------------- LP


@dataclass
class LPTrace:
    run: LTRun
    objective: list[float]
    feasibility: list[float]
    report: IQPReport | None

    @property
    def lam(self) -> np.ndarray:
        return self.run.states[-1].lam

    @property
    def monotone(self) -> bool:
        obj = self.objective[1:]
        return all(y >= x - 1e-12 * (1 + abs(x)) for x, y in zip(obj, obj[1:]))


def lt_lp_run(lp: ConvexProgram, lam0, k: float, steps: int, tau: float = DEFAULT_TAU, tol: float = 1e-12) -> LPTrace:
    """Truncated-MBF LT on an LP: per-step ``(b, lam_s)`` and ``||A^T lam_s - a||``.

    Row 0 (``lam0``) need not be dual feasible; rows ``s >= 1`` are, by the
    primal stationarity of each step.
    """
    if not lp.is_lp:
        raise DomainError(f"{lp.name} is not a linear program")
    run = lt_run(lp, "mbf", lam0, k, steps, tau=tau, tol=tol)
    obj = [float(lp.b @ st.lam + lp.c0) for st in run.states]
    feas = [float(np.linalg.norm(lp.A.T @ st.lam - lp.q)) for st in run.states]
    try:
        report = iqp_view(run, lp)
    except NotInLatePhase:
        report = None
    return LPTrace(run, obj, feas, report)
