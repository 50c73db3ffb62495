"""One-dimensional transformations, their Legendre conjugates and kernels.

Every transformation used by the constrained methods lives here: the convex
penalty ``t**2/2``, the concave SUMT functions ``pi`` (log, hyperbolic,
exponential, log-sigmoid), the rescaling class ``psi`` (MBF, exponential,
hyperbolic MBF, log-sigmoid, CHKS) and the quadratic extrapolation that
makes a ``psi`` finite on the whole real line.

Concave members use the inf-form conjugate ``f*(s) = inf_t {s t - f(t)}``,
convex members the sup-form.  In both cases ``(f*)' = (f')^{-1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy import optimize, special

from .errors import (
    DomainError,
    NoStationaryPoint,
    NotStrictlyConvex,
    OrderError,
    UnsupportedKind,
)

__all__ = [
    "ScalarTransform",
    "KernelFunction",
    "ConjugateView",
    "SHIPPED_KINDS",
    "PSI_KINDS",
    "get_transform",
    "evaluate",
    "conjugate",
    "conjugate_numeric",
    "leid_residual",
    "leinv",
    "conjugate_leinv",
    "truncate",
    "kernel_of",
    "get_kernel",
]

INF = math.inf
DEFAULT_TAU = -0.5
DEFAULT_ETA = 1.0


def _xlogx(s):
    # 0 * ln 0 = 0
    return special.xlogy(s, s)


class _Family(NamedTuple):
    f: tuple[Callable, Callable, Callable, Callable]
    conj: tuple[Callable, Callable, Callable, Callable]
    domain: tuple[float, float]
    conj_domain: tuple[float, float]
    conj_closed: tuple[bool, bool]
    concave: bool
    psi_class: bool
    sample: tuple[float, float]


def _log_sigmoid_parts():
    f = (
        lambda t: -np.logaddexp(0.0, -t),
        lambda t: special.expit(-t),
        lambda t: -special.expit(t) * special.expit(-t),
        lambda t: special.expit(t) * special.expit(-t) * (special.expit(t) - special.expit(-t)),
    )
    conj = (
        lambda s: -(_xlogx(1.0 - s) + _xlogx(s)),
        lambda s: np.log1p(-s) - np.log(s),
        lambda s: -1.0 / (1.0 - s) - 1.0 / s,
        lambda s: -1.0 / (1.0 - s) ** 2 + 1.0 / s**2,
    )
    return f, conj


@lru_cache(maxsize=None)
def _family(kind: str, eta: float) -> _Family:
    if kind == "quadratic":
        return _Family(
            (lambda t: 0.5 * t * t, lambda t: 1.0 * t, lambda t: np.ones_like(t), lambda t: np.zeros_like(t)),
            (lambda s: 0.5 * s * s, lambda s: 1.0 * s, lambda s: np.ones_like(s), lambda s: np.zeros_like(s)),
            (-INF, INF), (-INF, INF), (False, False), False, False, (-5.0, 5.0),
        )
    if kind == "neg_log":
        return _Family(
            (lambda t: -np.log(t), lambda t: -1.0 / t, lambda t: 1.0 / t**2, lambda t: -2.0 / t**3),
            (lambda s: -1.0 - np.log(-s), lambda s: -1.0 / s, lambda s: 1.0 / s**2, lambda s: -2.0 / s**3),
            (0.0, INF), (-INF, 0.0), (False, False), False, False, (0.05, 20.0),
        )
    if kind == "log_barrier":
        return _Family(
            (np.log, lambda t: 1.0 / t, lambda t: -1.0 / t**2, lambda t: 2.0 / t**3),
            (lambda s: 1.0 + np.log(s), lambda s: 1.0 / s, lambda s: -1.0 / s**2, lambda s: 2.0 / s**3),
            (0.0, INF), (0.0, INF), (False, False), True, False, (0.05, 20.0),
        )
    if kind == "hyperbolic_barrier":
        return _Family(
            (lambda t: -1.0 / t, lambda t: 1.0 / t**2, lambda t: -2.0 / t**3, lambda t: 6.0 / t**4),
            (
                lambda s: 2.0 * np.sqrt(s),
                lambda s: s**-0.5,
                lambda s: -0.5 * s**-1.5,
                lambda s: 0.75 * s**-2.5,
            ),
            (0.0, INF), (0.0, INF), (True, False), True, False, (0.05, 20.0),
        )
    if kind in ("exponential", "exponential_shifted"):
        shift = 1.0 if kind == "exponential_shifted" else 0.0
        return _Family(
            (
                lambda t: shift - np.exp(-t),
                lambda t: np.exp(-t),
                lambda t: -np.exp(-t),
                lambda t: np.exp(-t),
            ),
            (
                lambda s: -_xlogx(s) + s - shift,
                lambda s: -np.log(s),
                lambda s: -1.0 / s,
                lambda s: 1.0 / s**2,
            ),
            (-INF, INF), (0.0, INF), (True, False), True, kind == "exponential_shifted", (-5.0, 5.0),
        )
    if kind == "log_sigmoid":
        f, conj = _log_sigmoid_parts()
        return _Family(f, conj, (-INF, INF), (0.0, 1.0), (True, True), True, False, (-8.0, 8.0))
    if kind == "log_sigmoid_psi":
        # 2 (ln 2 + pi(t)) with pi the log-sigmoid; conjugate 2 pi*(s/2) - 2 ln 2
        (p0, p1, p2, p3), (q0, q1, q2, q3) = _log_sigmoid_parts()
        ln2 = math.log(2.0)
        return _Family(
            (
                lambda t: 2.0 * (ln2 + p0(t)),
                lambda t: 2.0 * p1(t),
                lambda t: 2.0 * p2(t),
                lambda t: 2.0 * p3(t),
            ),
            (
                lambda s: 2.0 * q0(0.5 * s) - 2.0 * ln2,
                lambda s: q1(0.5 * s),
                lambda s: 0.5 * q2(0.5 * s),
                lambda s: 0.25 * q3(0.5 * s),
            ),
            (-INF, INF), (0.0, 2.0), (True, True), True, True, (-8.0, 8.0),
        )
    if kind == "mbf_log":
        return _Family(
            (
                np.log1p,
                lambda t: 1.0 / (1.0 + t),
                lambda t: -1.0 / (1.0 + t) ** 2,
                lambda t: 2.0 / (1.0 + t) ** 3,
            ),
            (
                lambda s: 1.0 - s + np.log(s),
                lambda s: 1.0 / s - 1.0,
                lambda s: -1.0 / s**2,
                lambda s: 2.0 / s**3,
            ),
            (-1.0, INF), (0.0, INF), (False, False), True, True, (-0.95, 20.0),
        )
    if kind == "mbf_hyperbolic":
        return _Family(
            (
                lambda t: t / (1.0 + t),
                lambda t: 1.0 / (1.0 + t) ** 2,
                lambda t: -2.0 / (1.0 + t) ** 3,
                lambda t: 6.0 / (1.0 + t) ** 4,
            ),
            (
                lambda s: 2.0 * np.sqrt(s) - s - 1.0,
                lambda s: s**-0.5 - 1.0,
                lambda s: -0.5 * s**-1.5,
                lambda s: 0.75 * s**-2.5,
            ),
            (-1.0, INF), (0.0, INF), (True, False), True, True, (-0.9, 20.0),
        )
    if kind == "chks":
        if not eta > 0:
            raise DomainError(f"CHKS parameter eta must be positive, got {eta}")
        r = math.sqrt(eta)

        def g(s):
            return np.sqrt((2.0 - s) * s)

        return _Family(
            (
                lambda t: t - np.sqrt(t * t + 4.0 * eta) + 2.0 * r,
                lambda t: 1.0 - t / np.sqrt(t * t + 4.0 * eta),
                lambda t: -4.0 * eta / (t * t + 4.0 * eta) ** 1.5,
                lambda t: 12.0 * eta * t / (t * t + 4.0 * eta) ** 2.5,
            ),
            (
                lambda s: 2.0 * r * (g(s) - 1.0),
                lambda s: 2.0 * r * (1.0 - s) / g(s),
                lambda s: -2.0 * r / g(s) ** 3,
                lambda s: 6.0 * r * (1.0 - s) / g(s) ** 5,
            ),
            (-INF, INF), (0.0, 2.0), (True, True), True, True, (-6.0, 6.0),
        )
    if kind == "quadratic_psi":
        # t - t^2/2 restricted to t < 1 so that psi' > 0; kernel (s - 1)^2 / 2
        return _Family(
            (lambda t: t - 0.5 * t * t, lambda t: 1.0 - t, lambda t: -np.ones_like(t), lambda t: np.zeros_like(t)),
            (
                lambda s: -0.5 * (1.0 - s) ** 2,
                lambda s: 1.0 - s,
                lambda s: -np.ones_like(s),
                lambda s: np.zeros_like(s),
            ),
            (-INF, 1.0), (0.0, INF), (False, False), True, True, (-5.0, 0.95),
        )
    raise UnsupportedKind(f"unknown transform kind {kind!r}")


SHIPPED_KINDS = (
    "quadratic",
    "neg_log",
    "log_barrier",
    "hyperbolic_barrier",
    "exponential",
    "exponential_shifted",
    "log_sigmoid",
    "log_sigmoid_psi",
    "mbf_log",
    "mbf_hyperbolic",
    "chks",
    "quadratic_psi",
)
PSI_KINDS = tuple(k for k in SHIPPED_KINDS if _family(k, DEFAULT_ETA).psi_class)

# SUMT-style members whose psi-class twin carries the kernel
_PSI_TWIN = {"exponential": "exponential_shifted", "log_sigmoid": "log_sigmoid_psi"}

_KERNEL_NAMES = {
    "exponential_shifted": "exponential_kernel",
    "mbf_log": "mbf_kernel",
    "mbf_hyperbolic": "hyperbolic_kernel",
    "log_sigmoid_psi": "fermi_dirac",
    "chks": "chks_kernel",
    "quadratic_psi": "quadratic_kernel",
}


def _as_out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _inside(x, lo, hi, closed=(False, False)) -> bool:
    x = np.asarray(x, dtype=float)
    lo_ok = x >= lo if closed[0] else x > lo
    hi_ok = x <= hi if closed[1] else x < hi
    return bool(np.all(lo_ok & hi_ok & np.isfinite(x)))


@dataclass(frozen=True)
class ScalarTransform:
    """A catalogued scalar transformation with derivatives up to order 3.

    ``tau`` switches on the quadratic branch ``a t^2 + b t + c`` below ``tau``.
    """

    kind: str
    eta: float = DEFAULT_ETA
    tau: float | None = None
    coeffs: tuple[float, float, float] | None = field(default=None, compare=False)

    def __post_init__(self):
        _family(self.kind, self.eta)  # validates kind and eta

    @property
    def _fam(self) -> _Family:
        return _family(self.kind, self.eta)

    @property
    def name(self) -> str:
        s = self.kind
        if self.kind == "chks" and self.eta != DEFAULT_ETA:
            s += f"(eta={self.eta:g})"
        if self.tau is not None:
            s += f"|tau={self.tau:g}"
        return s

    @property
    def truncated(self) -> bool:
        return self.tau is not None

    @property
    def concave(self) -> bool:
        return self._fam.concave

    @property
    def psi_class(self) -> bool:
        return self._fam.psi_class

    @property
    def domain(self) -> tuple[float, float]:
        lo, hi = self._fam.domain
        return (-INF, hi) if self.truncated else (lo, hi)

    @property
    def conj_domain(self) -> tuple[float, float]:
        lo, hi = self._fam.conj_domain
        return (lo, INF) if self.truncated else (lo, hi)

    @property
    def conj_closed(self) -> tuple[bool, bool]:
        lo, hi = self._fam.conj_closed
        return (lo, False) if self.truncated else (lo, hi)

    @property
    def switch_slope(self) -> float | None:
        """Slope ``psi'(tau)`` at which the conjugate changes branch."""
        if not self.truncated:
            return None
        return float(self._fam.f[1](self.tau))

    @property
    def sample_range(self) -> tuple[float, float]:
        lo, hi = self._fam.sample
        if self.truncated:
            lo = min(lo, self.tau - 2.0)
        return lo, hi

    def contains(self, t) -> bool:
        return _inside(t, *self.domain)

    def eval(self, t, order: int = 0):
        if order not in (0, 1, 2, 3):
            raise OrderError(f"derivative order must be 0..3, got {order}")
        if not self.contains(t):
            raise DomainError(f"{self.name}: argument outside domain {self.domain}")
        fn = self._fam.f[order]
        if not self.truncated:
            with np.errstate(over="ignore"):
                return _as_out(fn(np.asarray(t, dtype=float)))
        t = np.asarray(t, dtype=float)
        a, b, c = self.coeffs
        quad = (a * t * t + b * t + c, 2 * a * t + b, np.full_like(t, 2 * a), np.zeros_like(t))[order]
        upper = t >= self.tau
        out = np.where(upper, 0.0, quad)
        if np.any(upper):
            out = np.where(upper, fn(np.where(upper, t, self.tau)), out)
        return _as_out(out)

    def conjugate(self, s, order: int = 0):
        """Closed-form conjugate (or its derivative) at ``s``."""
        if order not in (0, 1, 2, 3):
            raise OrderError(f"derivative order must be 0..3, got {order}")
        closed = self.conj_closed if order == 0 else (False, False)
        if not _inside(s, *self.conj_domain, closed=closed):
            raise DomainError(f"{self.name}: conjugate argument outside {self.conj_domain}")
        fn = self._fam.conj[order]
        s = np.asarray(s, dtype=float)
        if not self.truncated:
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                return _as_out(fn(s))
        a, b, c = self.coeffs
        qs = ((s - b) ** 2 / (4 * a) - c, (s - b) / (2 * a), np.full_like(s, 1 / (2 * a)), np.zeros_like(s))[order]
        lower = s <= self.switch_slope
        with np.errstate(divide="ignore", invalid="ignore"):
            base = fn(np.where(lower, s, self.switch_slope))
        return _as_out(np.where(lower, base, qs))


@dataclass(frozen=True)
class ConjugateView:
    """Treat the conjugate of a transform as a transform in its own right."""

    source: ScalarTransform

    @property
    def name(self) -> str:
        return self.source.name + "*"

    @property
    def concave(self) -> bool:
        return self.source.concave

    @property
    def domain(self) -> tuple[float, float]:
        return self.source.conj_domain

    def contains(self, s) -> bool:
        return _inside(s, *self.domain)

    def eval(self, s, order: int = 0):
        return self.source.conjugate(s, order)


@dataclass(frozen=True)
class KernelFunction:
    """Kernel ``phi = -psi*`` of a psi-class transform."""

    kind: str
    source: ScalarTransform

    @property
    def name(self) -> str:
        return self.kind if not self.source.truncated else f"{self.kind}|tau={self.source.tau:g}"

    @property
    def domain(self) -> tuple[float, float]:
        return self.source.conj_domain

    def contains(self, s) -> bool:
        return _inside(s, *self.domain)

    def eval(self, s, order: int = 0):
        return _as_out(-np.asarray(self.source.conjugate(s, order)))

    __call__ = eval


@lru_cache(maxsize=None)
def _truncation_coeffs(kind: str, eta: float, tau: float) -> tuple[float, float, float]:
    fam = _family(kind, eta)
    p0, p1, p2 = (float(fam.f[i](tau)) for i in range(3))
    a = 0.5 * p2
    b = p1 - tau * p2
    # value-continuous intercept: matches psi, psi' and psi'' at tau
    c = p0 - tau * p1 + 0.5 * tau * tau * p2
    return a, b, c


def truncate(base, tau: float = DEFAULT_TAU, eta: float | None = None) -> ScalarTransform:
    """Quadratic extrapolation of a psi-class transform below ``tau``.

    The branch ``q(t) = a t^2 + b t + c`` matches value, slope and curvature
    at ``tau``, so the result is C^2 and defined on the whole real line.
    """
    if isinstance(base, ScalarTransform):
        kind, eta = base.kind, base.eta if eta is None else eta
    else:
        kind, eta = str(base), DEFAULT_ETA if eta is None else eta
    fam = _family(kind, eta)
    if not fam.psi_class:
        raise UnsupportedKind(f"{kind} is not in the rescaling class; cannot truncate")
    if not (-1.0 < tau < 0.0) or not (fam.domain[0] < tau):
        raise DomainError(f"tau must lie in (-1, 0) inside the domain of {kind}, got {tau}")
    p2 = float(fam.f[2](tau))
    if not math.isfinite(p2):
        raise DomainError(f"psi''({tau}) is not finite for {kind}")
    return ScalarTransform(kind, eta, float(tau), _truncation_coeffs(kind, eta, float(tau)))


def get_transform(name: str, *, tau: float | None = None, eta: float | None = None) -> ScalarTransform:
    """Resolve a canonical name such as ``"mbf_log"`` or ``"chks"``.

    A ``"truncated_"`` prefix (or an explicit ``tau``) returns the truncated member.
    """
    name = name.strip()
    if name.startswith("truncated_"):
        return truncate(name[len("truncated_"):], DEFAULT_TAU if tau is None else tau, eta)
    if tau is not None:
        return truncate(name, tau, eta)
    return ScalarTransform(name, DEFAULT_ETA if eta is None else eta)


def evaluate(transform: ScalarTransform, t, order: int = 0):
    return transform.eval(t, order)


def conjugate(transform: ScalarTransform, s):
    return transform.conjugate(s, 0)


def _bracket(h, lo, hi, t0, increasing):
    """Expand from ``t0`` towards the side where ``h`` changes sign."""
    h0 = h(t0)
    if h0 == 0.0:
        return t0, t0
    go_up = (h0 < 0) == increasing
    prev = t0
    for j in range(1, 400):
        if go_up:
            t = hi - (hi - t0) * 2.0**-j if math.isfinite(hi) else t0 + 2.0 ** (j - 1)
        else:
            t = lo + (t0 - lo) * 2.0**-j if math.isfinite(lo) else t0 - 2.0 ** (j - 1)
        if t == prev:
            break
        try:
            ht = h(t)
        except (DomainError, FloatingPointError):
            break
        if not math.isfinite(ht):
            break
        if (ht > 0) != (h0 > 0) or ht == 0.0:
            return (prev, t) if go_up else (t, prev)
        prev = t
        if abs(t) > 1e300:
            break
    raise NoStationaryPoint("derivative never reaches the requested slope inside the domain")


def conjugate_numeric(transform, s: float, xtol: float = 1e-13) -> float:
    """Independent conjugate: locate ``f'(t) = s`` by bracketing + Brent, return ``s t - f(t)``."""
    s = float(s)
    lo, hi = transform.domain
    if lo > -INF and hi < INF:
        t0 = 0.5 * (lo + hi)
    elif lo < 0.0 < hi:
        t0 = 0.0
    elif lo > -INF:
        t0 = lo + 1.0
    else:
        t0 = hi - 1.0
    increasing = not transform.concave

    def h(t):
        return float(transform.eval(t, 1)) - s

    a, b = _bracket(h, lo, hi, t0, increasing)
    t = a if a == b else optimize.brentq(h, a, b, xtol=xtol * max(1.0, abs(a)), rtol=4 * np.finfo(float).eps, maxiter=500)
    return s * t - float(transform.eval(t, 0))


def leid_residual(transform, x: float) -> float:
    """``|f*'(f'(x)) - x|``; vanishes when the conjugate derivative inverts ``f'``."""
    slope = transform.eval(x, 1)
    return float(np.max(np.abs(np.asarray(transform.conjugate(slope, 1)) - np.asarray(x))))


def _leinv_from(d2, d3, concave: bool) -> float:
    curv = -d2 if concave else d2
    if not curv > 0:
        raise NotStrictlyConvex("second derivative does not have the strict-convexity sign")
    return abs(d3) * curv**-1.5


def leinv(transform, x: float) -> float:
    """Legendre invariant ``|f'''| (f'')^{-3/2}`` (applied to ``-f`` for concave members)."""
    return _leinv_from(float(transform.eval(x, 2)), float(transform.eval(x, 3)), transform.concave)


def conjugate_leinv(transform: ScalarTransform, s: float) -> float:
    return _leinv_from(float(transform.conjugate(s, 2)), float(transform.conjugate(s, 3)), transform.concave)


def kernel_of(transform: ScalarTransform | str) -> KernelFunction:
    if isinstance(transform, str):
        transform = get_transform(transform)
    if not transform.truncated and transform.kind in _PSI_TWIN:
        transform = ScalarTransform(_PSI_TWIN[transform.kind], transform.eta)
    if not transform.psi_class:
        raise UnsupportedKind(f"{transform.kind} has no kernel (not in the rescaling class)")
    return KernelFunction(_KERNEL_NAMES[transform.kind], transform)


def get_kernel(name: str, *, tau: float | None = None, eta: float | None = None) -> KernelFunction:
    """Kernel by its own name (``"mbf_kernel"``) or by the generating transform name."""
    reverse = {v: k for k, v in _KERNEL_NAMES.items()}
    return kernel_of(get_transform(reverse.get(name, name), tau=tau, eta=eta))
