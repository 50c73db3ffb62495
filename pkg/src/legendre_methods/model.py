"""Small dense convex programs: quadratic/linear objective with affine constraints.

Inequality rows read ``c_i(x) = a_i^T x - b_i >= 0`` and the Lagrangian is
``L(x, lam) = f(x) - sum lam_i c_i(x)`` with ``lam >= 0`` on inequality rows.
For this convention the dual gradient is ``grad d(lam) = -c(x(lam))``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, DomainError, UnboundedBelow, UnknownProblem

__all__ = [
    "ConvexProgram",
    "PrimalDualState",
    "KKTReport",
    "Evaluation",
    "DualValue",
    "evaluate",
    "dual_value",
    "dual_hessian",
    "kkt_residual",
    "lagrangian",
    "make_problem",
    "load_problem",
    "dump_problem",
    "PROBLEM_NAMES",
    "solve_qp_active_set",
    "lp_vertex_solution",
]

INEQ, EQ = "ineq", "eq"
LP_DUAL_TOL = 1e-9


def _frozen(a, ndim=None):
    if a is None:
        return None
    arr = np.array(a, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionError(f"expected {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ConvexProgram:
    """``min 0.5 x'Qx + q'x + c0`` subject to affine rows ``A x - b`` (>= 0 or = 0)."""

    Q: np.ndarray
    q: np.ndarray
    A: np.ndarray
    b: np.ndarray
    kinds: tuple[str, ...]
    c0: float = 0.0
    xstar: np.ndarray | None = None
    lstar: np.ndarray | None = None
    slater: np.ndarray | None = None
    name: str = "custom"

    def __post_init__(self):
        Q = _frozen(self.Q, 2)
        q = _frozen(self.q, 1)
        n = q.size
        A = _frozen(np.reshape(self.A, (-1, n)) if np.size(self.A) else np.zeros((0, n)), 2)
        b = _frozen(self.b, 1)
        if Q.shape != (n, n) or A.shape[1] != n or b.size != A.shape[0] or len(self.kinds) != b.size:
            raise DimensionError("inconsistent program dimensions")
        if not np.allclose(Q, Q.T, atol=1e-14):
            raise DimensionError("Q must be symmetric")
        if any(k not in (INEQ, EQ) for k in self.kinds):
            raise DimensionError(f"constraint kinds must be {INEQ!r} or {EQ!r}")
        for name, val in (("Q", Q), ("q", q), ("A", A), ("b", b)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "kinds", tuple(self.kinds))
        for name in ("xstar", "lstar", "slater"):
            object.__setattr__(self, name, _frozen(getattr(self, name), 1))
        if self.slater is not None and np.any(self.constraints(self.slater)[self.ineq] <= 0):
            raise DomainError(f"{self.name}: stored Slater point is not strictly feasible")

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def m(self) -> int:
        return self.b.size

    @property
    def ineq(self) -> np.ndarray:
        return np.array([k == INEQ for k in self.kinds], dtype=bool)

    @property
    def eq(self) -> np.ndarray:
        return ~self.ineq

    @property
    def all_equality(self) -> bool:
        return self.m > 0 and not self.ineq.any()

    @property
    def all_inequality(self) -> bool:
        return bool(self.ineq.all())

    @property
    def is_lp(self) -> bool:
        return not np.any(self.Q)

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.n:
            raise DimensionError(f"x has length {x.size}, expected {self.n}")
        return x

    def _check_lam(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float).reshape(-1)
        if lam.size != self.m:
            raise DimensionError(f"lambda has length {lam.size}, expected {self.m}")
        return lam

    def objective(self, x) -> float:
        x = self._check_x(x)
        return float(0.5 * x @ self.Q @ x + self.q @ x + self.c0)

    def gradient(self, x) -> np.ndarray:
        return self.Q @ self._check_x(x) + self.q

    def constraints(self, x) -> np.ndarray:
        return self.A @ self._check_x(x) - self.b


class Evaluation(NamedTuple):
    f: float
    grad: np.ndarray
    hess: np.ndarray
    c: np.ndarray
    jac: np.ndarray


class DualValue(NamedTuple):
    d: float
    x: np.ndarray | None
    grad: np.ndarray


@dataclass(frozen=True)
class KKTReport:
    stationarity: float
    primal_infeasibility: float
    complementarity: float
    dual_infeasibility: float

    @property
    def max(self) -> float:
        return max(self.stationarity, self.primal_infeasibility, self.complementarity, self.dual_infeasibility)

    def as_dict(self) -> dict:
        return {
            "stationarity": self.stationarity,
            "primal_infeasibility": self.primal_infeasibility,
            "complementarity": self.complementarity,
            "dual_infeasibility": self.dual_infeasibility,
        }


@dataclass
class PrimalDualState:
    """Current ``(x, lam, k)`` with cached values."""

    program: ConvexProgram
    x: np.ndarray
    lam: np.ndarray
    k: float
    f: float = field(init=False)
    c: np.ndarray = field(init=False)

    def __post_init__(self):
        if not self.k > 0:
            raise DomainError("scaling parameter k must be positive")
        self.x = self.program._check_x(self.x).copy()
        self.lam = self.program._check_lam(self.lam).copy()
        if np.any(self.lam[self.program.ineq] < 0):
            raise DomainError("multipliers must be nonnegative on inequality rows")
        self.f = self.program.objective(self.x)
        self.c = self.program.constraints(self.x)

    @property
    def gap(self) -> float:
        """``(c(x), lam)``, the duality gap at Lagrangian-stationary pairs."""
        return float(self.c @ self.lam)


def evaluate(program: ConvexProgram, x) -> Evaluation:
    x = program._check_x(x)
    return Evaluation(program.objective(x), program.gradient(x), program.Q.copy(), program.constraints(x), program.A.copy())


def lagrangian(program: ConvexProgram, x, lam) -> float:
    return program.objective(x) - float(program._check_lam(lam) @ program.constraints(x))


def dual_value(program: ConvexProgram, lam) -> DualValue:
    """``d(lam) = min_x L(x, lam)`` with its minimizer and gradient ``-c(x(lam))``."""
    lam = program._check_lam(lam)
    if program.is_lp:
        resid = program.A.T @ lam - program.q
        if np.max(np.abs(resid), initial=0.0) > LP_DUAL_TOL * (1 + np.max(np.abs(program.q))):
            raise UnboundedBelow("LP Lagrangian is unbounded unless A^T lam = a")
        return DualValue(float(program.b @ lam + program.c0), None, np.full(program.m, np.nan))
    try:
        L = np.linalg.cholesky(program.Q)
    except np.linalg.LinAlgError as exc:
        raise UnboundedBelow("Q is not positive definite; analytic dual unavailable") from exc
    rhs = program.A.T @ lam - program.q
    x = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
    return DualValue(lagrangian(program, x, lam), x, -program.constraints(x))


def dual_hessian(program: ConvexProgram) -> np.ndarray:
    """Constant Hessian ``-A Q^{-1} A^T`` of the QP dual."""
    return -program.A @ np.linalg.solve(program.Q, program.A.T)


def kkt_residual(program: ConvexProgram, x, lam) -> KKTReport:
    x = program._check_x(x)
    lam = program._check_lam(lam)
    c = program.constraints(x)
    ineq = program.ineq
    stat = program.gradient(x) - program.A.T @ lam
    infeas = np.concatenate([np.maximum(-c[ineq], 0.0), np.abs(c[~ineq])])
    return KKTReport(
        stationarity=float(np.max(np.abs(stat), initial=0.0)),
        primal_infeasibility=float(np.max(infeas, initial=0.0)),
        complementarity=float(np.max(np.abs(lam[ineq] * c[ineq]), initial=0.0)),
        dual_infeasibility=float(np.max(np.maximum(-lam[ineq], 0.0), initial=0.0)),
    )


# ---------------------------------------------------------------- solvers


def solve_qp_active_set(Q, q, A, b, kinds, tol=1e-10):
    """Brute-force KKT over all active sets; fine for m <= 12."""
    Q, q, A, b = (np.asarray(v, dtype=float) for v in (Q, q, A, b))
    n, m = q.size, b.size
    eq_rows = [i for i in range(m) if kinds[i] == EQ]
    ineq_rows = [i for i in range(m) if kinds[i] == INEQ]
    for r in range(len(ineq_rows) + 1):
        for subset in itertools.combinations(ineq_rows, r):
            act = eq_rows + list(subset)
            if len(act) > n:
                continue
            Aa = A[act]
            K = np.block([[Q, -Aa.T], [Aa, np.zeros((len(act), len(act)))]])
            rhs = np.concatenate([-q, b[act]])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            x, la = sol[:n], sol[n:]
            lam = np.zeros(m)
            lam[act] = la
            c = A @ x - b
            if np.all(c[ineq_rows] >= -tol) and np.all(lam[ineq_rows] >= -tol):
                lam[ineq_rows] = np.maximum(lam[ineq_rows], 0.0)
                return x, lam
    raise UnboundedBelow("no KKT point found by active-set enumeration")


def lp_vertex_solution(a, A, b, tol=1e-10):
    """Optimal vertex of ``min a'x, A x >= b`` (n = 2) and its multipliers by enumeration."""
    a, A, b = (np.asarray(v, dtype=float) for v in (a, A, b))
    n, m = a.size, b.size
    best = None
    for rows in itertools.combinations(range(m), n):
        B = A[list(rows)]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        x = np.linalg.solve(B, b[list(rows)])
        if np.all(A @ x - b >= -tol):
            val = a @ x
            if best is None or val < best[0] - 1e-12:
                y = np.linalg.solve(B.T, a)
                lam = np.zeros(m)
                lam[list(rows)] = y
                best = (val, x, lam)
    if best is None:
        raise UnboundedBelow("LP has no feasible vertex")
    return best[1], best[2]


# ---------------------------------------------------------------- catalogue


def _qp1():
    return ConvexProgram(np.eye(1), np.zeros(1), [[1.0]], [1.0], (INEQ,), xstar=[1.0], lstar=[1.0], slater=[2.0], name="qp1")


def _qp1_scaled():
    # 0.5 x^2 with (x - 1)/3 >= 0: same x* = 1 but lam* = 3 > 1
    return ConvexProgram(
        np.eye(1), np.zeros(1), [[1.0 / 3.0]], [1.0 / 3.0], (INEQ,),
        xstar=[1.0], lstar=[3.0], slater=[2.0], name="qp1_scaled",
    )


def _eq_qp1():
    return ConvexProgram(np.eye(1), np.zeros(1), [[1.0]], [1.0], (EQ,), xstar=[1.0], lstar=[1.0], name="eq_qp1")


def _scalar_barrier_demo():
    # 0.5 (x - 2)^2 on the box 0 <= x <= 1; upper bound active with lam* = 1
    return ConvexProgram(
        np.eye(1), np.array([-2.0]), [[1.0], [-1.0]], [0.0, -1.0], (INEQ, INEQ), c0=2.0,
        xstar=[1.0], lstar=[0.0, 1.0], slater=[0.5], name="scalar_barrier_demo",
    )


LP_BOX = 1000.0


def _lp2x4():
    # min x1 + x2 s.t. x1 + 2 x2 >= 2, 2 x1 + x2 >= 2, x1 <= 1000, x2 <= 1000.
    # Inactive multipliers of Bregman-prox methods decay like 1/(s k dist), so
    # the box faces sit far from the solution.
    a = np.array([1.0, 1.0])
    A = np.array([[1.0, 2.0], [2.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    b = np.array([2.0, 2.0, -LP_BOX, -LP_BOX])
    xs, ls = lp_vertex_solution(a, A, b)
    return ConvexProgram(np.zeros((2, 2)), a, A, b, (INEQ,) * 4, xstar=xs, lstar=ls, slater=[1.0, 1.0], name="lp2x4")


def _random_qp(n=5, m=8, seed=42):
    rng = np.random.default_rng(seed)
    R = rng.uniform(-1.0, 1.0, (n, n))
    Q = R.T @ R + np.eye(n)
    A = rng.uniform(-1.0, 1.0, (m, n))
    b = -rng.uniform(0.1, 1.0, m)  # c(0) = -b > 0: origin is a Slater point
    q = -Q @ rng.uniform(-3.0, 3.0, n)
    kinds = (INEQ,) * m
    xs, ls = solve_qp_active_set(Q, q, A, b, kinds)
    return ConvexProgram(Q, q, A, b, kinds, xstar=xs, lstar=ls, slater=np.zeros(n), name=f"random_qp({n},{m},{seed})")


def _random_eq_qp(n=5, m=2, seed=0):
    rng = np.random.default_rng(seed)
    R = rng.uniform(-1.0, 1.0, (n, n))
    Q = R.T @ R + np.eye(n)
    A = rng.uniform(-1.0, 1.0, (m, n))
    b = rng.uniform(-1.0, 1.0, m)
    q = rng.uniform(-1.0, 1.0, n)
    kinds = (EQ,) * m
    xs, ls = solve_qp_active_set(Q, q, A, b, kinds)
    return ConvexProgram(Q, q, A, b, kinds, xstar=xs, lstar=ls, name=f"random_eq_qp({n},{m},{seed})")


_BUILDERS = {
    "qp1": _qp1,
    "qp1_scaled": _qp1_scaled,
    "eq_qp1": _eq_qp1,
    "scalar_barrier_demo": _scalar_barrier_demo,
    "lp2x4": _lp2x4,
    "random_qp": _random_qp,
    "random_eq_qp": _random_eq_qp,
}
PROBLEM_NAMES = tuple(_BUILDERS)


def make_problem(name: str, *args, **kwargs) -> ConvexProgram:
    """Built-in problem by name; ``"random_qp(5,8,42)"`` style strings are accepted."""
    name = name.strip()
    if "(" in name and name.endswith(")"):
        base, inner = name[:-1].split("(", 1)
        try:
            args = tuple(int(v) for v in inner.split(",") if v.strip()) + args
        except ValueError as exc:
            raise UnknownProblem(name) from exc
        name = base.strip()
    if name not in _BUILDERS:
        raise UnknownProblem(name)
    return _BUILDERS[name](*args, **kwargs)


def _opt(v):
    return None if v is None else np.asarray(v, dtype=float).tolist()


def dump_problem(program: ConvexProgram, path) -> None:
    data = {
        "name": program.name,
        "n": program.n,
        "Q": program.Q.reshape(-1).tolist(),
        "q": program.q.tolist(),
        "c0": program.c0,
        "constraints": [
            {"a": program.A[i].tolist(), "b": float(program.b[i]), "kind": program.kinds[i]} for i in range(program.m)
        ],
        "xstar": _opt(program.xstar),
        "lstar": _opt(program.lstar),
        "slater": _opt(program.slater),
    }
    Path(path).write_text(json.dumps(data, indent=2))


def load_problem(path) -> ConvexProgram:
    """Read the JSON problem format (``n``, row-major ``Q``, ``q``, ``c0``, ``constraints``...)."""
    data = json.loads(Path(path).read_text())
    try:
        n = int(data["n"])
        Q = np.asarray(data["Q"], dtype=float).reshape(n, n)
        rows = data.get("constraints", [])
        A = np.array([r["a"] for r in rows], dtype=float).reshape(len(rows), n)
        b = np.array([r["b"] for r in rows], dtype=float)
        kinds = tuple(r.get("kind", INEQ) for r in rows)
        return ConvexProgram(
            Q, data["q"], A, b, kinds, c0=float(data.get("c0", 0.0)),
            xstar=data.get("xstar"), lstar=data.get("lstar"), slater=data.get("slater"),
            name=data.get("name", Path(path).stem),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise DimensionError(f"malformed problem file {path}: {exc}") from exc
