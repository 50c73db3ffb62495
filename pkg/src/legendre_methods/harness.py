"""Run configuration, method registry, trace emission and equivalence checks.

Every method produces an :class:`IterationTrace` whose rows follow one
schema (see :data:`BASE_COLUMNS`), followed by ``lambda_i`` and ``x_j``
columns.  Multipliers are always reported in the package convention
``L = f - lam'c``; penalty-side methods are converted on the way out.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import equality_methods as eqm
from . import lt, nr, sumt
from .errors import ConfigError, LengthMismatch, UnboundedBelow, UnknownProblem
from .model import ConvexProgram, dual_value, kkt_residual, load_problem, make_problem
from .sc_newton import BETA_MAX
from .transforms import DEFAULT_TAU, get_transform, kernel_of

__all__ = [
    "OUTPUT_DIR_ENV",
    "BASE_COLUMNS",
    "RunConfig",
    "IterationTrace",
    "StepComparison",
    "EquivalenceReport",
    "METHODS",
    "method_names",
    "resolve_problem",
    "run",
    "compare",
    "emit",
    "read_trace",
    "gap_data",
    "output_path",
]

OUTPUT_DIR_ENV = "LEGENDRE_OUTPUT_DIR"

BASE_COLUMNS = (
    "step",
    "k",
    "f",
    "d",
    "gap",
    "stationarity",
    "primal_infeasibility",
    "complementarity",
    "dual_infeasibility",
    "inner_steps",
    "inner_decrement",
)


@dataclass
class RunConfig:
    """Everything needed to reproduce one run."""

    method: str
    problem: str = "qp1"
    k0: float = 1.0
    kfactor: float = 10.0
    kmax: float = 1e3
    k: float | None = None
    steps: int = 5
    lambda0: float | list[float] | None = None
    inner_tol: float = 1e-12
    equiv_tol: float = 1e-6
    tau: float = DEFAULT_TAU
    alpha: float = sumt.DEFAULT_ALPHA
    eta: float = 1.0
    beta: float = 0.25
    output: str | None = None
    fmt: str = "csv"
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; see list-methods")
        for name in ("inner_tol", "equiv_tol", "k0", "eta"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.k is not None and not self.k > 0:
            raise ConfigError("k must be positive")
        if not self.kfactor > 1 or not self.kmax >= self.k0:
            raise ConfigError("k schedule needs kfactor > 1 and kmax >= k0")
        if not (isinstance(self.steps, int) and self.steps >= 1):
            raise ConfigError("steps must be a positive integer")
        if not -1 < self.tau < 0:
            raise ConfigError("tau must lie in (-1, 0)")
        if not 0 <= self.alpha < 0.5:
            raise ConfigError("alpha must lie in [0, 0.5)")
        if not 0 < self.beta < BETA_MAX:
            raise ConfigError(f"beta must lie in (0, {BETA_MAX:.4f})")
        if self.fmt not in ("csv", "json"):
            raise ConfigError("fmt must be csv or json")
        resolve_problem(self.problem)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)

    def schedule(self) -> list[float]:
        return [self.k] if self.k is not None else sumt.k_grid(self.k0, self.kfactor, self.kmax)

    @property
    def fixed_k(self) -> float:
        return self.k if self.k is not None else self.k0

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def resolve_problem(name: str, seed: int | None = None) -> ConvexProgram:
    """Built-in problem name (``"random_qp(5,8,42)"``) or a JSON problem file.

    A bare ``random_*`` name takes its seed from ``seed``.
    """
    try:
        if seed is not None and name.strip().startswith("random") and "(" not in name:
            return make_problem(name, seed=seed)
        return make_problem(name)
    except UnknownProblem:
        if os.path.isfile(name):
            return load_problem(name)
        raise ConfigError(f"unknown problem {name!r} (not a built-in name or a file)") from None


# ---------------------------------------------------------------- traces


@dataclass
class IterationTrace:
    method: str
    problem: str
    columns: list[str]
    rows: list[list[float]] = field(default_factory=list)
    lams: list[np.ndarray] = field(default_factory=list)
    events: list[str] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])

    def header(self) -> dict:
        return {"method": self.method, "problem": self.problem, "columns": list(self.columns)}


def _columns(program: ConvexProgram) -> list[str]:
    return [*BASE_COLUMNS, *(f"lambda_{i + 1}" for i in range(program.m)), *(f"x_{j + 1}" for j in range(program.n))]


class _Builder:
    def __init__(self, method: str, program: ConvexProgram):
        self.program = program
        self.trace = IterationTrace(method, program.name, _columns(program))

    def add(self, step, k, lam, x=None, inner=None):
        P = self.program
        lam = np.asarray(lam, dtype=float)
        try:
            dv = dual_value(P, lam)
            d = dv.d
            if x is None and dv.x is not None:
                x = dv.x
        except UnboundedBelow:
            d = math.nan
        if x is None:
            f = gap = math.nan
            kkt = (math.nan,) * 4
            xs = [math.nan] * P.n
        else:
            x = np.asarray(x, dtype=float)
            f = P.objective(x)
            gap = float(P.constraints(x) @ lam)
            rep = kkt_residual(P, x, lam)
            kkt = (rep.stationarity, rep.primal_infeasibility, rep.complementarity, rep.dual_infeasibility)
            xs = list(x)
        steps_, dec = (inner.steps, inner.decrement) if inner is not None else (math.nan, math.nan)
        self.trace.rows.append([float(step), float(k), f, d, gap, *kkt, float(steps_), float(dec), *lam, *xs])
        self.trace.lams.append(lam.copy())


def _lambda0(cfg: RunConfig, program: ConvexProgram, default: float) -> np.ndarray:
    lam = default if cfg.lambda0 is None else cfg.lambda0
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 0:
        return np.full(program.m, float(lam))
    if lam.shape != (program.m,):
        raise ConfigError(f"lambda0 needs {program.m} entries, got {lam.size}")
    return lam


# ---------------------------------------------------------------- methods


def _courant(cfg, P):
    b, x = _Builder(cfg.method, P), None
    for s, k in enumerate(cfg.schedule()):
        it = eqm.courant_step(P, k, x0=x, tol=cfg.inner_tol)
        b.add(s, k, -it.lam, it.x, it.inner)
        x = it.x
    return b.trace


def _tikhonov(cfg, P):
    b = _Builder(cfg.method, P)
    for s, k in enumerate(cfg.schedule()):
        b.add(s, k, -eqm.tikhonov_dual(P, k))
    return b.trace


def _al(cfg, P):
    b, k = _Builder(cfg.method, P), cfg.fixed_k
    lam = _lambda0(cfg, P, 0.0)
    b.add(0, k, lam)
    for s, it in enumerate(eqm.al_run(P, lam, k, cfg.steps, tol=cfg.inner_tol), start=1):
        b.add(s, k, it.lam, it.x, it.inner)
    return b.trace


def _qprox(cfg, P):
    b, k = _Builder(cfg.method, P), cfg.fixed_k
    lam = _lambda0(cfg, P, 0.0)
    b.add(0, k, lam)
    for s in range(1, cfg.steps + 1):
        lam = eqm.quad_prox_dual(P, lam, k)
        b.add(s, k, lam)
    return b.trace


def _sumt(kind):
    def go(cfg, P):
        b = _Builder(cfg.method, P)
        run_ = sumt.sumt_path(kind, P, cfg.schedule(), alpha=cfg.alpha, tol=cfg.inner_tol)
        for s, p in enumerate(run_.points):
            b.add(s, p.k, p.lam, p.x, p.inner)
        return b.trace

    return go


def _dual_reg(kind):
    def go(cfg, P):
        b = _Builder(cfg.method, P)
        for s, k in enumerate(cfg.schedule()):
            b.add(s, k, sumt.dual_regularized(kind, P, k, alpha=cfg.alpha, tol=cfg.inner_tol))
        return b.trace

    return go


def _nr(psi):
    def go(cfg, P):
        b = _Builder(cfg.method, P)
        run_ = nr.nr_run(P, psi, _lambda0(cfg, P, 1.0), cfg.fixed_k, cfg.steps, tol=cfg.inner_tol)
        for st in run_.states:
            b.add(st.s, st.k, st.lam, st.x, st.inner)
        b.trace.events.extend(run_.events)
        return b.trace

    return go


def _phi_prox(psi):
    def go(cfg, P):
        b, k = _Builder(cfg.method, P), cfg.fixed_k
        kernel = kernel_of(nr.resolve_psi(psi))
        lam = _lambda0(cfg, P, 1.0)
        b.add(0, k, lam)
        for s in range(1, cfg.steps + 1):
            lam = nr.phi_prox(P, kernel, lam, k, tol=cfg.inner_tol)
            b.add(s, k, lam)
        return b.trace

    return go


def _mult(cfg, P):
    b = _Builder(cfg.method, P)
    run_ = nr.explicit_multiplicative(P, _lambda0(cfg, P, 1.0), cfg.fixed_k, cfg.steps)
    for s, (lam, k) in enumerate(zip(run_.lams, run_.ks)):
        b.add(s, k, lam)
    b.trace.events.extend(run_.events)
    return b.trace


def _lt_psi(cfg, psi):
    name = lt.LT_TRANSFORMS[psi]
    if name == "chks":
        return get_transform(name, tau=cfg.tau, eta=cfg.eta)
    return get_transform(name, tau=cfg.tau)


def _lt(psi):
    def go(cfg, P):
        b = _Builder(cfg.method, P)
        run_ = lt.lt_run(P, _lt_psi(cfg, psi), _lambda0(cfg, P, 1.0), cfg.fixed_k, cfg.steps, tol=cfg.inner_tol)
        for st in run_.states:
            b.add(st.s, st.k, st.lam, st.x, st.inner)
        b.trace.events.extend(run_.events)
        return b.trace

    return go


def _lt_lp(cfg, P):
    if not P.is_lp:
        raise ConfigError(f"lt:lp needs a linear program, {P.name} is not one")
    tr = lt.lt_lp_run(P, _lambda0(cfg, P, 1.0), cfg.fixed_k, cfg.steps, tau=cfg.tau, tol=cfg.inner_tol)
    b = _Builder(cfg.method, P)
    for st in tr.run.states:
        b.add(st.s, st.k, st.lam, st.x, st.inner)
    return b.trace


def _bregman(psi):
    def go(cfg, P):
        b, k = _Builder(cfg.method, P), cfg.fixed_k
        kernel = kernel_of(_lt_psi(cfg, psi))
        lam = _lambda0(cfg, P, 1.0)
        b.add(0, k, lam)
        for s in range(1, cfg.steps + 1):
            lam = lt.bregman_prox(P, kernel, lam, k, tol=cfg.inner_tol)
            b.add(s, k, lam)
        return b.trace

    return go


METHODS: dict[str, tuple[Callable, str]] = {
    "courant": (_courant, "quadratic penalty f + (k/2)|c|^2 along the k schedule"),
    "tikhonov": (_tikhonov, "dual Tikhonov regularization along the k schedule"),
    "al": (_al, "augmented Lagrangian, fixed k"),
    "qprox": (_qprox, "dual quadratic prox, fixed k"),
    "sumt:log": (_sumt("log"), "log-barrier SUMT"),
    "sumt:hyp": (_sumt("hyperbolic"), "hyperbolic-barrier SUMT"),
    "sumt:exp": (_sumt("exponential"), "exponential-penalty SUMT"),
    "sumt:ls": (_sumt("log_sigmoid"), "modified log-sigmoid SUMT (--alpha)"),
    "dual:logreg": (_dual_reg("log"), "dual log regularization (twin of sumt:log)"),
    "dual:parabolic": (_dual_reg("hyperbolic"), "dual parabolic regularization (twin of sumt:hyp)"),
    "dual:entropy": (_dual_reg("exponential"), "dual entropy regularization (twin of sumt:exp)"),
    "dual:fd": (_dual_reg("log_sigmoid"), "dual Fermi-Dirac regularization (twin of sumt:ls)"),
    "nr:mbf": (_nr("mbf"), "nonlinear rescaling, modified barrier ln(t+1)"),
    "nr:exp": (_nr("exp"), "nonlinear rescaling, exponential 1 - exp(-t)"),
    "nr:hyp": (_nr("hyp"), "nonlinear rescaling, hyperbolic t/(t+1)"),
    "dual:klprox": (_phi_prox("mbf"), "Kullback-Leibler prox (twin of nr:mbf)"),
    "dual:phiprox-exp": (_phi_prox("exp"), "phi-divergence prox (twin of nr:exp)"),
    "dual:phiprox-hyp": (_phi_prox("hyp"), "phi-divergence prox (twin of nr:hyp)"),
    "dual:mult": (_mult, "explicit multiplicative dual ascent"),
    "lt:mbf": (_lt("mbf"), "Lagrangian transformation, truncated MBF"),
    "lt:exp": (_lt("exp"), "Lagrangian transformation, truncated exponential"),
    "lt:chks": (_lt("chks"), "Lagrangian transformation, truncated CHKS"),
    "lt:lp": (_lt_lp, "LT with truncated MBF on a linear program"),
    "dual:bregman-mbf": (_bregman("mbf"), "Bregman-type prox (twin of lt:mbf)"),
    "dual:bregman-exp": (_bregman("exp"), "Bregman-type prox (twin of lt:exp)"),
    "dual:bregman-chks": (_bregman("chks"), "Bregman-type prox (twin of lt:chks)"),
}


def method_names() -> list[str]:
    return list(METHODS)


def run(config: RunConfig) -> IterationTrace:
    """Execute ``config.method`` on ``config.problem``."""
    config.validate()
    program = resolve_problem(config.problem, config.seed)
    return METHODS[config.method][0](config, program)


# ---------------------------------------------------------------- comparison


@dataclass(frozen=True)
class StepComparison:
    step: int
    max_diff: float


@dataclass
class EquivalenceReport:
    method_a: str
    method_b: str
    problem: str
    tol: float
    steps: list[StepComparison]

    @property
    def max_diff(self) -> float:
        return max((s.max_diff for s in self.steps), default=0.0)

    @property
    def worst_step(self) -> int | None:
        if not self.steps:
            return None
        return max(self.steps, key=lambda s: s.max_diff).step

    @property
    def passed(self) -> bool:
        return all(s.max_diff <= self.tol for s in self.steps)

    def summary(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return (
            f"{self.method_a} vs {self.method_b} on {self.problem}: max |dlam| = {self.max_diff:.3e} "
            f"(tol {self.tol:g}, worst step {self.worst_step}) {verdict}"
        )


def compare(config_a: RunConfig, config_b: RunConfig, tol: float | None = None) -> EquivalenceReport:
    """Elementwise multiplier comparison of two runs, step by step."""
    tol = config_a.equiv_tol if tol is None else tol
    ta, tb = run(config_a), run(config_b)
    if len(ta.lams) != len(tb.lams):
        raise LengthMismatch(f"{config_a.method} produced {len(ta.lams)} steps, {config_b.method} {len(tb.lams)}")
    steps = [StepComparison(s, float(np.max(np.abs(a - b), initial=0.0))) for s, (a, b) in enumerate(zip(ta.lams, tb.lams))]
    return EquivalenceReport(config_a.method, config_b.method, ta.problem, tol, steps)


# ---------------------------------------------------------------- I/O


def output_path(path) -> Path:
    """Relative paths land in ``$LEGENDRE_OUTPUT_DIR`` when it is set."""
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _fmt(v: float) -> str:
    return "%.17g" % v


def emit(trace: IterationTrace, fmt: str = "csv", path=None) -> str:
    """Render ``trace`` as CSV or JSON; write it to ``path`` when given.

    CSV values use 17 significant digits (exact float round trip); JSON
    writes ``null`` for NaN.
    """
    if fmt == "csv":
        lines = [",".join(trace.columns)] + [",".join(_fmt(v) for v in row) for row in trace.rows]
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        rows = [[None if math.isnan(v) else v for v in row] for row in trace.rows]
        text = json.dumps({"header": trace.header(), "rows": rows}, indent=1) + "\n"
    else:
        raise ConfigError(f"unknown format {fmt!r}")
    if path is not None:
        p = output_path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    return text


def read_trace(path) -> tuple[list[str], list[list[float]]]:
    """Columns and rows of a CSV or JSON trace written by :func:`emit`."""
    p = Path(path)
    text = p.read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        rows = [[math.nan if v is None else float(v) for v in row] for row in data["rows"]]
        return list(data["header"]["columns"]), rows
    reader = csv.reader(text.splitlines())
    columns = next(reader)
    return columns, [[float(v) for v in row] for row in reader]


def gap_data(config: RunConfig) -> IterationTrace:
    """``(k, gap, bound)`` rows of a SUMT run, for bound plots."""
    if not config.method.startswith("sumt:"):
        raise ConfigError("gap data needs a sumt:* method")
    program = resolve_problem(config.problem, config.seed)
    kind = config.method.split(":", 1)[1]
    run_ = sumt.sumt_path(kind, program, config.schedule(), alpha=config.alpha, tol=config.inner_tol)
    out = IterationTrace(config.method, program.name, ["k", "gap", "bound"])
    for g in sumt.gap_report(run_, program):
        out.rows.append([g.k, g.gap, math.nan if g.bound is None else g.bound])
    return out
