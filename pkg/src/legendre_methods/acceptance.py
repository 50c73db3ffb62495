"""Acceptance criteria as executable checks.

Each check returns a :class:`CriterionResult`; the CLI ``verify`` verb and
``tests/test_acceptance.py`` both run them from here.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import qmc

from . import lt, nr, sc_newton, sumt
from .errors import ConfigError
from .harness import RunConfig, compare
from .model import make_problem
from .transforms import SHIPPED_KINDS, conjugate_leinv, get_transform, leid_residual, leinv

__all__ = ["CriterionResult", "CRITERIA", "SUITES", "resolve_suite", "run_criterion", "verify"]

K_GRID = [1.0, 10.0, 100.0, 1000.0]


@dataclass(frozen=True)
class CriterionResult:
    number: int
    slug: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.slug}: {self.detail}"


def _unit_points(count: int, seed: int = 0) -> np.ndarray:
    return qmc.Halton(1, seed=seed).random(count)[:, 0]


def leid_suite(points: int = 100):
    u = _unit_points(points)
    worst_leid = worst_recip = worst_sym = 0.0
    for kind in SHIPPED_KINDS:
        T = get_transform(kind)
        lo, hi = T.sample_range
        for x in lo + (hi - lo) * u:
            s = float(T.eval(x, 1))
            worst_leid = max(worst_leid, leid_residual(T, x))
            worst_recip = max(worst_recip, abs(float(T.eval(x, 2)) * float(T.conjugate(s, 2)) - 1.0))
            worst_sym = max(worst_sym, abs(leinv(T, x) - conjugate_leinv(T, s)))
    ok = worst_leid <= 1e-8 and worst_recip <= 1e-8 and worst_sym <= 1e-6
    return ok, f"max LEID {worst_leid:.2e} (<=1e-8), reciprocity {worst_recip:.2e} (<=1e-8), LEINV symmetry {worst_sym:.2e} (<=1e-6) over {len(SHIPPED_KINDS)} kinds"


def leinv_constant(points: int = 100):
    T = get_transform("neg_log")
    xs = 10.0 ** (-3.0 + 6.0 * _unit_points(points))
    err = max(abs(leinv(T, x) - 2.0) for x in xs)
    return err <= 1e-9, f"max |leinv(-ln x) - 2| = {err:.2e} (<=1e-9)"


def log_gap():
    worst = 0.0
    for name in ("qp1", "random_qp(5,8,42)"):
        P = make_problem(name)
        for g in sumt.gap_report(sumt.sumt_path("log", P, K_GRID), P):
            worst = max(worst, abs(g.gap - g.bound) / g.bound)
    return worst <= 1e-6, f"max relative |gap - m/k| = {worst:.2e} (<=1e-6)"


def hyperbolic_gap():
    worst = -math.inf
    for name in ("qp1", "random_qp(5,8,42)"):
        P = make_problem(name)
        for g in sumt.gap_report(sumt.sumt_path("hyperbolic", P, K_GRID), P):
            worst = max(worst, g.gap - g.bound)
    return worst <= 1e-9, f"max (gap - m sqrt(L)/k) = {worst:.2e} (<=1e-9)"


EQUIVALENCE_PAIRS = (
    ("courant", "tikhonov", ("eq_qp1", "random_eq_qp(5,2,0)"), {"steps": 5, "kmax": 1e4}),
    ("al", "qprox", ("eq_qp1", "random_eq_qp(5,2,0)"), {"steps": 5}),
    ("sumt:log", "dual:logreg", ("qp1", "random_qp(5,8,7)"), {}),
    ("sumt:hyp", "dual:parabolic", ("qp1", "random_qp(5,8,7)"), {}),
    ("sumt:exp", "dual:entropy", ("qp1", "random_qp(5,8,7)"), {}),
    ("sumt:ls", "dual:fd", ("qp1", "random_qp(5,8,7)"), {}),
    ("nr:mbf", "dual:klprox", ("qp1", "random_qp(5,8,7)"), {"steps": 5}),
    ("lt:mbf", "dual:bregman-mbf", ("qp1", "random_qp(5,8,7)"), {"steps": 5}),
)


def equivalence(tol: float = 1e-6):
    worst, worst_pair, failed = 0.0, "", []
    for a, b, problems, kw in EQUIVALENCE_PAIRS:
        for p in problems:
            rep = compare(RunConfig(a, problem=p, **kw), RunConfig(b, problem=p, **kw), tol=tol)
            if rep.max_diff >= worst:
                worst, worst_pair = rep.max_diff, f"{a}/{b} on {p}"
            if not rep.passed:
                failed.append(f"{a}/{b} on {p}")
    detail = f"{2 * len(EQUIVALENCE_PAIRS)} comparisons, worst {worst:.2e} ({worst_pair}), tol {tol:g}"
    if failed:
        detail += "; failed: " + ", ".join(failed)
    return not failed, detail


def mbf_rate():
    P = make_problem("qp1")
    ls = float(P.lstar[0])
    ratios = []
    for k in (10.0, 100.0):
        lam1 = nr.mbf_run(P, 2.0, k, 1).states[1].lam[0]
        ratios.append(abs(lam1 - ls) / abs(2.0 - ls))
    factor = ratios[0] / ratios[1]
    return 5.0 <= factor <= 20.0, f"one-step ratios {ratios[0]:.3e} (k=10), {ratios[1]:.3e} (k=100); factor {factor:.2f} in [5, 20]"


def _center_run():
    F, _, _, x0 = sc_newton.analytic_center_instance()
    res = sc_newton.minimize(F, x0, beta=sc_newton.DEFAULT_BETA)
    return F, x0, res


def damped_decrease():
    F, x0, res = _center_run()
    damped = res.damped_steps
    slack = min(st.decrease - sc_newton.omega(st.decrement) for st in damped)
    cap = (float(F.value(x0)) - res.F) / sc_newton.omega(sc_newton.DEFAULT_BETA) + 1
    ok = slack >= -1e-10 and len(damped) <= cap
    return ok, f"{len(damped)} damped steps (cap {cap:.1f}); min decrease - omega(lam) = {slack:.2e} (>=-1e-10)"


def quadratic_phase(kappa: float = 1.09):
    _, _, res = _center_run()
    lams = [st.decrement for st in res.trace] + [res.decrement]
    worst = -math.inf
    started = False
    for j, st in enumerate(res.trace):
        started = started or st.decrement <= 0.25
        if started and st.step_type == "pure":
            lam = st.decrement
            worst = max(worst, lams[j + 1] - (lam / (1 - lam)) ** 2)
    values = [st.F for st in res.trace] + [res.F]
    pairs = sc_newton.superlinear_pairs(values, res.F)
    bad = sum(d1 > d0**kappa for d0, d1 in pairs)
    ok = started and worst <= 1e-10 and bad == 0
    return ok, f"max lam+ - (lam/(1-lam))^2 = {worst:.2e} (<=1e-10); {len(pairs) - bad}/{len(pairs)} pairs with D+ <= D^{kappa}"


def dikin_sandwich(samples: int = 1000, pairs: int = 50):
    F, _, _, x0 = sc_newton.analytic_center_instance()
    verdict = sc_newton.dikin_membership(F, x0, 0.9, samples=samples)
    G, y0 = sc_newton.random_barrier_instance()
    slack = min(min(sc_newton.bounds_audit(G, y0, y).values()) for y in sc_newton.random_pairs(G, y0, pairs))
    ok = verdict.ok and slack >= -1e-7
    return ok, f"Dikin r=0.9: {verdict.failures}/{verdict.samples} outside; min bounds slack {slack:.2e} over {pairs} pairs (>=-1e-7)"


def lp_affine_scaling(steps: int = 30):
    P = make_problem("lp2x4")
    tr = lt.lt_lp_run(P, np.ones(P.m), 1.0, steps)
    err = float(np.linalg.norm(tr.lam - P.lstar))
    feas = max(tr.feasibility[1:])
    kkt = tr.report.max_boundary_residual if tr.report is not None else math.inf
    ok = err <= 1e-4 and feas <= 1e-9 and kkt <= 1e-6 and tr.monotone
    s0 = tr.report.s0 if tr.report is not None else None
    return ok, (
        f"|lam_{steps} - lam*| = {err:.2e} (<=1e-4); dual feasibility {feas:.2e} (<=1e-9); "
        f"ellipsoid KKT {kkt:.2e} from step {s0} (<=1e-6); (b, lam) monotone: {tr.monotone}"
    )


def log_sigmoid_modification():
    P = make_problem("qp1_scaled")
    ks = sumt.k_grid(1.0, 10.0, 1e4)
    plain = sumt.sumt_path("log_sigmoid", P, ks, alpha=0.0)
    modified = sumt.sumt_path("log_sigmoid", P, ks, alpha=0.25)
    top = max(float(p.lam[0]) for p in plain.points)
    final = float(modified.points[-1].lam[0])
    ok = top <= 1.0 + 1e-12 and final >= 2.5
    return ok, f"unmodified max lam = {top:.6f} (<=1); modified lam(1e4) = {final:.5f} (>=2.5); lam* = 3"


def three_point(count: int = 100, seed: int = 0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        u, v, w = (rng.uniform(0.1, 10.0, 4) for _ in range(3))
        worst = max(worst, abs(lt.three_point_residual(u, v, w)))
    return worst <= 1e-10, f"max three-point residual {worst:.2e} over {count} triples (<=1e-10)"


CRITERIA: dict[int, tuple[str, Callable]] = {
    1: ("leid", leid_suite),
    2: ("leinv-constant", leinv_constant),
    3: ("log-gap", log_gap),
    4: ("hyperbolic-gap", hyperbolic_gap),
    5: ("equivalence", equivalence),
    6: ("mbf-rate", mbf_rate),
    7: ("damped-decrease", damped_decrease),
    8: ("quadratic-phase", quadratic_phase),
    9: ("dikin-sandwich", dikin_sandwich),
    10: ("lp-affine-scaling", lp_affine_scaling),
    11: ("log-sigmoid-modification", log_sigmoid_modification),
    12: ("three-point", three_point),
}

SUITES: dict[str, tuple[int, ...]] = {
    "all": tuple(CRITERIA),
    "transforms": (1, 2),
    "sumt": (3, 4, 11),
    "equivalence": (5,),
    "nr": (6,),
    "sc_newton": (7, 8, 9),
    "lt": (10, 12),
    **{slug: (n,) for n, (slug, _) in CRITERIA.items()},
    **{str(n): (n,) for n in CRITERIA},
}


def resolve_suite(name: str) -> tuple[int, ...]:
    try:
        return SUITES[name]
    except KeyError:
        raise ConfigError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}") from None


def run_criterion(number: int) -> CriterionResult:
    slug, check = CRITERIA[number]
    t0 = time.perf_counter()
    try:
        ok, detail = check()
    except Exception as exc:  # a crash is a failure, reported with its cause
        ok, detail = False, f"raised {type(exc).__name__}: {exc}"
    return CriterionResult(number, slug, bool(ok), detail, time.perf_counter() - t0)


def verify(suite: str = "all", jobs: int = 1) -> list[CriterionResult]:
    """Run a suite; criteria are independent and may run on worker threads."""
    numbers = resolve_suite(suite)
    if jobs <= 1:
        return [run_criterion(n) for n in numbers]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_criterion, numbers))
