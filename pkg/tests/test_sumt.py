import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import expit

from legendre_methods.errors import InfeasibleStart, UnsupportedKind
from legendre_methods.model import make_problem
from legendre_methods.sumt import (
    SUMT_KINDS,
    dual_monotonicity,
    dual_regularized,
    gap_report,
    infeasibility_report,
    k_grid,
    regularizer,
    resolve_kind,
    sumt_minimize,
    sumt_path,
)

K_GRID = [1.0, 10.0, 100.0, 1000.0]
PROBLEMS = ["qp1", "random_qp(5,8,42)", "random_qp(5,8,7)"]


def test_k_grid():
    assert k_grid(1.0, 10.0, 1e4) == [1.0, 10.0, 100.0, 1000.0, 10000.0]


def test_aliases():
    assert resolve_kind("hyp") == "hyperbolic"
    assert resolve_kind("ls") == "log_sigmoid"
    with pytest.raises(UnsupportedKind):
        resolve_kind("quadratic")


class TestLogBarrier:
    def test_hand_solution(self):
        p = sumt_minimize("log", make_problem("qp1"), 4.0)
        expected = 0.5 * (1 + math.sqrt(2.0))
        assert p.x[0] == pytest.approx(expected, abs=1e-12)
        assert p.lam[0] == pytest.approx(expected, abs=1e-12)
        assert p.gap == pytest.approx(0.25, abs=1e-14)

    @pytest.mark.parametrize("name", PROBLEMS)
    def test_exact_gap(self, name):
        P = make_problem(name)
        for g in gap_report(sumt_path("log", P, K_GRID), P):
            assert g.gap == pytest.approx(P.m / g.k, rel=1e-6)
            assert g.satisfied

    @pytest.mark.parametrize("name", PROBLEMS)
    def test_componentwise_complementarity(self, name):
        for p in sumt_path("log", make_problem(name), K_GRID).points:
            np.testing.assert_allclose(p.lam * p.c, 1.0 / p.k, rtol=1e-9)

    def test_random_qp_gap_value(self):
        P = make_problem("random_qp(5,8,42)")
        g = gap_report(sumt_path("log", P, [100.0]), P)[0]
        assert g.gap == pytest.approx(0.08, rel=1e-6)

    def test_infeasible_start(self):
        with pytest.raises(InfeasibleStart):
            sumt_minimize("log", make_problem("qp1"), 1.0, x_start=[0.5])

    def test_equality_rows_rejected(self):
        with pytest.raises(UnsupportedKind):
            sumt_minimize("log", make_problem("eq_qp1"), 1.0)


class TestHyperbolic:
    @pytest.mark.parametrize("name", PROBLEMS)
    def test_gap_bound(self, name):
        P = make_problem(name)
        run = sumt_path("hyperbolic", P, K_GRID)
        for g in gap_report(run, P):
            assert g.gap <= P.m * math.sqrt(run.L) / g.k + 1e-9

    @pytest.mark.parametrize("name", PROBLEMS)
    def test_identity(self, name):
        for p in sumt_path("hyperbolic", make_problem(name), K_GRID).points:
            np.testing.assert_allclose(p.lam * p.c**2, p.k**-2, rtol=1e-9)

    def test_qp1_bound_at_k10(self):
        P = make_problem("qp1")
        run = sumt_path("hyperbolic", P, [1.0, 10.0])
        g = gap_report(run, P)[1]
        assert g.gap <= math.sqrt(run.L) / 10


class TestExterior:
    def test_exponential_limit(self):
        p = sumt_minimize("exponential", make_problem("qp1"), 1e4)
        assert abs(p.lam[0] - 1.0) <= 2e-3

    @pytest.mark.parametrize("kind", ["exponential", "log_sigmoid"])
    @pytest.mark.parametrize("name", PROBLEMS)
    def test_gap_decreases(self, kind, name):
        P = make_problem(name)
        gaps = [abs(g.gap) for g in gap_report(sumt_path(kind, P, K_GRID + [1e4]), P)]
        # exponential on qp1 sits on (x*, lam*) for every k, so the gap is identically 0 there
        assert gaps[-1] <= gaps[0]
        assert gaps[-1] <= 5e-3

    @pytest.mark.parametrize("kind", ["exponential", "log_sigmoid"])
    def test_no_closed_bound(self, kind):
        P = make_problem("qp1")
        assert all(g.bound is None and g.satisfied is None for g in gap_report(sumt_path(kind, P, K_GRID), P))

    @pytest.mark.parametrize("kind", ["exponential", "log_sigmoid"])
    @pytest.mark.parametrize("name", PROBLEMS)
    def test_infeasibility_bound(self, kind, name):
        P = make_problem(name)
        for rep in infeasibility_report(sumt_path(kind, P, K_GRID + [1e4]), P):
            assert rep.satisfied, rep


class TestLogSigmoidModification:
    def test_unmodified_multipliers_capped(self):
        P = make_problem("qp1_scaled")
        for p in sumt_path("log_sigmoid", P, k_grid(1.0, 10.0, 1e4), alpha=0.0).points:
            assert p.lam[0] <= 1.0

    def test_modified_reaches_large_multiplier(self):
        P = make_problem("qp1_scaled")
        run = sumt_path("log_sigmoid", P, k_grid(1.0, 10.0, 1e4), alpha=0.25)
        assert run.points[-1].lam[0] >= 2.5
        # scalar stationarity x = (k^a / 3) / (1 + exp(k (x - 1) / 3)) solved independently
        k, a = 1e4, 0.25
        xk = brentq(lambda x: x - (k**a / 3) * expit(-k * (x - 1) / 3), 0.5, 1.5, xtol=1e-15)
        assert run.points[-1].lam[0] == pytest.approx(3 * xk, abs=1e-9)

    def test_dual_monotonicity_fixed_scale(self):
        mono = dual_monotonicity(make_problem("random_qp(5,8,42)"), k_grid(1.0, 10.0, 1e4), alpha=0.0)
        assert mono.d_increasing
        assert mono.r_decreasing

    def test_alpha_range(self):
        with pytest.raises(Exception):
            sumt_minimize("log_sigmoid", make_problem("qp1"), 1.0, alpha=0.6)


class TestDualRegularization:
    def test_log_hand_value(self):
        u = dual_regularized("log", make_problem("qp1"), 4.0)
        assert u[0] == pytest.approx(0.5 * (1 + math.sqrt(2.0)), abs=1e-10)

    @pytest.mark.parametrize("kind", SUMT_KINDS)
    @pytest.mark.parametrize("name", PROBLEMS)
    def test_matches_primal(self, kind, name):
        P = make_problem(name)
        for p in sumt_path(kind, P, K_GRID).points:
            np.testing.assert_allclose(dual_regularized(kind, P, p.k), p.lam, atol=1e-7)

    @pytest.mark.parametrize("kind", SUMT_KINDS)
    def test_limit(self, kind):
        assert dual_regularized(kind, make_problem("qp1"), 1e4)[0] == pytest.approx(1.0, abs=2e-3)

    def test_regularizer_scaling(self):
        # log kind, a = 0: pi*(s) = inf_t {s t - ln t} = 1 + ln s
        assert regularizer("log", [2.0, 3.0], 10.0) == pytest.approx(2 + math.log(6.0), abs=1e-14)
