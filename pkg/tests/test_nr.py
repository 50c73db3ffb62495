import math

import numpy as np
import pytest
from scipy.optimize import brentq

from legendre_methods.errors import DomainError, DomainViolation, StepGuardExhausted
from legendre_methods.model import dual_value, make_problem
from legendre_methods.nr import (
    NR_TRANSFORMS,
    explicit_multiplicative,
    implicit_residuals,
    kl_divergence,
    mbf_run,
    nr_run,
    nr_step,
    phi_divergence,
    phi_prox,
    resolve_psi,
)
from legendre_methods.transforms import kernel_of

PROBLEMS = ["qp1", "random_qp(5,8,42)", "random_qp(5,8,7)"]
PSIS = list(NR_TRANSFORMS)


class TestStep:
    def test_fixed_point(self):
        st = nr_step(make_problem("qp1"), "mbf", [1.0], 1.0)
        assert st.x[0] == pytest.approx(1.0, abs=1e-12)
        assert st.lam[0] == pytest.approx(1.0, abs=1e-12)

    def test_mbf_hand_value(self):
        st = nr_step(make_problem("qp1"), "mbf", [2.0], 1.0)
        assert st.x[0] == pytest.approx(math.sqrt(2.0), abs=1e-12)
        assert st.lam[0] == pytest.approx(math.sqrt(2.0), abs=1e-12)

    def test_exponential_against_scalar_root(self):
        x = brentq(lambda x: x - 2 * math.exp(-(x - 1)), 0.5, 3.0, xtol=1e-15)
        st = nr_step(make_problem("qp1"), "exp", [2.0], 1.0)
        assert st.lam[0] == pytest.approx(2 * math.exp(-(x - 1)), abs=1e-12)
        assert st.lam[0] == pytest.approx(1.3748225, abs=1e-7)

    @pytest.mark.parametrize("psi", PSIS)
    @pytest.mark.parametrize("name", PROBLEMS)
    def test_stationarity(self, psi, name):
        P = make_problem(name)
        assert nr_step(P, psi, np.ones(P.m), 1.0).stationarity <= 1e-9

    def test_start_outside_transform_domain(self):
        with pytest.raises(DomainViolation):
            nr_step(make_problem("qp1"), "mbf", [1.0], 10.0, x0=[0.5])

    def test_nonpositive_multipliers(self):
        with pytest.raises(DomainError):
            nr_step(make_problem("qp1"), "mbf", [0.0], 1.0)

    def test_short_names(self):
        assert resolve_psi("hyp").kind == "mbf_hyperbolic"


class TestRun:
    def test_mbf_recursion(self):
        lams = [s.lam[0] for s in mbf_run(make_problem("qp1"), 2.0, 1.0, 6).states]
        np.testing.assert_allclose(lams, [2.0 ** (2.0**-s) for s in range(7)], rtol=1e-12)

    def test_rate_scales_with_k(self):
        P = make_problem("qp1")
        r10, r100 = (abs(mbf_run(P, 2.0, k, 1).states[1].lam[0] - 1.0) for k in (10.0, 100.0))
        assert 5 <= r10 / r100 <= 20

    @pytest.mark.parametrize("k", [0.5, 3.0])
    def test_constant_at_solution(self, k):
        lams = [s.lam[0] for s in mbf_run(make_problem("qp1"), 1.0, k, 4).states]
        np.testing.assert_allclose(lams, 1.0, atol=1e-12)

    @pytest.mark.parametrize("psi", PSIS)
    @pytest.mark.parametrize("name", PROBLEMS)
    @pytest.mark.parametrize("k", [0.5, 1.0, 10.0])
    def test_dual_ascent(self, psi, name, k):
        P = make_problem(name)
        run = nr_run(P, psi, np.full(P.m, 2.0), k, 8)
        kernel = kernel_of(resolve_psi(psi))
        for a, b in zip(run.states, run.states[1:]):
            assert b.d >= a.d + phi_divergence(kernel, b.lam, a.lam) / k - 1e-9

    @pytest.mark.parametrize("name", PROBLEMS)
    @pytest.mark.parametrize("k", [0.5, 1.0, 10.0])
    def test_kl_contraction(self, name, k):
        P = make_problem(name)
        d_star = dual_value(P, P.lstar).d
        run = mbf_run(P, np.full(P.m, 2.0), k, 8)
        for a, b in zip(run.states, run.states[1:]):
            assert b.kl <= a.kl - k * (d_star - b.d) + 1e-9

    @pytest.mark.parametrize("psi", PSIS)
    @pytest.mark.parametrize("name", PROBLEMS)
    def test_complementarity_summable(self, psi, name):
        P = make_problem(name)
        k = 1.0
        run = nr_run(P, psi, np.full(P.m, 2.0), k, 10)
        L = max(float(np.max(s.lam)) for s in run.states)
        total = sum(s.complementarity**2 for s in run.states[1:])
        assert total <= L / k * (dual_value(P, P.lstar).d - run.states[0].d) + 1e-9

    @pytest.mark.parametrize("name", PROBLEMS)
    def test_converges(self, name):
        P = make_problem(name)
        run = nr_run(P, "mbf", np.ones(P.m), 10.0, 25)
        np.testing.assert_allclose(run.lams[-1], P.lstar, atol=1e-6)

    def test_increasing_k(self):
        P = make_problem("random_qp(5,8,42)")
        fixed = nr_run(P, "mbf", np.ones(P.m), 1.0, 6)
        growing = nr_run(P, "mbf", np.ones(P.m), 1.0, 6, k_factor=4.0)
        err = lambda r: np.linalg.norm(r.lams[-1] - P.lstar)  # noqa: E731
        assert err(growing) < err(fixed)

    def test_implicit_form(self):
        P = make_problem("random_qp(5,8,7)")
        assert max(implicit_residuals(P, mbf_run(P, np.ones(P.m), 2.0, 6))) <= 1e-8

    def test_ergodic_average(self):
        run = mbf_run(make_problem("qp1"), 2.0, 1.0, 4)
        xs = [s.x[0] for s in run.states[1:]]
        assert run.ergodic_x()[0] == pytest.approx(np.mean(xs))


class TestProx:
    def test_mbf_kernel_hand_value(self):
        assert phi_prox(make_problem("qp1"), "mbf", [2.0], 1.0)[0] == pytest.approx(math.sqrt(2.0), abs=1e-10)

    @pytest.mark.parametrize("psi", PSIS)
    def test_fixed_point(self, psi):
        assert phi_prox(make_problem("qp1"), psi, [1.0], 2.0)[0] == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("psi", PSIS)
    @pytest.mark.parametrize("name", PROBLEMS)
    def test_equivalence_with_rescaling(self, psi, name):
        P = make_problem(name)
        lam = np.random.default_rng(2).uniform(0.3, 3.0, P.m)
        for k in (0.5, 1.0, 5.0):
            np.testing.assert_allclose(phi_prox(P, psi, lam, k), nr_step(P, psi, lam, k).lam, atol=1e-7)

    @pytest.mark.parametrize("psi", PSIS)
    def test_kernel_normalization(self, psi):
        kernel = kernel_of(resolve_psi(psi))
        assert float(kernel.eval(1.0)) == pytest.approx(0.0, abs=1e-14)
        assert float(kernel.eval(1.0, 1)) == pytest.approx(0.0, abs=1e-14)


class TestDivergences:
    def test_kl_values(self):
        assert kl_divergence([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert kl_divergence([0.0], [3.0]) == pytest.approx(3.0)
        assert kl_divergence([2.0], [1.0]) == pytest.approx(2 * math.log(2.0) - 1)

    def test_kl_domain(self):
        with pytest.raises(DomainError):
            kl_divergence([1.0], [0.0])

    def test_mbf_divergence_is_kl_weighted(self):
        # lam * phi(u / lam) with phi(s) = -ln s + s - 1 is KL(lam, u)
        kernel = kernel_of(resolve_psi("mbf"))
        u, lam = np.array([0.5, 2.0, 3.0]), np.array([1.0, 1.5, 4.0])
        assert phi_divergence(kernel, u, lam) == pytest.approx(kl_divergence(lam, u), abs=1e-14)


class TestMultiplicative:
    def test_hand_recursion(self):
        run = explicit_multiplicative(make_problem("qp1"), [2.0], 0.5, 3)
        np.testing.assert_allclose([l[0] for l in run.lams], [2.0, 4 / 3, 8 / 7, 16 / 15], rtol=1e-14)

    def test_constant_at_solution(self):
        run = explicit_multiplicative(make_problem("qp1"), [1.0], 0.5, 3)
        np.testing.assert_allclose(np.concatenate(run.lams), 1.0)

    def test_step_guard_halves_k(self):
        run = explicit_multiplicative(make_problem("qp1"), [0.2], 5.0, 2)
        assert run.ks[-1] < 5.0
        assert run.events

    def test_step_guard_exhausted(self):
        with pytest.raises(StepGuardExhausted):
            explicit_multiplicative(lambda u: np.array([np.inf]), [1.0], 1.0, 1, max_halvings=5)
