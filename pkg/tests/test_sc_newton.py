import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize as sp_minimize, minimize_scalar

from legendre_methods.errors import DomainError, MaxIterations, RadiusTooLarge
from legendre_methods.sc_newton import (
    BETA_MAX,
    analytic_center_instance,
    bounds_audit,
    damped_step,
    dikin_membership,
    kappa_bound,
    local_norms,
    log_barrier_oracle,
    minimize,
    neg_log_oracle,
    newton_decrement,
    omega,
    omega_star,
    quadratic_oracle,
    quartic_oracle,
    random_barrier_instance,
    random_pairs,
    sc_check,
    superlinear_pairs,
)


def interval_barrier():
    """``-ln x - ln(2 - x)``."""
    return log_barrier_oracle([[-1.0], [1.0]], [0.0, 2.0])


@pytest.fixture(scope="module")
def center():
    F, A, b, x0 = analytic_center_instance()
    res = minimize(F, x0)
    return F, x0, res


def test_omega_values():
    assert omega(0.0) == 0.0
    assert omega(1.0) == pytest.approx(1 - math.log(2.0), abs=1e-15)
    assert omega_star(0.5) == pytest.approx(-0.5 - math.log(0.5), abs=1e-15)


def test_omega_star_is_conjugate():
    # omega*(s) = sup_t {s t - omega(t)}
    for s in (0.1, 0.5, 0.9):
        res = minimize_scalar(lambda t: -(s * t - omega(t)), bounds=(-0.999, 100.0), method="bounded", options={"xatol": 1e-12})
        assert omega_star(s) == pytest.approx(-res.fun, abs=1e-9)


def test_omega_domain():
    with pytest.raises(DomainError):
        omega(-1.0)
    with pytest.raises(DomainError):
        omega_star(1.0)


def test_kappa_bound():
    # ln(omega(-lam) - omega(lam)) / ln omega(lam) at lam = 0.4, a superlinear exponent above 1
    assert 1.05 < kappa_bound(0.4) < 1.15
    assert kappa_bound(0.4) == pytest.approx(1.1070327240620221, rel=1e-12)


class TestDecrement:
    def test_at_minimizer(self):
        assert newton_decrement(interval_barrier(), [1.0]) == pytest.approx(0.0, abs=1e-15)

    def test_hand_value(self):
        assert newton_decrement(interval_barrier(), [0.5]) == pytest.approx(4 / math.sqrt(40), abs=1e-14)

    def test_identity_hessian(self):
        x = np.array([3.0, -4.0, 1.0])
        assert newton_decrement(quadratic_oracle(3), x) == pytest.approx(np.linalg.norm(x), abs=1e-14)

    def test_dual_norm(self):
        F = interval_barrier()
        x = np.array([0.5])
        _, dual = local_norms(F, x, [1.0], F.grad(x))
        assert dual == pytest.approx(newton_decrement(F, x), abs=1e-14)


class TestDampedStep:
    def test_hand_value(self):
        F = interval_barrier()
        x1 = damped_step(F, [0.5])
        assert x1[0] == pytest.approx(0.683772, abs=1e-6)
        dec = F([0.5]) - F(x1)
        assert dec == pytest.approx(0.18, abs=5e-3)
        assert dec >= omega(4 / math.sqrt(40))

    def test_shrinks_quadratic(self):
        x = np.array([5.0, 5.0])
        np.testing.assert_allclose(damped_step(quadratic_oracle(2), x), x * (1 - 1 / (1 + np.linalg.norm(x))), rtol=1e-14)

    def test_stationary_point(self):
        np.testing.assert_array_equal(damped_step(interval_barrier(), [1.0]), [1.0])


class TestMinimize:
    def test_analytic_center(self, center):
        F, x0, res = center
        ref = sp_minimize(F, x0, jac=F.grad, hess=F.hess, method="trust-exact", options={"gtol": 1e-14})
        np.testing.assert_allclose(res.x, ref.x, atol=1e-9)
        assert res.decrement <= 1e-10
        assert len(res.damped_steps) <= (F(x0) - res.F) / omega(0.25) + 1

    def test_damped_decrease(self, center):
        _, _, res = center
        assert res.damped_steps
        for st in res.damped_steps:
            assert st.decrease >= st.omega - 1e-10

    def test_quadratic_phase(self, center):
        _, _, res = center
        lams = [s.decrement for s in res.trace] + [res.decrement]
        for j, s in enumerate(res.trace):
            if s.decrement <= 0.25:
                assert s.step_type == "pure"
                assert lams[j + 1] <= (s.decrement / (1 - s.decrement)) ** 2 + 1e-10

    def test_superlinear_against_tight_reference(self, center):
        F, x0, res = center
        ref = minimize(F, res.x, tol=1e-14).F
        pairs = superlinear_pairs([s.F for s in res.trace] + [res.F], ref)
        assert pairs
        for d0, d1 in pairs:
            assert d1 <= d0**1.09

    def test_beta_independence(self, center):
        F, x0, res = center
        other = minimize(F, x0, beta=0.38)
        np.testing.assert_allclose(other.x, res.x, atol=1e-9)

    def test_quadratic_converges(self):
        np.testing.assert_allclose(minimize(quadratic_oracle(2), [5.0, 5.0]).x, 0.0, atol=1e-12)

    def test_finite_minimizer_from_small_decrement(self):
        # decrement < 1 at the start guarantees a minimizer
        F = interval_barrier()
        assert newton_decrement(F, [0.5]) < 1
        res = minimize(F, [0.5])
        assert res.x[0] == pytest.approx(1.0, abs=1e-12)
        assert all(s.step_type in ("damped", "pure") for s in res.trace)

    def test_beta_range(self):
        with pytest.raises(DomainError):
            minimize(interval_barrier(), [0.5], beta=BETA_MAX)

    def test_start_outside_domain(self):
        with pytest.raises(DomainError):
            minimize(interval_barrier(), [3.0])

    def test_iteration_limit(self):
        with pytest.raises(MaxIterations):
            minimize(quartic_oracle(), [1.0], max_iter=3)


class TestSelfConcordance:
    def test_neg_log_constant(self):
        chk = sc_check(neg_log_oracle(), [1.0], [1.0])
        assert chk.verdict
        assert chk.max_leinv == pytest.approx(2.0, abs=1e-12)

    def test_random_barrier_segments(self):
        F, x0 = random_barrier_instance()
        rng = np.random.default_rng(0)
        for _ in range(10):
            assert sc_check(F, x0, rng.standard_normal(5)).max_leinv <= 2 + 1e-3

    def test_quartic_is_not_self_concordant(self):
        assert not sc_check(quartic_oracle(), [0.5], [1.0]).verdict

    @pytest.mark.parametrize("maker", ["interval", "center", "random", "quadratic"])
    def test_derivative_consistency(self, maker):
        if maker == "interval":
            F, x = interval_barrier(), np.array([0.7])
        elif maker == "center":
            F, _, _, x = analytic_center_instance()
        elif maker == "random":
            F, x = random_barrier_instance()
            x = x + 0.01
        else:
            F, x = quadratic_oracle(3), np.array([1.0, -2.0, 0.5])
        h = 1e-6
        n = x.size
        g, H = np.asarray(F.grad(x)), np.atleast_2d(F.hess(x))
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            assert (F(x + e) - F(x - e)) / (2 * h) == pytest.approx(g[i], rel=1e-5, abs=1e-7)
            np.testing.assert_allclose((F.grad(x + e) - F.grad(x - e)) / (2 * h), H[:, i], rtol=1e-4, atol=1e-6)


class TestBoundsAudit:
    def test_scalar_pair(self):
        slack = bounds_audit(neg_log_oracle(), [1.0], [1.5])
        assert len(slack) == 10
        assert min(slack.values()) >= 0

    def test_degenerate_pair_is_tight(self):
        slack = bounds_audit(neg_log_oracle(), [1.0], [1.0])
        np.testing.assert_allclose(list(slack.values()), 0.0, atol=1e-14)

    def test_random_pairs(self):
        F, x0 = random_barrier_instance()
        for y in random_pairs(F, x0, 50):
            assert min(bounds_audit(F, x0, y).values()) >= -1e-7

    def test_radius_too_large(self):
        with pytest.raises(RadiusTooLarge):
            bounds_audit(neg_log_oracle(), [1.0], [2.5])

    def test_lower_bounds_only_beyond_unit_radius(self):
        # -ln x attains the lower bounds, so the slack is zero up to rounding
        slack = bounds_audit(neg_log_oracle(), [1.0], [2.5], upper=False)
        assert min(slack.values()) >= -1e-14


class TestDikin:
    def test_interval(self):
        assert dikin_membership(neg_log_oracle(), [1.0], 0.99).ok

    def test_tiny_radius(self):
        F, _, _, x0 = analytic_center_instance()
        assert dikin_membership(F, x0, 1e-9, samples=50).ok

    def test_analytic_center(self, center):
        F, _, res = center
        v = dikin_membership(F, res.x, 0.9, samples=1000)
        assert v.ok and v.failures == 0

    def test_large_radius_escapes(self, center):
        F, _, res = center
        assert not dikin_membership(F, res.x, 5.0, samples=200).ok


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=0.05, max_value=1.95))
def test_damped_step_stays_inside(x):
    F = interval_barrier()
    y = damped_step(F, [x])
    assert 0 < y[0] < 2
    lam = newton_decrement(F, [x])
    assert F([x]) - F(y) >= omega(lam) - 1e-10
