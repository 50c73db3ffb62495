import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import qmc

from legendre_methods.errors import DomainError, NoStationaryPoint, NotStrictlyConvex, OrderError, UnsupportedKind
from legendre_methods.transforms import (
    PSI_KINDS,
    SHIPPED_KINDS,
    conjugate,
    conjugate_leinv,
    conjugate_numeric,
    evaluate,
    get_kernel,
    get_transform,
    kernel_of,
    leid_residual,
    leinv,
    truncate,
)


def _interior_points(T, count=100, seed=0):
    lo, hi = T.sample_range
    return lo + (hi - lo) * qmc.Halton(1, seed=seed).random(count)[:, 0]


class TestEvaluate:
    def test_mbf_at_zero(self):
        assert evaluate(get_transform("mbf_log"), 0.0, 0) == 0.0

    def test_log_barrier_curvature(self):
        assert evaluate(get_transform("log_barrier"), 1.0, 2) == pytest.approx(-1.0, abs=1e-15)

    def test_log_sigmoid_slope_at_zero(self):
        assert evaluate(get_transform("log_sigmoid"), 0.0, 1) == pytest.approx(0.5, abs=1e-15)

    def test_vectorized(self):
        t = np.array([0.0, 1.0, 3.0])
        np.testing.assert_allclose(get_transform("mbf_log").eval(t), np.log1p(t), rtol=1e-15)

    @pytest.mark.parametrize("kind", SHIPPED_KINDS)
    def test_derivatives_match_finite_differences(self, kind):
        T = get_transform(kind)
        h = 1e-6
        for t in _interior_points(T, 7):
            for order in (1, 2, 3):
                fd = (float(T.eval(t + h, order - 1)) - float(T.eval(t - h, order - 1))) / (2 * h)
                assert float(T.eval(t, order)) == pytest.approx(fd, rel=1e-5, abs=1e-6)

    def test_outside_domain(self):
        with pytest.raises(DomainError):
            get_transform("log_barrier").eval(-1.0)

    def test_bad_order(self):
        with pytest.raises(OrderError):
            get_transform("quadratic").eval(0.0, 4)

    def test_unknown_kind(self):
        with pytest.raises(UnsupportedKind):
            get_transform("cubic")


class TestConjugate:
    def test_quadratic(self):
        assert conjugate(get_transform("quadratic"), 3.0) == pytest.approx(4.5, abs=1e-14)

    def test_log_sigmoid_fermi_dirac(self):
        assert conjugate(get_transform("log_sigmoid"), 0.5) == pytest.approx(math.log(2.0), abs=1e-14)

    def test_hyperbolic_barrier(self):
        # inf_t {t + 1/t} = 2
        assert conjugate(get_transform("hyperbolic_barrier"), 1.0) == pytest.approx(2.0, abs=1e-14)

    def test_numeric_oracle_values(self):
        assert conjugate_numeric(get_transform("quadratic"), 0.0) == pytest.approx(0.0, abs=1e-12)
        assert conjugate_numeric(get_transform("mbf_log"), 1.0) == pytest.approx(0.0, abs=1e-12)
        assert conjugate_numeric(get_transform("exponential"), 1.0) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("kind", SHIPPED_KINDS)
    def test_closed_form_agrees_with_numeric(self, kind):
        T = get_transform(kind)
        for t in _interior_points(T, 15, seed=1):
            s = float(T.eval(t, 1))
            assert float(T.conjugate(s)) == pytest.approx(conjugate_numeric(T, s), abs=1e-8)

    @pytest.mark.parametrize("kind", SHIPPED_KINDS)
    def test_involution(self, kind):
        # the conjugate of the conjugate, evaluated at the slope t*'(s) = t, recovers f(t)
        T = get_transform(kind)
        for t in _interior_points(T, 100, seed=2):
            s = float(T.eval(t, 1))
            back = s * float(T.conjugate(s, 1)) - float(T.conjugate(s))
            assert back == pytest.approx(float(T.eval(t)), abs=1e-7)

    def test_slope_outside_conjugate_domain(self):
        with pytest.raises(DomainError):
            get_transform("mbf_log").conjugate(-1.0)

    def test_numeric_oracle_unattainable_slope(self):
        with pytest.raises(NoStationaryPoint):
            conjugate_numeric(get_transform("exponential"), -1.0)


class TestLegendreIdentities:
    def test_leid_examples(self):
        assert leid_residual(get_transform("quadratic"), 7.3) <= 1e-12
        assert leid_residual(get_transform("log_barrier"), 2.0) <= 1e-10
        assert leid_residual(get_transform("mbf_log"), 0.5) <= 1e-10

    @pytest.mark.parametrize("kind", SHIPPED_KINDS)
    def test_leid_suite(self, kind):
        T = get_transform(kind)
        assert max(leid_residual(T, x) for x in _interior_points(T)) <= 1e-8

    @pytest.mark.parametrize("kind", SHIPPED_KINDS)
    def test_curvature_reciprocity(self, kind):
        T = get_transform(kind)
        for x in _interior_points(T):
            assert float(T.eval(x, 2)) * float(T.conjugate(float(T.eval(x, 1)), 2)) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("kind", SHIPPED_KINDS)
    def test_leinv_symmetry(self, kind):
        T = get_transform(kind)
        for x in _interior_points(T):
            assert conjugate_leinv(T, float(T.eval(x, 1))) == pytest.approx(leinv(T, x), abs=1e-6)

    @pytest.mark.parametrize("kind", ["mbf_log", "exponential_shifted", "chks", "mbf_hyperbolic", "log_sigmoid_psi"])
    def test_leid_on_truncated_members(self, kind):
        T = truncate(kind, -0.5)
        for x in np.linspace(-4.0, 3.0, 57):
            assert leid_residual(T, x) <= 1e-8

    def test_neg_log_invariant(self):
        T = get_transform("neg_log")
        assert leinv(T, 0.5) == pytest.approx(2.0, abs=1e-12)
        assert leinv(T, 10.0) == pytest.approx(2.0, abs=1e-12)

    def test_quadratic_invariant(self):
        assert leinv(get_transform("quadratic"), 1.0) == 0.0

    def test_leinv_flat_branch(self):
        # past tau the truncated member is quadratic, so the invariant vanishes
        assert leinv(truncate("mbf_log", -0.5), -2.0) == 0.0

    def test_leinv_not_strictly_convex(self):
        class Affine:
            concave = False

            def eval(self, t, order=0):
                return [t, 1.0, 0.0, 0.0][order]

        with pytest.raises(NotStrictlyConvex):
            leinv(Affine(), 0.3)


class TestTruncation:
    def test_mbf_coefficients(self):
        T = truncate("mbf_log", -0.5)
        a, b, c = T.coeffs
        assert a == pytest.approx(-2.0, abs=1e-14)
        assert b == pytest.approx(0.0, abs=1e-14)
        assert c == pytest.approx(math.log(0.5) + 0.5, abs=1e-14)

    def test_value_continuity(self):
        assert truncate("mbf_log", -0.5).eval(-0.5) == pytest.approx(math.log(0.5), abs=1e-15)

    def test_exponential_slope_at_tau(self):
        T = truncate("exponential_shifted", -0.5)
        assert float(T.eval(-0.5, 1)) == pytest.approx(math.exp(0.5), abs=1e-14)

    @pytest.mark.parametrize("kind", ["mbf_log", "exponential_shifted", "chks", "mbf_hyperbolic"])
    def test_c2_order(self, kind):
        T = truncate(kind, -0.5)
        base = get_transform(kind)
        a, b, c = T.coeffs
        errs = []
        for h in (1e-2, 1e-3, 1e-4):
            t = -0.5 - h
            errs.append(abs(float(base.eval(t)) - (a * t * t + b * t + c)))
        orders = [math.log10(errs[i] / errs[i + 1]) for i in range(2)]
        assert min(orders) >= 2.7

    def test_whole_real_line(self):
        T = get_transform("truncated_mbf_log")
        assert T.domain == (-math.inf, math.inf)
        assert np.isfinite(T.eval(-100.0))

    def test_prefix_and_tau_agree(self):
        assert get_transform("truncated_chks", tau=-0.3) == get_transform("chks", tau=-0.3)

    @pytest.mark.parametrize("tau", [0.0, -1.0, 0.5])
    def test_tau_range(self, tau):
        with pytest.raises(DomainError):
            truncate("mbf_log", tau)

    def test_convex_member_rejected(self):
        with pytest.raises(UnsupportedKind):
            truncate("neg_log", -0.5)


class TestKernels:
    def test_mbf_kernel_at_one(self):
        assert kernel_of(get_transform("mbf_log")).eval(1.0) == pytest.approx(0.0, abs=1e-15)

    def test_exponential_kernel_at_zero(self):
        assert kernel_of(get_transform("exponential_shifted")).eval(0.0) == pytest.approx(1.0, abs=1e-15)

    def test_fermi_dirac_at_zero(self):
        assert kernel_of(get_transform("log_sigmoid")).eval(0.0) == pytest.approx(2 * math.log(2.0), abs=1e-14)

    def test_mbf_kernel_closed_form(self):
        phi = get_kernel("mbf_kernel")
        s = np.linspace(0.1, 5.0, 9)
        np.testing.assert_allclose(phi.eval(s), -np.log(s) + s - 1, atol=1e-14)

    @pytest.mark.parametrize("kind", [k for k in PSI_KINDS])
    def test_kernel_positivity(self, kind):
        phi = kernel_of(get_transform(kind))
        lo, hi = phi.domain
        s = np.linspace(max(lo, 0.0) + 1e-3, min(hi, 6.0) - 1e-3, 400)
        vals = np.atleast_1d(phi.eval(s))
        assert np.all(vals >= -1e-14)
        assert vals[np.argmin(vals)] == pytest.approx(0.0, abs=1e-4)
        assert float(phi.eval(1.0)) == pytest.approx(0.0, abs=1e-14)
        assert float(phi.eval(1.0, 1)) == pytest.approx(0.0, abs=1e-14)

    def test_no_kernel_for_barrier(self):
        with pytest.raises(UnsupportedKind):
            kernel_of(get_transform("neg_log"))


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=-0.9, max_value=30.0))
def test_mbf_leid_property(t):
    assert leid_residual(get_transform("mbf_log"), t) <= 1e-8 * max(1.0, abs(t))


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=-0.95, max_value=-0.05), st.floats(min_value=-5.0, max_value=5.0))
def test_truncated_mbf_is_concave_and_c1(tau, t):
    T = truncate("mbf_log", tau)
    assert float(T.eval(t, 2)) < 0
    h = 1e-7
    assert float(T.eval(tau + h, 1)) == pytest.approx(float(T.eval(tau - h, 1)), rel=1e-5)
