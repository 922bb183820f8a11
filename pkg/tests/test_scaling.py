"""Scaling exponents, critical exponents, verdicts, and hypothesis sampling."""

import math

import numpy as np
import pytest

from fnel import (
    NONEXISTENCE_EXTERIOR, EXISTENCE_SUPERSOLUTION, K_coefficient,
    NonlinearitySpec, beta_star, classify, critical_exponent,
    explicit_constant, homogeneity_indicator, hypothesis_check, laplacian,
    pucci_max, pucci_min, xi_alpha,
)
from fnel.matcore import eval_operator, isaacs, radial_hessian
from fnel.scaling import LOG_CASE_THRESHOLD, NotRotInvariant, alpha_star, sampled_verdict


class TestXiAlpha:
    def test_positive_branch(self):
        assert xi_alpha(1.0, 2.0) == pytest.approx(0.5)

    def test_log_branch(self):
        assert xi_alpha(0.0, math.e) == pytest.approx(-1.0)

    def test_negative_branch(self):
        assert xi_alpha(-0.5, 4.0) == pytest.approx(-2.0)

    def test_rejects_nonpositive_radius(self):
        with pytest.raises(ValueError):
            xi_alpha(1.0, 0.0)


class TestHomogeneityIndicator:
    def test_pucci_max_root(self, pm3):
        assert homogeneity_indicator(pm3, 3, 3.0) == pytest.approx(0.0)

    def test_laplacian_root(self, lap3):
        assert homogeneity_indicator(lap3, 3, 1.0) == pytest.approx(0.0)

    def test_pucci_max_at_zero(self, pm3):
        # hand evaluation: -1*1 - 2*(-2) = 3
        assert homogeneity_indicator(pm3, 3, 0.0) == pytest.approx(3.0)

    def test_strictly_decreasing(self, pm3):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a = float(rng.uniform(-0.9, 4.0))
            d = float(rng.uniform(1e-3, 1.0))
            psi_a = homogeneity_indicator(pm3, 3, a)
            psi_ad = homogeneity_indicator(pm3, 3, a + d)
            assert psi_ad <= psi_a - pm3.lam * d + 1e-12

    def test_rejects_non_rot_invariant(self):
        op = isaacs(1, 2, 2, [[np.diag([1.0, 2.0])]])
        with pytest.raises(NotRotInvariant):
            homogeneity_indicator(op, 2, 1.0)

    def test_sign_matches_radial_residual(self, pm3):
        # sign(psi(alpha)) = sign(F(D^2 xi_alpha)) at any radius
        for alpha in (0.5, 2.0, 3.5):
            for r in (0.5, 1.0, 4.0):
                g1 = -alpha * r ** (-alpha - 1)
                g2 = alpha * (alpha + 1) * r ** (-alpha - 2)
                res = eval_operator(pm3, radial_hessian(3, g1, g2, r))
                psi = homogeneity_indicator(pm3, 3, alpha)
                assert np.sign(res) == np.sign(psi) or abs(psi) < 1e-12


class TestAlphaStar:
    def test_pucci_max_closed_form(self, pm3):
        rep = alpha_star(pm3, 3)
        assert rep.alpha_star == pytest.approx(3.0, abs=1e-8)
        assert not rep.log_case

    def test_pucci_min_log_case(self, pmin3):
        rep = alpha_star(pmin3, 3)
        assert rep.log_case
        assert abs(rep.alpha_star) < LOG_CASE_THRESHOLD

    def test_laplacian_all_dims(self):
        for n in (3, 4, 5, 6):
            rep = alpha_star(laplacian(n), n)
            assert rep.alpha_star == pytest.approx(n - 2, abs=1e-8)
        assert alpha_star(laplacian(2), 2).log_case

    def test_bracket_containment_random(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            lam = float(rng.uniform(0.1, 3.0))
            Lam = lam * float(rng.uniform(1.0, 4.0))
            n = int(rng.integers(2, 7))
            rep = alpha_star(pucci_max(lam, Lam, n), n)
            lo = (lam / Lam) * (n - 1) - 1
            hi = (Lam / lam) * (n - 1) - 1
            assert lo - 1e-9 <= rep.alpha_star <= hi + 1e-9
            assert rep.alpha_star == pytest.approx(hi, abs=1e-8)

    def test_indicator_samples_recorded(self, pm3):
        rep = alpha_star(pm3, 3)
        assert len(rep.indicator_samples) >= 2


class TestCriticalExponent:
    def test_laplacian_n3(self, lap3):
        assert critical_exponent(lap3, 3) == pytest.approx(3.0, abs=1e-12)

    def test_pucci_max(self, pm3):
        assert critical_exponent(pm3, 3) == pytest.approx(5.0 / 3.0, abs=1e-12)

    def test_pucci_min_infinite(self, pmin3):
        assert critical_exponent(pmin3, 3) == math.inf


class TestBetaStar:
    def test_examples(self):
        assert beta_star(3.0, 0.0) == pytest.approx(1.0)
        assert beta_star(2.0, 1.0) == pytest.approx(1.0)
        assert beta_star(2.0, 0.0) == pytest.approx(2.0)

    def test_gamma_zero_form(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            p = float(rng.uniform(1.01, 9.0))
            assert beta_star(p, 0.0) == 2.0 / (p - 1.0)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            beta_star(1.0, 0.0)
        with pytest.raises(ValueError):
            beta_star(2.0, 2.0)


class TestKCoefficient:
    def test_laplacian_formula(self, lap3):
        assert K_coefficient(lap3, 3, 0.5) == pytest.approx(0.25)

    def test_pucci_max_formula(self, pm3):
        # K = Lam*(n-1)*beta - lam*beta*(beta+1) at beta = 2
        assert K_coefficient(pm3, 3, 2.0) == pytest.approx(2.0)

    def test_vanishes_at_alpha_star(self, pm3, lap3):
        assert K_coefficient(pm3, 3, 3.0) == pytest.approx(0.0, abs=1e-12)
        assert K_coefficient(lap3, 3, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_sign_switch_at_alpha_star(self, pm3):
        assert K_coefficient(pm3, 3, 2.9) > 0
        assert K_coefficient(pm3, 3, 3.1) < 0


class TestExplicitConstant:
    def test_laplacian_p5(self, lap3):
        assert explicit_constant(lap3, 3, 5.0) == pytest.approx(0.25 ** 0.25)

    def test_pucci_max_p2(self, pm3):
        assert explicit_constant(pm3, 3, 2.0) == pytest.approx(2.0)

    def test_none_in_nonexistence_regime(self, lap3):
        assert explicit_constant(lap3, 3, 2.0) is None

    def test_residual_vanishes(self, pm3, lap3):
        # F(D^2 (c r^{-b})) - c^p r^{-gamma - b p} == 0 at several radii
        for op, n, p, gamma in ((pm3, 3, 2.0, 0.0), (lap3, 3, 5.0, 0.0),
                                (pm3, 3, 3.0, 0.5)):
            c = explicit_constant(op, n, p, gamma)
            if c is None:
                continue
            b = beta_star(p, gamma)
            for r in (0.5, 1.0, 2.0, 10.0):
                g1 = -c * b * r ** (-b - 1)
                g2 = c * b * (b + 1) * r ** (-b - 2)
                lhs = eval_operator(op, radial_hessian(n, g1, g2, r))
                rhs = r ** (-gamma) * (c * r ** -b) ** p
                assert lhs == pytest.approx(rhs, rel=1e-10)


class TestClassify:
    def test_laplacian_p2_nonexistence(self, lap3):
        v = classify(lap3, 3, 2.0)
        assert v.outcome == NONEXISTENCE_EXTERIOR
        assert v.alpha_star == pytest.approx(1.0)
        assert v.beta_star == pytest.approx(2.0)

    def test_pucci_max_p2_existence(self, pm3):
        assert classify(pm3, 3, 2.0).outcome == EXISTENCE_SUPERSOLUTION

    def test_equality_is_nonexistence(self):
        v = classify(laplacian(4), 4, 2.0)
        assert v.alpha_star == pytest.approx(v.beta_star)
        assert v.outcome == NONEXISTENCE_EXTERIOR

    def test_margin_sign(self, lap3, pm3):
        assert classify(lap3, 3, 2.0).margin < 0
        assert classify(pm3, 3, 2.0).margin > 0

    def test_laplacian_column_matches_critical_exponent_rule(self):
        # generic p values stay clear of floating-point dust at the exact
        # boundary p = n/(n-2); n = 4 exercises the equality case exactly
        for n in (3, 4, 5, 6):
            crit = n / (n - 2)
            probes = [1.1, 1.5, crit * (1 - 1e-6), crit * (1 + 1e-6),
                      2.0, 3.0, 5.0]
            if n == 4:
                probes.append(2.0)  # p = crit exactly representable
            for p in probes:
                v = classify(laplacian(n), n, p)
                want = (NONEXISTENCE_EXTERIOR if p <= crit
                        else EXISTENCE_SUPERSOLUTION)
                assert v.outcome == want, (n, p)


class TestHypothesisCheck:
    def test_identity_power_case(self):
        spec = NonlinearitySpec.power(1.0, 1.0, 2.0)
        rep = hypothesis_check(spec, 2.0, 1.0)
        assert rep.all_passed
        for name in ("fx-nonexist1", "fx-nonexist2", "fx-exist"):
            assert rep.condition(name).fitted_constant == pytest.approx(1.0)

    def test_lower_bound_with_extra_term(self):
        # f = s^2 + s^3 >= s^2 on (0, 1]
        spec = NonlinearitySpec(
            evaluator=lambda r, s: s ** 2 + s ** 3, epsilon0=1.0, R0=1.0)
        rep = hypothesis_check(spec, 2.0, 0.0)
        cond = rep.condition("fx-nonexist1")
        assert cond.passed
        assert cond.fitted_constant == pytest.approx(1.0, rel=1e-6)

    def test_ratio_condition_divergence_detected(self):
        # f = sqrt(s): f(s)/s = s^{-1/2} blows up as s -> 0
        spec = NonlinearitySpec(
            evaluator=lambda r, s: math.sqrt(s), epsilon0=1.0, R0=1.0)
        rep = hypothesis_check(spec, 2.0, 0.0)
        assert not rep.condition("fx-nonexist2").passed

    def test_wording_fixed(self):
        spec = NonlinearitySpec.power(1.0, 0.0, 2.0)
        rep = hypothesis_check(spec, 2.0, 0.0)
        assert rep.wording == "sampled evidence, not certified"

    def test_sampled_verdict_combines(self, pm3):
        spec = NonlinearitySpec.power(1.0, 0.0, 1.4)
        rep = sampled_verdict(pm3, 3, spec, 1.4, 0.0)
        assert rep["outcome"] == NONEXISTENCE_EXTERIOR
        assert rep["wording"] == "sampled evidence, not certified"
