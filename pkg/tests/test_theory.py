import io
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from oracles import binomial_cdf_exact, log_u_mp, theorem1_candidates_mp
from tsh.errors import DomainError
from tsh.posterior import BetaParams, beta_exceedance
from tsh.theory import (
    LOGARITHMIC,
    POLYNOMIAL_LARGE_H,
    POLYNOMIAL_SMALL_H,
    TRIVIAL_BOUND,
    binary_entropy,
    classify_regime,
    exceedance_quadrature,
    h_max_via_root,
    h_threshold_R,
    h_threshold_S,
    h_threshold_U,
    kl_bernoulli,
    log_quantity_R,
    log_quantity_S,
    log_quantity_U,
    phase_length,
    quantity_R,
    quantity_S,
    quantity_U,
    regime_breakpoints,
    theorem1_h_range,
    threshold_report,
    verify_chernoff,
    verify_exceedance,
    verify_fact2,
    verify_lemma3,
    verify_lemma4,
    verify_lemma567,
)


def valid_instances():
    return st.tuples(st.floats(0.02, 0.98), st.floats(0.01, 0.97)).filter(lambda m: m[0] - m[1] > 0.01)


class TestScalars:
    def test_kl_examples(self):
        assert kl_bernoulli(0.5, 0.5) == 0.0
        assert kl_bernoulli(0.5, 0.75) == pytest.approx(0.14384103622589046, abs=1e-15)
        assert kl_bernoulli(0.0, 0.5) == pytest.approx(math.log(2), abs=1e-15)
        assert kl_bernoulli(0.3, 0.0) == math.inf

    @given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    def test_kl_nonnegative(self, y, mu):
        assert kl_bernoulli(y, mu) >= 0.0

    def test_phase_length_examples(self):
        assert phase_length(1e4, 0.4) == 922
        assert phase_length(2, 1.0) == 12
        # 16 ln(e) / 0.16 = 100 up to rounding
        assert phase_length(math.e, 0.4) == 100

    @pytest.mark.parametrize("horizon,delta", [(1e4, 0.0), (1, 0.4), (1e4, 1.5)])
    def test_phase_length_domain(self, horizon, delta):
        with pytest.raises(DomainError):
            phase_length(horizon, delta)

    def test_entropy(self):
        assert binary_entropy(0.5) == pytest.approx(math.log(2))
        assert binary_entropy(0.0) == 0.0


class TestQuantities:
    def test_r_examples(self):
        assert quantity_R(0.9, 0.7, 1.0) == pytest.approx(27 / 7, rel=1e-14)
        h_star = math.log(1 / 9) / math.log(3 / 7)
        assert quantity_R(0.9, 0.7, h_star) == pytest.approx(1.0, abs=1e-12)
        assert h_threshold_R(0.9, 0.7) == pytest.approx(h_star, rel=1e-15)
        assert h_threshold_R(0.4, 0.3) == math.inf

    def test_r_log_slope(self):
        a = log_quantity_R(0.9, 0.7, 2.0) - log_quantity_R(0.9, 0.7, 1.0)
        assert a == pytest.approx(math.log(3 / 7), rel=1e-13)

    def test_s_examples(self):
        assert quantity_S(0.9, 0.7, 0.0) == pytest.approx(0.1, rel=1e-14)
        assert quantity_S(0.8, 0.4, 1.0) == pytest.approx(1 / 3, rel=1e-14)
        assert quantity_S(0.8, 0.4, h_threshold_S(0.8, 0.4)) == pytest.approx(1.0, abs=1e-12)

    @given(valid_instances(), st.floats(0.0, 6.0))
    def test_u_factorises(self, mus, h):
        mu1, mu2 = mus
        y = 0.5 * (mu1 + mu2)
        u = quantity_U(mu1, y, h)
        assert u == pytest.approx(quantity_R(mu1, y, h) ** y * quantity_S(mu1, y, h), rel=1e-12)
        assert log_quantity_U(mu1, y, h) == pytest.approx(float(log_u_mp(mu1, y, h)), rel=1e-9, abs=1e-12)

    @given(valid_instances())
    def test_u_at_one_is_minus_kl(self, mus):
        mu1, mu2 = mus
        y = 0.5 * (mu1 + mu2)
        assert log_quantity_U(mu1, y, 1.0) == pytest.approx(-kl_bernoulli(y, mu1), rel=1e-9, abs=1e-14)

    @given(valid_instances(), st.floats(0.0, 5.0))
    def test_u_slope_is_entropy(self, mus, h):
        mu1, mu2 = mus
        y = 0.5 * (mu1 + mu2)
        eps = 1e-4
        slope = (log_quantity_U(mu1, y, h + eps) - log_quantity_U(mu1, y, h)) / eps
        assert slope == pytest.approx(binary_entropy(y), rel=1e-7, abs=1e-9)

    @given(valid_instances())
    def test_u_is_one_at_threshold(self, mus):
        mu1, mu2 = mus
        y = 0.5 * (mu1 + mu2)
        assert log_quantity_U(mu1, y, h_threshold_U(mu1, y)) == pytest.approx(0.0, abs=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            log_quantity_R(0.5, 0.6, 1.0)
        with pytest.raises(DomainError):
            log_quantity_S(1.0, 0.6, 1.0)


class TestHRange:
    def test_candidates_match_high_precision(self):
        first, second = theorem1_candidates_mp("0.9", "0.5")
        assert float(first) == pytest.approx(2.5932138862384446, rel=1e-15)
        assert float(second) == pytest.approx(1.2515510994616774, rel=1e-15)
        assert h_threshold_R(0.9, 0.7) == pytest.approx(float(first), rel=1e-13)
        assert h_threshold_U(0.9, 0.7) == pytest.approx(float(second), rel=1e-13)

    def test_examples(self):
        r = theorem1_h_range(0.9, 0.5)
        assert r.low == 0.5
        assert r.high == pytest.approx(1.2515510994616774, rel=1e-12)
        # y <= 1/2: only the U candidate applies
        r = theorem1_h_range(0.4, 0.2)
        assert r.high == pytest.approx(1.0353611335134222, rel=1e-12)
        assert float(theorem1_candidates_mp("0.4", "0.2")[1]) == pytest.approx(r.high, rel=1e-13)

    def test_root_agrees(self):
        assert h_max_via_root(0.9, 0.5) == pytest.approx(theorem1_h_range(0.9, 0.5).high, abs=1e-9)

    @given(valid_instances())
    def test_root_agrees_everywhere(self, mus):
        mu1, mu2 = mus
        y = 0.5 * (mu1 + mu2)
        assert h_max_via_root(mu1, mu2) == pytest.approx(h_threshold_U(mu1, y), rel=1e-9)

    @given(valid_instances())
    def test_contains_unit_interval(self, mus):
        r = theorem1_h_range(*mus)
        assert 0.5 in r and 1.0 in r

    @given(valid_instances())
    def test_bracketing(self, mus):
        # at the upper end U <= 1, and just past it one of the conditions fails
        mu1, mu2 = mus
        y = 0.5 * (mu1 + mu2)
        high = theorem1_h_range(mu1, mu2).high
        assert log_quantity_U(mu1, y, high) <= 1e-12
        past = high * (1 + 1e-6) + 1e-9
        assume(abs(past - h_threshold_R(mu1, y)) > 1e-7)
        assert log_quantity_U(mu1, y, past) > 0.0 or log_quantity_R(mu1, y, past) < 0.0

    def test_invalid_order(self):
        with pytest.raises(DomainError):
            theorem1_h_range(0.5, 0.9)


class TestRegimes:
    def test_examples(self):
        small = classify_regime(0.9, 0.5, 0.2)
        assert small.kind == POLYNOMIAL_SMALL_H and small.exponent == pytest.approx(0.6)
        assert classify_regime(0.9, 0.5, 0.5).kind == LOGARITHMIC
        assert classify_regime(0.9, 0.5, 1.0).kind == LOGARITHMIC
        assert classify_regime(0.9, 0.5, 1.25).kind == LOGARITHMIC
        large = classify_regime(0.9, 0.5, 1.26)
        assert large.kind == POLYNOMIAL_LARGE_H and large.branch == "U"
        y = 0.7
        assert large.exponent == pytest.approx(16 * log_quantity_U(0.9, y, 1.26) / 0.16, rel=1e-12)
        assert 0.0 < large.exponent < 1.0
        assert classify_regime(0.9, 0.5, 1.3).kind == TRIVIAL_BOUND
        assert str(small) == "PolynomialSmallH(0.6)"

    def test_s_branch(self):
        # far past h_R the S quantity governs; at h = 50 it is astronomically large
        label = classify_regime(0.9, 0.5, 50.0)
        assert label.kind == TRIVIAL_BOUND and label.branch == "S"
        assert quantity_S(0.9, 0.7, 50.0) == pytest.approx(0.1 / 0.3**50, rel=1e-12)

    def test_breakpoints(self):
        bps = regime_breakpoints(0.9, 0.5)
        assert bps[0] == 0.5
        assert bps[1] == pytest.approx(1.2515510994616774, rel=1e-12)
        assert bps[2] == pytest.approx(1.26792, abs=1e-5)
        assert classify_regime(0.9, 0.5, bps[2] - 1e-6).kind == POLYNOMIAL_LARGE_H
        assert classify_regime(0.9, 0.5, bps[2] + 1e-6).kind == TRIVIAL_BOUND

    @given(valid_instances(), st.floats(0.0, 20.0))
    def test_kind_consistent_with_breakpoints(self, mus, h):
        mu1, mu2 = mus
        low, high, trivial = regime_breakpoints(mu1, mu2)
        assume(min(abs(h - b) for b in (low, high, trivial)) > 1e-7)
        kind = classify_regime(mu1, mu2, h).kind
        if h < low:
            assert kind == POLYNOMIAL_SMALL_H
        elif h <= high:
            assert kind == LOGARITHMIC
        elif h < trivial:
            assert kind == POLYNOMIAL_LARGE_H
        else:
            assert kind == TRIVIAL_BOUND

    def test_rejects_negative_h(self):
        with pytest.raises(DomainError):
            classify_regime(0.9, 0.5, -0.1)


class TestReport:
    def test_without_h(self):
        d = threshold_report(0.9, 0.5).to_dict()
        assert d["R"] is None and d["regime"] is None and d["N"] is None
        assert d["h_range"] == pytest.approx([0.5, 1.2515510994616774], rel=1e-12)
        assert d["kl"] == pytest.approx(kl_bernoulli(0.7, 0.9))
        json.dumps(d)

    def test_with_h(self):
        d = threshold_report(0.9, 0.5, h=1.0, horizon=10_000).to_dict()
        assert d["N"] == 922
        assert d["R"] == pytest.approx(27 / 7)
        assert d["regime"] == LOGARITHMIC

    def test_y_below_half(self):
        d = threshold_report(0.4, 0.2, h=1.0).to_dict()
        assert d["h_threshold_R"] is None
        json.dumps(d)


class TestVerificationSuites:
    def test_lemma3(self):
        report = verify_lemma3(max_param=25)
        assert report.ok and report.max_residual <= 1e-10
        # every (alpha, beta) with alpha, beta <= 25 appears for each x
        assert report.n_points == 25 * 25 * 99

    def test_lemma3_against_rationals(self):
        # the binomial side, checked exactly for a few points
        for a, b, x in ((3, 4, Fraction(1, 5)), (10, 2, Fraction(7, 10))):
            n = a + b - 1
            exact = 1 - binomial_cdf_exact(n, x, a - 1)
            r = verify_lemma3(max_param=12, x_grid=[float(x)])
            mask = (r.grid[:, 0] == a) & (r.grid[:, 1] == b)
            assert float(r.rhs[mask][0]) == pytest.approx(float(exact), abs=1e-14)

    def test_fact2(self):
        report = verify_fact2(n_max=60)
        assert report.ok and report.n_points == 60 * 99

    def test_fact2_detects_bad_candidate(self):
        # n = 1, p = 0.3: both candidates {0, 1} reach probability >= 1/2 on their side
        r = verify_fact2(n_max=1, p_grid=[0.3])
        assert r.lhs[0] == pytest.approx(0.7)

    def test_lemma4_example(self):
        r = verify_lemma4(n_values=[100], p_grid=[0.3], delta_grid=[0.1])
        assert r.ok
        assert r.lhs[0] == pytest.approx(0.98495454218231586, abs=1e-13)
        assert r.rhs[0] == pytest.approx(1 - math.exp(-1.6), abs=1e-15)
        assert float(binomial_cdf_exact(101, Fraction(3, 10), 40)) == pytest.approx(r.lhs[0], abs=1e-14)

    def test_lemma4_small_grid(self):
        assert verify_lemma4(n_values=range(1, 80)).ok

    def test_chernoff(self):
        r = verify_chernoff(n_values=range(1, 80))
        assert r.ok
        assert set(r.lemma) == {"chernoff_upper", "chernoff_lower"}

    def test_lemma567_default_grid(self):
        r = verify_lemma567()
        assert r.ok and r.n_points > 1000
        assert set(r.lemma) == {"lemma5", "lemma6", "lemma7"}

    def test_lemma567_examples(self):
        r = verify_lemma567([(0.9, 0.7, 3.0), (0.4, 0.3, 2.0)])
        by = {(str(l), tuple(g)): v for l, g, v in zip(r.lemma, r.grid, r.lhs)}
        assert by[("lemma5", (0.9, 0.7, 3.0))] < 1.0
        assert by[("lemma6", (0.9, 0.7, 3.0))] > 1.0
        assert by[("lemma5", (0.4, 0.3, 2.0))] > 1.0
        with pytest.raises(DomainError):
            verify_lemma567([(0.9, 0.7, 1.0)])

    def test_exceedance_suite(self):
        r = verify_exceedance(pairs=20, max_param=40, trajectories=3, steps=60)
        assert r.ok and r.n_points == 20 + 3 * 60

    def test_quadrature_oracle(self):
        p1, p2 = BetaParams(3, 5), BetaParams(7, 2)
        assert exceedance_quadrature(p1, p2) == pytest.approx(beta_exceedance(p1, p2), abs=1e-12)

    def test_records_and_json(self):
        r = verify_lemma4(n_values=[3, 1], p_grid=[0.5], delta_grid=[0.2, 0.1])
        recs = list(r.sorted().records())
        assert [rec["grid_point"]["n"] for rec in recs] == [1, 1, 3, 3]
        assert set(recs[0]) == {"lemma", "grid_point", "lhs", "rhs", "pass"}
        buf = io.StringIO()
        r.write_json(buf)
        loaded = json.loads(buf.getvalue())
        assert loaded == recs
        assert r.violations() == []

    def test_violation_reported(self):
        # a broken inequality surfaces as a failing record, not an exception
        r = verify_lemma567([(0.9, 0.7, 3.0)])
        r.passed[0] = False
        assert not r.ok and len(r.violations()) == 1
        assert np.isfinite(r.max_residual)


def test_mp_sanity():
    # the oracle helper itself: at h = 0, U = (mu1 / (1 - mu1))^y (1 - mu1)
    assert float(log_u_mp(0.9, 0.7, 0.0)) == pytest.approx(0.7 * math.log(9) + math.log(0.1), rel=1e-14)
