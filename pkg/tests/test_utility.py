import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import central_difference, naive_log_utility, scalar_bisect
from radioalloc.utility import (
    LogParams,
    SigmoidParams,
    UEProfile,
    app_demand,
    default_ue,
    default_ues,
    eval as utility_eval,
    log_marginal,
    log_utility,
    ue_demand,
    usage_row,
)

# root of (1 + r) ln(1 + r) = 1, from an independent 30-digit solve
LOG_K1_PRICE1_DEMAND = 0.7632228343518967

sigmoids = st.builds(SigmoidParams, st.floats(0.2, 6.0), st.floats(1.0, 40.0))
logs = st.builds(LogParams, st.floats(0.2, 20.0), st.floats(10.0, 200.0))
utilities = st.one_of(sigmoids, logs)


class TestEval:
    @pytest.mark.parametrize("u", [SigmoidParams(5, 10), SigmoidParams(0.3, 50), LogParams(15, 100)])
    def test_zero_rate_is_zero(self, u):
        assert utility_eval(u, 0.0) == 0.0

    @pytest.mark.parametrize("k, r_max", [(1.0, 100.0), (15.0, 100.0), (0.5, 3.0)])
    def test_log_full_satisfaction_at_r_max(self, k, r_max):
        assert utility_eval(LogParams(k, r_max), r_max) == pytest.approx(1.0, abs=1e-15)

    def test_sigmoid_at_inflection(self):
        expected = (math.exp(5) - 1) / (2 * math.exp(5))
        assert utility_eval(SigmoidParams(1, 5), 5.0) == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(0.49663, abs=1e-5)

    def test_matches_textbook_form(self):
        for u in (SigmoidParams(3, 20), SigmoidParams(1, 30), LogParams(3, 100)):
            r = np.linspace(1.0, 150.0, 50)
            ours = np.array([utility_eval(u, x) for x in r])
            np.testing.assert_allclose(np.log(ours), naive_log_utility(u, r), rtol=1e-10, atol=1e-12)

    def test_sigmoid_constants(self):
        u = SigmoidParams(1, 5)
        assert u.c == pytest.approx((1 + math.exp(5)) / math.exp(5))
        assert u.d == pytest.approx(1 / (1 + math.exp(5)))
        assert u.inflection == 5

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            utility_eval(LogParams(1, 10), -1e-9)

    @given(utilities, st.floats(0.0, 500.0), st.floats(1e-3, 50.0))
    def test_monotone_and_bounded(self, u, r, dr):
        lo, hi = utility_eval(u, r), utility_eval(u, r + dr)
        assert hi >= lo
        if isinstance(u, SigmoidParams):
            assert hi <= 1.0
        elif r + dr <= u.r_max:
            assert hi <= 1.0 + 1e-15

    @pytest.mark.parametrize("bad", [(0, 1), (1, 0), (-1, 2)])
    def test_invalid_params(self, bad):
        with pytest.raises(ValueError):
            SigmoidParams(*bad)
        with pytest.raises(ValueError):
            LogParams(*bad)


class TestLogMarginal:
    def test_log_closed_form(self):
        u = LogParams(1.0, 100.0)
        for r in (0.1, 1.0, 7.5, 99.0):
            assert log_marginal(u, 1.0, r) == pytest.approx(1 / ((1 + r) * math.log1p(r)), rel=1e-13)

    def test_sigmoid_chain_rule_form(self):
        u = SigmoidParams(2.0, 8.0)
        for r in (0.5, 4.0, 8.0, 12.0):
            sigma = 1 / (1 + math.exp(-u.a * (r - u.b)))
            expected = 0.7 * u.a * (1 - sigma) * u.c * sigma / utility_eval(u, r)
            assert log_marginal(u, 0.7, r) == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("u", [SigmoidParams(5, 10), SigmoidParams(3, 20), SigmoidParams(1, 30),
                                   LogParams(15, 100), LogParams(3, 100), LogParams(0.5, 100)])
    def test_finite_difference(self, u):
        for r in np.linspace(0.5, 120.0, 40):
            fd = central_difference(lambda x: float(naive_log_utility(u, x)), r)
            assert abs(log_marginal(u, 1.0, r) - fd) <= 1e-6

    @given(utilities, st.floats(0.01, 300.0), st.floats(0.01, 30.0))
    def test_strictly_decreasing(self, u, r, dr):
        hi, lo = log_marginal(u, 1.0, r), log_marginal(u, 1.0, r + dr)
        # deep in a sigmoid's tail both values underflow to zero
        assert lo < hi or hi < 1e-300

    def test_ln_u_matches(self):
        u = SigmoidParams(5, 10)
        assert log_utility(u, 3.0) == pytest.approx(math.log(utility_eval(u, 3.0)), rel=1e-12)

    @pytest.mark.parametrize("r", [0.0, -1.0])
    def test_domain(self, r):
        with pytest.raises(ValueError):
            log_marginal(LogParams(1, 10), 1.0, r)


class TestDemand:
    def test_log_unit_price(self):
        oracle = scalar_bisect(lambda r: (1 + r) * math.log1p(r) - 1, 1e-6, 5.0)
        assert oracle == pytest.approx(LOG_K1_PRICE1_DEMAND, abs=1e-12)
        for r_max in (1.0, 100.0, 1e4):
            assert app_demand(LogParams(1.0, r_max), 1.0, 1.0) == pytest.approx(LOG_K1_PRICE1_DEMAND, abs=1e-9)

    @given(utilities, st.floats(0.05, 1.0), st.floats(1e-4, 50.0))
    def test_round_trip(self, u, alpha, price):
        r = app_demand(u, alpha, price)
        assert log_marginal(u, alpha, r) == pytest.approx(price, abs=1e-6, rel=1e-6)

    @given(utilities, st.floats(0.05, 1.0), st.floats(0.01, 200.0))
    def test_inverse_of_marginal(self, u, alpha, r):
        g = log_marginal(u, alpha, r)
        assume(g > 1e-200)
        # on a sigmoid plateau g is flat to ~1e-13 and r is not recoverable from g
        assume(abs(log_marginal(u, alpha, r + 0.01) - g) > 1e-8 * g)
        assert app_demand(u, alpha, log_marginal(u, alpha, r)) == pytest.approx(r, rel=1e-6, abs=1e-6)

    @given(utilities, st.floats(1e-3, 10.0), st.floats(1.01, 5.0))
    def test_decreasing_in_price(self, u, p, factor):
        assert app_demand(u, 0.5, p) > app_demand(u, 0.5, p * factor)

    def test_vanishes_at_high_price(self):
        u = LogParams(3, 100)
        assert app_demand(u, 1.0, 1e6) < 1e-5

    def test_bad_price(self):
        with pytest.raises(ValueError):
            app_demand(LogParams(1, 1), 1.0, 0.0)


class TestUEProfile:
    def test_normalizes(self):
        ue = UEProfile.build("x", [SigmoidParams(1, 2), LogParams(1, 2)], [0.2, 0.6])
        assert ue.alphas == pytest.approx((0.25, 0.75))
        assert sum(ue.alphas) == pytest.approx(1.0, abs=1e-12)

    def test_zero_alpha_app_is_inactive(self):
        ue = UEProfile.build("x", [SigmoidParams(1, 2), LogParams(1, 2)], [0.0, 0.4])
        assert ue.active == (1,)
        assert ue.alphas == (0.0, 1.0)

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            UEProfile.build("x", [LogParams(1, 2)], [0.0])

    def test_bad_beta(self):
        with pytest.raises(ValueError):
            UEProfile.build("x", [LogParams(1, 2)], [1.0], beta=0.0)

    def test_default_cell(self):
        assert [ue.id for ue in default_ues("alpha_a")] == ["UE1", "UE2", "UE3", "UE4", "UE5"]
        assert len(default_ues("alpha_1")) == 6
        # first UE runs its real-time app 90 % and its delay-tolerant app 10 %
        assert usage_row("alpha_1")[0] == (0.9, 0.1)
        for row in ("alpha_1", "alpha_2", "alpha_3", "alpha_b"):
            for pair in usage_row(row):
                assert sum(pair) == pytest.approx(1.0)


class TestUEDemand:
    def test_single_app(self):
        u = LogParams(3, 100)
        ue = UEProfile.build("x", [u], [1.0])
        assert ue_demand(ue, 0.2) == app_demand(u, 1.0, 0.2)

    @given(st.floats(1e-4, 100.0))
    @settings(max_examples=30)
    def test_positive(self, p):
        for i in range(6):
            assert ue_demand(default_ue(i, (0.3, 0.7)), p) > 0

    def test_matches_budget_sweep(self):
        """Grid oracle: the budget whose best split has inner price p."""
        ue = default_ue(1, (0.6, 0.4))
        (a1, u1), (a2, u2) = [(app.alpha, app.utility) for app in ue.apps]
        p = 0.05
        target = ue_demand(ue, p)

        def best_split(budget, n=200_001):
            x = np.linspace(0, budget, n)[1:-1]
            f = a1 * naive_log_utility(u1, x) + a2 * naive_log_utility(u2, budget - x)
            return x[np.nanargmax(f)]

        def inner_price(budget):
            x = best_split(budget)
            return a2 * float(central_difference(lambda y: naive_log_utility(u2, y), budget - x))

        budget = scalar_bisect(lambda b: p - inner_price(b), 5.0, 150.0, tol=1e-4)
        assert target == pytest.approx(budget, abs=1e-2)


def test_oracle_forms_agree():
    from oracles import stable_log_utility

    for u in (SigmoidParams(5, 10), SigmoidParams(0.5, 30), LogParams(3, 100)):
        r = np.linspace(0.5, 40.0, 80)
        np.testing.assert_allclose(stable_log_utility(u, r), naive_log_utility(u, r), rtol=1e-9, atol=1e-13)
