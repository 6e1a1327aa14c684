import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from memarb.data_io import SyntheticSpec, generate_synthetic
from memarb.errors import DataError, DegenerateSeries, ParameterError, ThresholdTooHigh
from memarb.evaluation import (
    assess,
    autocorr,
    benchmark_weights,
    chi2_pvalue,
    daily_changes,
    format_p_value,
    monte_carlo_report,
    portfolio_values,
    portmanteau,
    threshold_backtest,
    threshold_portfolio_filter,
)
from memarb.statarb import osa_path, osa_run

# 10**7 chi-square(20) draws (seed 12345): tail fraction above 31.41 and its standard error
MC_TAIL = 0.0499861
MC_SE = 6.89e-5


def ar1(rng, phi, T):
    e = rng.standard_normal(T)
    out = np.empty(T)
    out[0] = e[0]
    for t in range(1, T):
        out[t] = phi * out[t - 1] + e[t]
    return out


class TestAutocorr:
    def test_constant(self):
        assert autocorr(np.full(10, 3.0), 1) == pytest.approx(0.9)

    def test_alternating(self):
        d = np.tile([2.0, -2.0], 5)
        assert autocorr(d, 1) == pytest.approx(-9 / 10)

    def test_hand_computed(self):
        assert autocorr([1.0, 2.0, 3.0, 4.0], 2) == pytest.approx(11 / 30, abs=1e-15)

    def test_errors(self):
        with pytest.raises(DegenerateSeries):
            autocorr(np.zeros(5), 1)
        with pytest.raises(ParameterError):
            autocorr([1.0, 2.0], 2)

    @settings(max_examples=100, deadline=None)
    @given(arrays(float, st.integers(3, 40), elements=st.floats(-1e3, 1e3)), st.integers(1, 2))
    def test_bounded(self, d, k):
        if not d @ d > 0:
            return
        assert abs(autocorr(d, k)) <= 1 + 1e-12


class TestChi2:
    def test_zero(self):
        assert chi2_pvalue(0.0, 5) == 1.0

    @pytest.mark.parametrize("Q", [0, 0.5, 1, 2, 5, 10])
    def test_two_dof_closed_form(self, Q):
        assert abs(chi2_pvalue(Q, 2) - math.exp(-Q / 2)) <= 1e-10

    def test_monte_carlo_tail(self):
        assert abs(chi2_pvalue(31.41, 20) - MC_TAIL) <= 3 * MC_SE

    def test_against_scipy(self):
        for L in (1, 2, 3, 7, 20, 55):
            for Q in (0.01, 0.7, 3.0, 12.0, 40.0, 150.0):
                assert abs(chi2_pvalue(Q, L) - stats.chi2.sf(Q, L)) <= 1e-10

    def test_monotone(self):
        # below Q ~ 1 the tail is 1 to double precision for L = 20
        Q = np.linspace(2.0, 80.0, 400)
        p = [chi2_pvalue(q, 20) for q in Q]
        assert np.all(np.diff(p) < 0)

    def test_extremes(self):
        assert chi2_pvalue(math.inf, 3) == 0.0
        assert 0.0 <= chi2_pvalue(5000.0, 20) < 1e-15
        assert format_p_value(chi2_pvalue(5000.0, 20)) == "<1e-15"

    def test_rejects(self):
        with pytest.raises(ParameterError):
            chi2_pvalue(1.0, 0)
        with pytest.raises(ParameterError):
            chi2_pvalue(-1.0, 3)


class TestPortmanteau:
    def test_orthogonal_series(self):
        # impulse then zeros: every lagged product vanishes
        d = np.zeros(30)
        d[0] = 1.0
        rep = portmanteau(d, 5)
        assert rep.Q == 0.0 and rep.p_value == 1.0

    def test_single_term(self):
        # Q for L=1 reduces to T (T + 2) rho(1)^2 / (T - 1)
        rng = np.random.default_rng(0)
        d = rng.standard_normal(100)
        r1 = autocorr(d, 1)
        rep = portmanteau(d, 1)
        assert rep.Q == pytest.approx(100 * 102 * r1 ** 2 / 99)
        assert 100 * 102 * (0.1 ** 2 / 99) == pytest.approx(1.0303, abs=1e-4)

    def test_report_invariants(self):
        rng = np.random.default_rng(1)
        rep = portmanteau(rng.standard_normal(300), 20)
        assert rep.Q >= 0 and 0 <= rep.p_value <= 1
        assert len(rep.rho) == 20
        assert set(rep.to_dict()) >= {"Q", "L", "p_value", "rho"}

    def test_white_noise_uniform(self):
        rng = np.random.default_rng(2)
        p = [portmanteau(rng.standard_normal(2000), 20).p_value for _ in range(100)]
        assert stats.kstest(p, "uniform").pvalue > 0.01

    def test_discriminates(self):
        rng = np.random.default_rng(3)
        ar = [portmanteau(ar1(rng, 0.6, 2000), 20).p_value for _ in range(100)]
        wn = [portmanteau(rng.standard_normal(2000), 20).p_value for _ in range(100)]
        assert sum(p < 0.01 for p in ar) >= 95
        assert sum(p > 0.01 for p in wn) >= 95

    def test_too_short(self):
        with pytest.raises(ParameterError):
            portmanteau(np.ones(20), 20)

    def test_changes_from_played_portfolio(self):
        rng = np.random.default_rng(4)
        Y = rng.uniform(10, 20, (50, 3))
        W = rng.standard_normal((50, 3))
        W /= np.linalg.norm(W, axis=1, keepdims=True)
        v = np.array([W[t] @ Y[t] for t in range(50)])
        d = np.array([v[t] - v[t - 1] for t in range(1, 50)])
        np.testing.assert_allclose(daily_changes(portfolio_values(W, Y)), d, atol=1e-12)
        assert portmanteau(daily_changes(portfolio_values(W, Y)), 5).Q == pytest.approx(portmanteau(d, 5).Q)


class TestBacktest:
    def test_one_round_trip(self):
        log = threshold_backtest([0.0, -1.0, 1.0])
        assert log.revenue == 2.0
        assert [e[1] for e in log.events] == ["buy", "sell"]

    def test_no_signal(self):
        log = threshold_backtest([0.0, 0.5, 2.0, 0.9])
        assert log.events == [] and log.revenue == 0.0
        assert log.to_dict()["trades"] == []

    def test_hand_traced(self):
        log = threshold_backtest([-2.0, 0.0, 3.0, -1.5, 2.0])
        assert log.revenue == pytest.approx(8.5)
        assert log.events == [(0, "buy", -2.0), (2, "sell", 3.0), (3, "buy", -1.5), (4, "sell", 2.0)]
        assert log.open_position is None

    def test_open_position_excluded(self):
        log = threshold_backtest([-2.0, 3.0, -1.0, 0.5])
        assert log.revenue == 5.0
        assert log.open_position["unrealized"] == pytest.approx(1.5)

    def test_bad_thresholds(self):
        with pytest.raises(ParameterError):
            threshold_backtest([0.0], lower=1.0, upper=1.0)

    def test_alternation_random_walks(self):
        rng = np.random.default_rng(5)
        walks = np.cumsum(rng.standard_normal((10_000, 60)), axis=1)
        for v in walks:
            log = threshold_backtest(v)
            actions = [e[1] for e in log.events]
            assert actions[0::2] == ["buy"] * len(actions[0::2])
            assert actions[1::2] == ["sell"] * len(actions[1::2])
            pairs = zip(log.events[0::2], log.events[1::2])
            assert log.revenue == pytest.approx(sum(s[2] - b[2] for b, s in pairs))

    @settings(max_examples=100, deadline=None)
    @given(
        arrays(float, st.integers(1, 30), elements=st.floats(-5, 5)),
        arrays(float, st.integers(0, 10), elements=st.floats(-0.99, 0.99)),
    )
    def test_prefix_inside_band(self, v, prefix):
        a = threshold_backtest(v)
        b = threshold_backtest(np.concatenate([prefix, v]))
        assert b.revenue == pytest.approx(a.revenue)


class TestBenchmark:
    def test_two_shares_against_one(self):
        Y = np.array([[10.0, 20.0], [10.0, 20.0]])
        x = benchmark_weights(Y)
        np.testing.assert_allclose(x, [0.894427, -0.447214], atol=1e-6)
        assert x[0] / -x[1] == pytest.approx(2.0)

    def test_equal_prices(self):
        np.testing.assert_allclose(benchmark_weights([[1.0, 1.0]]), [1 / math.sqrt(2), -1 / math.sqrt(2)])

    def test_share_ratio(self):
        x = benchmark_weights([[5.0, 50.0], [5.0, 50.0]])
        assert abs(x[0] / x[1]) == pytest.approx(10.0)
        assert np.linalg.norm(x) == pytest.approx(1.0)

    def test_calibration_window(self):
        Y = np.array([[10.0, 20.0], [30.0, 20.0]])
        np.testing.assert_allclose(benchmark_weights(Y, slice(0, 1)), benchmark_weights(Y[:1]))

    def test_errors(self):
        with pytest.raises(DataError):
            benchmark_weights([[0.0, 1.0]])
        with pytest.raises(ParameterError):
            benchmark_weights([[1.0, 2.0, 3.0]])


class TestFilter:
    def test_zero_threshold(self):
        x = np.array([0.6, -0.8])
        idx, w = threshold_portfolio_filter(x, 0.0)
        np.testing.assert_array_equal(idx, [0, 1])
        np.testing.assert_allclose(w, x)

    def test_dominant(self):
        x = np.array([0.9, 0.1, 0.1])
        x /= np.linalg.norm(x)
        idx, w = threshold_portfolio_filter(x, 0.5)
        assert list(idx) == [0] and w[0] == pytest.approx(1.0)

    def test_scan_oracle(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal(30)
        x /= np.linalg.norm(x)
        idx, w = threshold_portfolio_filter(x, 0.15)
        keep = [i for i in range(30) if abs(x[i]) >= 0.15]
        assert list(idx) == keep
        np.testing.assert_allclose(w, x[keep] / np.linalg.norm(x[keep]))

    def test_too_high(self):
        with pytest.raises(ThresholdTooHigh):
            threshold_portfolio_filter([0.6, 0.8], 0.9)


class TestAssess:
    def test_degenerate_warns(self):
        out = assess(np.full(40, 3.0), L=5)
        assert out["portmanteau"] is None
        assert out["warnings"]
        assert out["backtest"].revenue == 0.0


class TestMonteCarlo:
    def test_singleton(self):
        rep = monte_carlo_report(lambda ss: {"p_value": 0.3, "revenue": 4.0}, n_runs=1)
        assert rep["mean_p"] == 0.3 and rep["mean_revenue"] == 4.0 and rep["std_p"] == 0.0

    def test_deterministic_strategy(self):
        rep = monte_carlo_report(lambda ss: {"p_value": 0.1, "revenue": 2.0}, n_runs=7)
        assert rep["std_revenue"] == 0.0 and rep["n_runs"] == 7

    def test_reproducible(self):
        def factory(ss):
            rng = np.random.default_rng(ss)
            return {"p_value": float(rng.random()), "revenue": float(rng.normal(3.0, 1.0))}

        assert monte_carlo_report(factory, 50, seed=9) == monte_carlo_report(factory, 50, seed=9)

    def test_osa_matches_larger_rerun(self):
        Y = generate_synthetic(SyntheticSpec(T=1000, seed=4)).prices
        path = osa_path(Y)

        def factory(ss):
            run = osa_run(Y, seed=ss, path=path)
            v = portfolio_values(run.weights, Y)
            return {"p_value": portmanteau(daily_changes(v)).p_value,
                    "revenue": threshold_backtest(v).revenue}

        small = monte_carlo_report(factory, 50, seed=1)
        big = monte_carlo_report(factory, 500, seed=2)
        se = small["std_revenue"] / math.sqrt(50)
        assert abs(small["mean_revenue"] - big["mean_revenue"]) <= 2 * se

    def test_rejects_zero(self):
        with pytest.raises(ParameterError):
            monte_carlo_report(lambda ss: {}, n_runs=0)
