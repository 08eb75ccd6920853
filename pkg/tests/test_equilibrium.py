import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectrum_cournot.equilibrium import (
    BestResponseProblem,
    Method,
    Regime,
    best_response,
    best_response_iteration,
    closed_form_symmetric,
    lemma3_foc_solution,
    lemma_deviation,
    solve_cooperation,
    solve_numeric,
    verify_nash,
)
from spectrum_cournot.errors import NotApplicableError, SolverError
from spectrum_cournot.model import Allocation, MarketConfig, sp_revenue
from spectrum_cournot.potential import potential_value

from strategies import configs

SMALL = (0.4, 0.2, 0.4)
LARGE = (0.2, 0.6, 0.2)
W_GRID = [round(0.05 * k, 2) for k in range(1, 21)]


def grid_revenue(problem, d, o):
    """SP revenue written out directly from prices and latencies, on arrays."""
    cfg = problem.cfg
    opp_d, opp_o = problem.opponent
    m_own = cfg.m_a if problem.sp == 1 else cfg.m_b
    p_own = 1 - d / m_own if m_own > 0 else 1.0
    p_ab = 1 - (o + opp_o) / cfg.m_ab
    l_own = (d + o + opp_o) / cfg.W
    l_ab = (d + o + opp_o + opp_d) / cfg.W
    return d * (p_own - l_own) + o * (p_ab - l_ab)


def grid_best_response(problem, n=401, rounds=4):
    """Brute-force argmax of the SP's revenue on successively refined grids."""
    cfg = problem.cfg
    m_own = cfg.m_a if problem.sp == 1 else cfg.m_b
    o_hi = cfg.m_ab - problem.opponent[1]
    d_lo, d_hi, o_lo, o_top = 0.0, m_own, 0.0, o_hi
    for _ in range(rounds):
        D, O = np.meshgrid(np.linspace(d_lo, d_hi, n), np.linspace(o_lo, o_top, n), indexing="ij")
        R = grid_revenue(problem, D, O)
        i = np.unravel_index(np.argmax(R), R.shape)
        d, o = D[i], O[i]
        dd, do = 4 * (d_hi - d_lo) / (n - 1), 4 * (o_top - o_lo) / (n - 1)
        d_lo, d_hi = max(0.0, d - dd), min(m_own, d + dd)
        o_lo, o_top = max(0.0, o - do), min(o_hi, o + do)
    return (d, o), R[i]


class TestBestResponse:
    def test_idle_opponent_matches_grid(self):
        problem = BestResponseProblem(1, (0.0, 0.0), MarketConfig(*SMALL, 0.1))
        (d, o), value = best_response(problem)
        (gd, go), gvalue = grid_best_response(problem)
        assert (d, o) == pytest.approx((gd, go), abs=1e-5)
        # interior optimum of the 2x2 stationarity system: (1/35, 1/70)
        assert (d, o) == pytest.approx((1 / 35, 1 / 70), abs=1e-14)
        assert value >= gvalue - 1e-15

    @pytest.mark.parametrize("sp", [1, 2])
    @pytest.mark.parametrize(
        "cfg, opponent",
        [
            (MarketConfig(0.5, 0.2, 0.3, 0.3), (0.05, 0.1)),
            (MarketConfig(0.3, 0.5, 0.2, 0.05), (0.01, 0.3)),
            (MarketConfig(0.2, 0.6, 0.2, 1.5), (0.0, 0.55)),
            (MarketConfig(0.45, 0.1, 0.45, 2.0), (0.45, 0.0)),
        ],
    )
    def test_matches_grid(self, sp, cfg, opponent):
        problem = BestResponseProblem(sp, opponent, cfg)
        (d, o), value = best_response(problem)
        _, gvalue = grid_best_response(problem)
        assert value >= gvalue - 1e-14
        assert value - gvalue < 1e-9

    def test_saturated_overlap_forces_zero(self):
        cfg = MarketConfig(*SMALL, 0.5)
        (d, o), _ = best_response(BestResponseProblem(1, (0.1, 0.2), cfg))
        assert o == 0.0
        assert d > 0

    def test_fixed_point_at_closed_form(self):
        cfg = MarketConfig(*SMALL, 0.4)
        eq = closed_form_symmetric(cfg).alloc
        (d, o), _ = best_response(BestResponseProblem(1, (eq.x2_b, eq.x2_ab), cfg))
        assert abs(d - eq.x1_a) <= 1e-10 and abs(o - eq.x1_ab) <= 1e-10

    def test_degenerate_own_market(self):
        cfg = MarketConfig(0.0, 0.6, 0.4, 0.5)
        (d, o), _ = best_response(BestResponseProblem(1, (0.1, 0.0), cfg))
        assert d == 0.0 and o > 0


class TestClosedForm:
    def test_below_threshold(self):
        res = closed_form_symmetric(MarketConfig(*SMALL, 0.1))
        assert res.alloc.x1_a == pytest.approx(0.04, abs=1e-15)
        assert res.alloc.x1_ab == 0.0
        assert res.regime is Regime.DEDICATED_ONLY

    def test_branches_continuous_at_threshold(self):
        cfg = MarketConfig(*SMALL, 0.2)
        res = closed_form_symmetric(cfg)
        monopoly = 0.2 * 0.4 / (2 * (0.2 + 0.4))
        assert res.alloc.x1_a == pytest.approx(monopoly, abs=1e-15)
        assert res.alloc.x1_a == pytest.approx(0.08 / 1.2, abs=1e-15)
        assert res.alloc.x1_ab == 0.0

    def test_above_threshold(self):
        res = closed_form_symmetric(MarketConfig(*SMALL, 0.4))
        assert res.alloc.x1_a == pytest.approx(0.16 / 1.8, abs=1e-15)
        assert res.alloc.x1_ab == pytest.approx(0.4 * 0.2 / (3 * 1.8), abs=1e-15)
        assert res.alloc.x1_ab == pytest.approx(0.0148148148148, abs=1e-12)
        assert res.residual < 1e-10
        assert res.regime is Regime.BOTH_IN_OVERLAP
        assert res.outcome.r1 == res.outcome.r2

    def test_no_overlap_market(self):
        res = closed_form_symmetric(MarketConfig(0.5, 0.0, 0.5, 0.3))
        assert res.alloc.x1_a == pytest.approx(0.09375, abs=1e-15)
        assert res.alloc.x1_ab == 0.0

    @pytest.mark.parametrize("W", [0.1, 0.4, 0.9])
    def test_grid_oracle_agrees(self, W):
        cfg = MarketConfig(*LARGE, W)
        eq = closed_form_symmetric(cfg).alloc
        (d, o), _ = grid_best_response(BestResponseProblem(1, (eq.x2_b, eq.x2_ab), cfg))
        assert (d, o) == pytest.approx((eq.x1_a, eq.x1_ab), abs=1e-6)

    def test_asymmetric_rejected(self):
        with pytest.raises(NotApplicableError, match="solve_numeric"):
            closed_form_symmetric(MarketConfig(0.5, 0.2, 0.3, 0.4))


class TestSolveNumeric:
    @pytest.mark.parametrize("sizes", [SMALL, LARGE])
    def test_matches_closed_form(self, sizes):
        for W in W_GRID:
            cfg = MarketConfig(*sizes, W)
            num = solve_numeric(cfg)
            cf = closed_form_symmetric(cfg)
            np.testing.assert_allclose(num.alloc.as_array(), cf.alloc.as_array(), atol=1e-8, rtol=0)
            assert num.method is Method.NUMERIC_POTENTIAL
            assert num.residual <= 1e-8

    def test_asymmetric_entry_order(self):
        cfg = MarketConfig(0.5, 0.2, 0.3, 1.0)
        first = {}
        for k in range(1, 101):
            alloc = solve_numeric(cfg.with_bandwidth(k / 100)).alloc
            for sp, q in ((1, alloc.x1_ab), (2, alloc.x2_ab)):
                if q > 1e-10:
                    first.setdefault(sp, k / 100)
        assert first[2] < first[1]

    def test_decoupled_monopolies(self):
        cfg = MarketConfig(0.6, 0.0, 0.4, 0.3)
        res = solve_numeric(cfg)
        assert res.alloc.x1_a == pytest.approx(0.3 * 0.6 / (2 * 0.9), abs=1e-12)
        assert res.alloc.x2_b == pytest.approx(0.3 * 0.4 / (2 * 0.7), abs=1e-12)

    def test_one_sp_without_dedicated_market(self):
        res = solve_numeric(MarketConfig(0.0, 0.5, 0.5, 0.4))
        assert res.alloc.x1_a == 0.0
        assert res.alloc.x1_ab > 0

    def test_non_convergence_raises(self):
        with pytest.raises(SolverError) as info:
            solve_numeric(MarketConfig(*LARGE, 0.5), max_iter=1)
        assert info.value.last_iterate is not None

    @pytest.mark.parametrize("sizes", [SMALL, LARGE, (0.5, 0.2, 0.3)])
    def test_potential_non_decreasing(self, sizes):
        cfg = MarketConfig(*sizes, 0.35)
        trace = []
        best_response_iteration(cfg, start=Allocation(0.1, 0.05, 0.01, 0.02), callback=lambda x: trace.append(potential_value(x, cfg)))
        assert all(b >= a - 1e-15 for a, b in zip(trace, trace[1:]))

    @settings(max_examples=40, deadline=None)
    @given(configs())
    def test_equilibrium_properties(self, cfg):
        res = solve_numeric(cfg)
        x, out = res.alloc, res.outcome
        assert res.residual <= 1e-8
        assert (res.regime is Regime.DEDICATED_ONLY) == (x.x1_ab <= 1e-10 and x.x2_ab <= 1e-10)
        assert 0 <= x.x1_a <= cfg.m_a and 0 <= x.x2_b <= cfg.m_b
        assert x.x1_ab >= 0 and x.x2_ab >= 0 and x.x1_ab + x.x2_ab <= cfg.m_ab
        served = [(x.x1_a, out.s_a), (x.x2_b, out.s_b), (x.x1_ab + x.x2_ab, out.s_ab)]
        for q, s in served:
            if q > 1e-10:
                assert s >= -1e-12

    @settings(max_examples=30, deadline=None)
    @given(configs(symmetric=True))
    def test_symmetric_equilibrium(self, cfg):
        x = solve_numeric(cfg).alloc
        assert abs(x.x1_a - x.x2_b) <= 1e-10
        assert abs(x.x1_ab - x.x2_ab) <= 1e-10

    @pytest.mark.parametrize("sizes", [SMALL, (0.5, 0.2, 0.3), (0.15, 0.3, 0.55)])
    def test_random_starts_agree(self, sizes):
        rng = np.random.default_rng(7)
        cfg = MarketConfig(*sizes, 0.3)
        ref = solve_numeric(cfg).alloc.as_array()
        for _ in range(10):
            total = rng.uniform(0, cfg.m_ab)
            s = rng.uniform()
            start = Allocation(rng.uniform(0, cfg.m_a), total * s, total * (1 - s), rng.uniform(0, cfg.m_b))
            x, _ = best_response_iteration(cfg, start=start)
            assert np.max(np.abs(x.as_array() - ref)) <= 1e-7


class TestCooperation:
    def test_value(self):
        res = solve_cooperation(MarketConfig(*SMALL, 0.4))
        assert res.alloc.x1_a == pytest.approx(0.1, abs=1e-15)
        assert res.alloc.x2_b == pytest.approx(0.1, abs=1e-15)
        assert res.method is Method.COOPERATION
        assert res.regime is Regime.DEDICATED_ONLY

    def test_single_variable_oracle(self):
        m, W = 0.3, 0.45
        xs = np.linspace(0, m, 300001)
        best = xs[np.argmax(xs * (1 - xs / m - xs / W))]
        res = solve_cooperation(MarketConfig(m, 0.5, 0.2, W))
        assert res.alloc.x1_a == pytest.approx(best, abs=2e-6)

    @pytest.mark.parametrize("W", [0.05, 0.1, 0.15, 0.19])
    def test_equals_competition_below_threshold(self, W):
        cfg = MarketConfig(*SMALL, W)
        np.testing.assert_allclose(solve_cooperation(cfg).alloc.as_array(), solve_numeric(cfg).alloc.as_array(), atol=1e-10)

    def test_empty_dedicated_market(self):
        assert solve_cooperation(MarketConfig(0.0, 0.6, 0.4, 0.5)).alloc.x1_a == 0.0


class TestVerifyNash:
    def test_closed_form(self):
        for W in W_GRID:
            assert verify_nash(closed_form_symmetric(MarketConfig(*LARGE, W)).alloc, MarketConfig(*LARGE, W)) <= 1e-10

    def test_idle_profile_is_not_equilibrium(self):
        assert verify_nash(Allocation(), MarketConfig(*SMALL, 0.3)) > 0

    def test_cooperation_not_equilibrium_at_large_W(self):
        cfg = MarketConfig(*LARGE, 1.0)
        coop = solve_cooperation(cfg)
        assert coop.residual > 1e-8
        assert np.max(np.abs(coop.alloc.as_array() - solve_numeric(cfg).alloc.as_array())) > 1e-3


class TestLemmas:
    CFG = MarketConfig(*SMALL, 0.3)

    def test_lemma1_shift(self):
        alloc = Allocation(0, 0.05, 0.05, 0.1)
        dev = lemma_deviation(alloc, self.CFG)
        assert (dev.lemma, dev.sp, dev.argument) == (1, 1, "shift")
        assert dev.deviated.x1_a == dev.delta
        assert dev.deviated.x1_ab == pytest.approx(0.05 - dev.delta)
        assert sp_revenue(dev.deviated, self.CFG, 1) > sp_revenue(alloc, self.CFG, 1)

    def test_lemma2_enter(self):
        alloc = Allocation(0, 0, 0.05, 0.1)
        dev = lemma_deviation(alloc, self.CFG)
        assert (dev.lemma, dev.sp, dev.argument) == (2, 1, "enter")
        assert dev.gain > 0

    def test_lemma2_overloaded_rival_sheds(self):
        # x2_ab > W: entry does not pay, but SP2 is charging a negative price in AB
        cfg = MarketConfig(0.2, 0.6, 0.2, 0.05)
        alloc = Allocation(0, 0, 0.5, 0.0)
        dev = lemma_deviation(alloc, cfg)
        assert dev.lemma == 2 and dev.sp == 2 and dev.argument == "shed"
        assert dev.gain > 0

    def test_mirrored_patterns(self):
        dev = lemma_deviation(Allocation(0.1, 0.05, 0.05, 0), self.CFG)
        assert (dev.lemma, dev.sp) == (1, 2)
        dev = lemma_deviation(Allocation(0.1, 0.05, 0, 0), self.CFG)
        assert (dev.lemma, dev.sp) == (2, 2)

    def test_equilibrium_not_applicable(self):
        for W in (0.1, 0.5):
            cfg = MarketConfig(*SMALL, W)
            with pytest.raises(NotApplicableError):
                lemma_deviation(solve_numeric(cfg).alloc, cfg)

    def test_lemma3_symmetric(self):
        alloc = Allocation(0.05, 0.0, 0.03, 0.05)
        dev = lemma_deviation(alloc, MarketConfig(*SMALL, 0.15))
        assert dev.lemma == 3 and dev.gain > 0
        assert dev.foc_sign_infeasible

    def test_lemma3_asymmetric_equilibrium_has_no_deviation(self):
        # SP2 serves AB alone at this equilibrium
        cfg = MarketConfig(0.5, 0.2, 0.3, 0.2)
        eq = solve_numeric(cfg)
        assert eq.regime is Regime.SP2_IN_OVERLAP
        assert lemma_deviation(eq.alloc, cfg) is None

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.01, 0.49), st.floats(0.01, 0.999))
    def test_lemma3_sign_claim_below_threshold(self, m, frac):
        cfg = MarketConfig(m, 1 - 2 * m, m, frac * m / 2)
        u, a, _ = lemma3_foc_solution(cfg, 1)
        assert u * a < 0

    def test_degenerate_sizes_not_applicable(self):
        with pytest.raises(NotApplicableError):
            lemma_deviation(Allocation(), MarketConfig(0.5, 0.0, 0.5, 0.3))
