import itertools

import numpy as np
import pytest
from scipy.optimize import nnls

from remshare.errors import ConfigurationError, SolverError
from remshare.optim import (LOG_SUM, MAX_MIN, SUM_POWER, PowerProblem,
                            brute_force_power_oracle, dump_problem, load_problem,
                            solve_log_sum, solve_max_min, solve_power_problem,
                            solve_sum_power)


def vertex_enumeration_oracle(w, i_max, p_max):
    """Independent LP oracle for 2 variables: enumerate constraint-pair
    intersections, keep feasible ones, maximize the power sum."""
    w = np.asarray(w, dtype=float)
    rows = [(row, b) for row, b in zip(w, i_max)]
    rows += [(np.array([1.0, 0.0]), p_max), (np.array([0.0, 1.0]), p_max),
             (np.array([-1.0, 0.0]), 0.0), (np.array([0.0, -1.0]), 0.0)]
    best = -np.inf
    pts = []
    for (a1, b1), (a2, b2) in itertools.combinations(rows, 2):
        mat = np.array([a1, a2])
        if abs(np.linalg.det(mat)) < 1e-12:
            continue
        p = np.linalg.solve(mat, [b1, b2])
        feasible = (np.all(w @ p <= np.asarray(i_max) + 1e-9)
                    and np.all(p >= -1e-9) and np.all(p <= p_max + 1e-9))
        if feasible:
            pts.append(p)
            best = max(best, p.sum())
    return best, pts


def random_problem(rng, goal=SUM_POWER, n_max=3, m_max=10):
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    w = rng.uniform(0.0, 2.0, (m, n)) * (rng.random((m, n)) < 0.85)
    i_max = rng.uniform(0.05, 3.0, m)
    p_max = float(rng.uniform(0.5, 5.0))
    return PowerProblem(w=w, i_max_mw=i_max, p_max_mw=p_max, goal=goal)


class TestSumPower:
    def test_degenerate_face_lexicographic_tiebreak(self):
        prob = PowerProblem(w=[[1.0, 1.0]], i_max_mw=[1.0], p_max_mw=125.9)
        alloc = solve_sum_power(prob)
        assert alloc.objective_value == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(alloc.p_tx_mw, [0.0, 1.0], atol=1e-9)
        best, _ = vertex_enumeration_oracle([[1.0, 1.0]], [1.0], 125.9)
        assert alloc.objective_value == pytest.approx(best, abs=1e-9)

    def test_box_only_binding(self):
        prob = PowerProblem(w=[[1e-9, 1e-9]], i_max_mw=[1e6], p_max_mw=125.9)
        assert np.allclose(solve_sum_power(prob).p_tx_mw, [125.9, 125.9], rtol=1e-9)

    def test_zero_interference_budget(self):
        prob = PowerProblem(w=[[1.0, 1.0]], i_max_mw=[0.0], p_max_mw=125.9)
        assert np.allclose(solve_sum_power(prob).p_tx_mw, 0.0, atol=1e-12)

    def test_negative_budget_rejected(self):
        with pytest.raises(ConfigurationError):
            PowerProblem(w=[[1.0]], i_max_mw=[-0.1], p_max_mw=1.0)


class TestMaxMin:
    def test_symmetric_split(self):
        prob = PowerProblem(w=[[1.0, 1.0]], i_max_mw=[1.0], p_max_mw=125.9, goal=MAX_MIN)
        alloc = solve_max_min(prob)
        assert np.allclose(alloc.p_tx_mw, [0.5, 0.5], atol=1e-9)

    def test_second_stage_spends_slack(self):
        prob = PowerProblem(w=[[1.0, 0.0], [0.0, 1.0]], i_max_mw=[1.0, 2.0],
                            p_max_mw=125.9, goal=MAX_MIN)
        alloc = solve_max_min(prob)
        assert alloc.objective_value == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(alloc.p_tx_mw, [1.0, 2.0], atol=1e-9)

    def test_unconstrained_hits_cap(self):
        prob = PowerProblem(w=[[1e-9, 1e-9, 1e-9]], i_max_mw=[1e9], p_max_mw=7.0,
                            goal=MAX_MIN)
        assert np.allclose(solve_max_min(prob).p_tx_mw, 7.0, rtol=1e-9)


class TestLogSum:
    def test_symmetric_split(self):
        prob = PowerProblem(w=[[1.0, 1.0]], i_max_mw=[1.0], p_max_mw=125.9, goal=LOG_SUM)
        assert np.allclose(solve_log_sum(prob).p_tx_mw, [0.5, 0.5], atol=1e-7)

    def test_single_variable_binding(self):
        prob = PowerProblem(w=[[1.0]], i_max_mw=[0.3], p_max_mw=125.9, goal=LOG_SUM)
        assert solve_log_sum(prob).p_tx_mw[0] == pytest.approx(0.3, abs=1e-7)

    def test_matches_grid_oracle_on_seeded_instances(self):
        rng = np.random.default_rng(77)
        for _ in range(20):
            prob = random_problem(rng, goal=LOG_SUM)
            alloc = solve_log_sum(prob)
            oracle = brute_force_power_oracle(prob, 150)
            assert alloc.is_feasible(prob)
            assert alloc.objective_value >= oracle.objective_value - 1e-7

    def test_first_order_stationarity(self):
        """KKT residual via non-negative least squares on active constraints."""
        rng = np.random.default_rng(5)
        for _ in range(20):
            prob = random_problem(rng, goal=LOG_SUM)
            p = solve_log_sum(prob).p_tx_mw
            g = 1.0 / (1.0 + p)
            cols = []
            slack = prob.i_max_mw - prob.w @ p
            scale = np.maximum(prob.i_max_mw, 1e-12)
            for n in np.flatnonzero(slack <= 1e-6 * scale + 1e-12):
                cols.append(prob.w[n])
            for i in range(prob.n_bs):
                if p[i] >= prob.p_max_mw * (1 - 1e-7):
                    e = np.zeros(prob.n_bs); e[i] = 1.0
                    cols.append(e)
                if p[i] <= prob.p_max_mw * 1e-7:
                    e = np.zeros(prob.n_bs); e[i] = -1.0
                    cols.append(e)
            if cols:
                _, resid = nnls(np.array(cols).T, g)
            else:
                resid = np.linalg.norm(g)
            assert resid <= 1e-6 * max(1.0, np.linalg.norm(g))


class TestCrossSolverProperties:
    def test_objective_orderings(self):
        rng = np.random.default_rng(13)
        for _ in range(40):
            base = random_problem(rng)
            allocs = {
                SUM_POWER: solve_sum_power(base),
                MAX_MIN: solve_max_min(base),
                LOG_SUM: solve_log_sum(base),
            }
            sums = {k: a.p_tx_mw.sum() for k, a in allocs.items()}
            mins = {k: a.p_tx_mw.min() for k, a in allocs.items()}
            assert sums[SUM_POWER] >= max(sums.values()) - 1e-7
            assert mins[MAX_MIN] >= max(mins.values()) - 1e-7

    def test_row_scaling_invariance(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            prob = random_problem(rng)
            c = rng.uniform(0.1, 10.0, prob.w.shape[0])
            scaled = PowerProblem(w=prob.w * c[:, None], i_max_mw=prob.i_max_mw * c,
                                  p_max_mw=prob.p_max_mw, goal=prob.goal)
            for solver in (solve_sum_power, solve_max_min, solve_log_sum):
                a = solver(prob).objective_value
                b = solver(scaled).objective_value
                assert b == pytest.approx(a, rel=1e-6, abs=1e-9)

    def test_sum_power_turns_bs_off_while_max_min_keeps_all_on(self):
        prob = PowerProblem(w=[[1.0, 0.01]], i_max_mw=[1.0], p_max_mw=125.9)
        sp = solve_sum_power(prob)
        assert np.min(sp.p_tx_mw) <= 1e-9  # at least one BS silent
        mm = solve_max_min(PowerProblem(w=[[1.0, 0.01]], i_max_mw=[1.0],
                                        p_max_mw=125.9, goal=MAX_MIN))
        assert np.all(mm.p_tx_mw > 1e-3)

    def test_symmetric_instance_equal_splits_for_max_min_and_log_sum(self):
        prob_mm = PowerProblem(w=[[1.0, 1.0, 1.0]], i_max_mw=[2.4], p_max_mw=50.0,
                               goal=MAX_MIN)
        prob_ls = PowerProblem(w=[[1.0, 1.0, 1.0]], i_max_mw=[2.4], p_max_mw=50.0,
                               goal=LOG_SUM)
        mm = solve_max_min(prob_mm).p_tx_mw
        ls = solve_log_sum(prob_ls).p_tx_mw
        assert np.allclose(mm, 0.8, atol=1e-6)
        assert np.allclose(ls, 0.8, atol=1e-6)
        assert np.allclose(mm, ls, atol=1e-6)


class TestBruteForceOracle:
    def test_one_dimensional_closed_form(self):
        rng = np.random.default_rng(31)
        for _ in range(30):
            m = int(rng.integers(1, 6))
            w = rng.uniform(0.1, 2.0, (m, 1))
            i_max = rng.uniform(0.0, 3.0, m)
            p_max = float(rng.uniform(0.5, 4.0))
            prob = PowerProblem(w=w, i_max_mw=i_max, p_max_mw=p_max)
            grid = 200
            oracle = brute_force_power_oracle(prob, grid)
            analytic = min(p_max, float(np.min(i_max / w[:, 0])))
            step = p_max / (grid - 1)
            assert analytic - step <= oracle.p_tx_mw[0] <= analytic + 1e-12

    def test_zero_budget_corner(self):
        prob = PowerProblem(w=[[1.0, 1.0]], i_max_mw=[0.0], p_max_mw=2.0)
        oracle = brute_force_power_oracle(prob, 50)
        assert np.array_equal(oracle.p_tx_mw, [0.0, 0.0])

    def test_dimension_and_grid_limits(self):
        prob = PowerProblem(w=np.ones((1, 4)), i_max_mw=[1.0], p_max_mw=1.0)
        with pytest.raises(SolverError):
            brute_force_power_oracle(prob, 10)
        prob2 = PowerProblem(w=np.ones((1, 2)), i_max_mw=[1.0], p_max_mw=1.0)
        with pytest.raises(SolverError):
            brute_force_power_oracle(prob2, 500)


class TestFeasibilityContract:
    def test_all_solvers_return_feasible_points(self):
        rng = np.random.default_rng(99)
        for _ in range(60):
            for goal, solver in ((SUM_POWER, solve_sum_power),
                                 (MAX_MIN, solve_max_min),
                                 (LOG_SUM, solve_log_sum)):
                prob = random_problem(rng, goal=goal)
                alloc = solver(prob)
                assert alloc.is_feasible(prob), (goal, prob.w, prob.i_max_mw)

    def test_dispatch(self):
        prob = PowerProblem(w=[[1.0]], i_max_mw=[1.0], p_max_mw=2.0, goal=MAX_MIN)
        assert solve_power_problem(prob).p_tx_mw[0] == pytest.approx(1.0, abs=1e-9)


class TestProblemIo:
    def test_dump_load_roundtrip(self, tmp_path):
        prob = PowerProblem(w=[[0.5, 1.5], [2.0, 0.0]], i_max_mw=[1.0, 2.0],
                            p_max_mw=3.0, goal=LOG_SUM)
        path = tmp_path / "problem.json"
        dump_problem(prob, path)
        back = load_problem(path)
        assert np.array_equal(back.w, prob.w)
        assert np.array_equal(back.i_max_mw, prob.i_max_mw)
        assert back.p_max_mw == prob.p_max_mw
        assert back.goal == LOG_SUM

    def test_reject_unknown_format(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "nope"}')
        with pytest.raises(ConfigurationError):
            load_problem(path)
