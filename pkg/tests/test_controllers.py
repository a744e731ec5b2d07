import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.optimize import brentq

from remshare.controllers import (LSA_GAMMA_DB, SchemeConfig, calibrate_margin,
                                  cbrs_gaa_power, cbrs_pal_protection_area,
                                  dynamic_update, lsa_allowed_rx_dbm,
                                  lsa_max_power_at_point, lsa_static_power,
                                  scale_per_10mhz_to_bandwidth, solve_beta)
from remshare.errors import ConfigurationError, SolverError
from remshare.link import SHANNON, NoiseModel, RateMapper, thermal_noise_power_dbm
from remshare.optim import SUM_POWER
from remshare.propagation import coupling_gain, pathloss_db
from remshare.rem import BetaReport
from remshare.scenario import PAL_AREA, BsConfig, ProtectionGeometry

from conftest import square_scenario


class TestBeltFormula:
    def test_direct_substitution(self):
        val = lsa_max_power_at_point(-3.0, 20e6, 0.0, 100.0)
        assert val == pytest.approx(2.01, abs=5e-3)

    def test_affine_in_margin(self):
        a = lsa_max_power_at_point(-3.0, 20e6, 0.0, 87.0)
        b = lsa_max_power_at_point(-13.0, 20e6, 0.0, 87.0)
        assert b - a == pytest.approx(10.0, abs=1e-12)

    def test_degenerate_one_hertz(self):
        assert lsa_max_power_at_point(0.0, 1.0, 0.0, 0.0) == -174.0

    def test_gamma_minus_three_reproduces_noise_plus_three_rule(self):
        """The two code paths must agree algebraically: allowed RX level at
        margin -3 dB equals thermal noise + 3 dB for any bandwidth."""
        rng = np.random.default_rng(0)
        for _ in range(100):
            b = float(rng.uniform(1e3, 100e6))
            lhs = lsa_allowed_rx_dbm(-3.0, b)
            rhs = thermal_noise_power_dbm(NoiseModel(b)) + 3.0
            assert lhs == pytest.approx(rhs, abs=1e-12)
        assert LSA_GAMMA_DB == -3.0

    def test_random_inputs_match_hand_formula(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            g = float(rng.uniform(-60, 0))
            b = float(rng.uniform(1e4, 1e8))
            gt = float(rng.uniform(-5, 15))
            pl = float(rng.uniform(30, 150))
            expected = -174.0 + 10.0 * math.log10(b) - g - gt + pl
            assert lsa_max_power_at_point(g, b, gt, pl) == pytest.approx(expected, abs=1e-9)


class TestBeltPower:
    def test_power_cap_applies(self, model):
        bs = BsConfig(9, (15.0, 15.0, 3.0), 21.0, 0.0, "indoor")
        belt = ProtectionGeometry(points=np.array([[1000.0, 1000.0]]), kind="full_belt")
        assert lsa_static_power(belt, bs, -3.0, model, 20e6) == 21.0

    def test_min_over_points(self, model):
        bs = BsConfig(9, (15.0, 15.0, 3.0), 50.0, 0.0, "indoor")
        pts = np.array([[18.0, 15.0], [25.0, 15.0], [200.0, 15.0]])
        belt = ProtectionGeometry(points=pts, kind="full_belt")
        per_point = [
            lsa_max_power_at_point(-3.0, 20e6, 0.0,
                                   pathloss_db(model, bs.position, (p[0], p[1], 1.5)))
            for p in pts
        ]
        got = lsa_static_power(belt, bs, -3.0, model, 20e6)
        assert got == pytest.approx(min(50.0, min(per_point)), abs=1e-12)

    def test_adding_points_never_increases_power(self, model):
        rng = np.random.default_rng(3)
        bs = BsConfig(9, (15.0, 15.0, 3.0), 40.0, 0.0, "indoor")
        for _ in range(100):
            pts = np.c_[rng.uniform(0, 40, 8), rng.uniform(0, 40, 8)]
            subset = ProtectionGeometry(points=pts[:4], kind="full_belt")
            superset = ProtectionGeometry(points=pts, kind="full_belt")
            p_sub = lsa_static_power(subset, bs, -10.0, model, 20e6)
            p_sup = lsa_static_power(superset, bs, -10.0, model, 20e6)
            assert p_sup <= p_sub + 1e-12


class TestCbrs:
    def test_threshold_scaling_matches_bandwidth(self):
        assert scale_per_10mhz_to_bandwidth(-96.0, 20e6) == pytest.approx(-92.99, abs=5e-3)
        assert scale_per_10mhz_to_bandwidth(-80.0, 20e6) == pytest.approx(-76.99, abs=5e-3)

    def test_quiet_transmitters_give_empty_area(self, model):
        sc = square_scenario()
        quiet = sc.outdoor_bs[0]
        object.__setattr__(quiet, "max_power_dbm", -300.0)
        area = cbrs_pal_protection_area(sc, 5.0, model_for(sc), -96.0)
        assert area is None

    def test_threshold_minus_infinity_covers_grid(self, scenario, model):
        area = cbrs_pal_protection_area(scenario, 10.0, model, -1e9)
        xs = np.arange(5.0, scenario.area_width_m, 10.0)
        ys = np.arange(5.0, scenario.area_height_m, 10.0)
        assert len(area) == len(xs) * len(ys)

    def test_area_shrinks_and_nests_as_threshold_rises(self, scenario, model):
        prev = None
        for thr in (-120.0, -105.0, -96.0, -88.0):
            area = cbrs_pal_protection_area(scenario, 10.0, model, thr)
            pts = set(map(tuple, area.points)) if area is not None else set()
            if prev is not None:
                assert pts <= prev
            prev = pts

    def test_unconstrained_gaa_at_full_power(self, scenario, model):
        alloc = cbrs_gaa_power(None, scenario.indoor_bs, model, -80.0, 20e6)
        assert np.allclose(alloc.p_tx_mw, [bs.max_power_mw for bs in scenario.indoor_bs])

    def test_allocation_feasible_at_every_grid_point(self, scenario, model):
        area = cbrs_pal_protection_area(scenario, 10.0, model, -96.0)
        alloc = cbrs_gaa_power(area, scenario.indoor_bs, model, -80.0,
                               scenario.bandwidth_hz)
        limit_mw = 10 ** (scale_per_10mhz_to_bandwidth(-80.0, scenario.bandwidth_hz) / 10.0)
        from remshare.propagation import build_coupling_matrix
        w = build_coupling_matrix(model, area.points, scenario.indoor_bs).w
        assert np.all(w @ alloc.p_tx_mw <= limit_mw * (1 + 1e-9) + 1e-9)

    def test_single_victim_point_closed_form(self, model, scenario):
        """1-D oracle: with one dominant coupling, the binding BS power is
        limit/W minus the far BSs' leakage."""
        bs_near = scenario.indoor_bs[0]
        point = (bs_near.position[0], bs_near.position[1] - 12.0)
        area = ProtectionGeometry(points=np.array([point]), kind=PAL_AREA)
        alloc = cbrs_gaa_power(area, scenario.indoor_bs, model, -80.0, 20e6)
        limit_mw = 10 ** (scale_per_10mhz_to_bandwidth(-80.0, 20e6) / 10.0)
        w = np.array([
            coupling_gain(pathloss_db(model, bs.position, (point[0], point[1], 1.5)),
                          bs.antenna_gain_dbi, 0.0)
            for bs in scenario.indoor_bs
        ])
        # cumulative constraint holds with near-equality (sum-power maximizes)
        assert w @ alloc.p_tx_mw <= limit_mw * (1 + 1e-9) + 1e-12
        assert w @ alloc.p_tx_mw >= limit_mw * (1 - 1e-6) or np.allclose(
            alloc.p_tx_mw, [bs.max_power_mw for bs in scenario.indoor_bs])


def model_for(sc):
    from remshare.propagation import PathlossModel
    return PathlossModel.default(sc.carrier_hz, sc.polygon)


class TestSolveBeta:
    def test_shannon_worked_example_against_bisection_oracle(self, table):
        """rate(beta) = log2(1 + 10/(1 + 0.1*beta)); target 90% of log2(11)."""
        mapper = RateMapper(table=table, mode=SHANNON)
        got_db = solve_beta([10.0], [1.0], [0.0], [0.1], 90.0, mapper)

        def gap(beta):
            return (math.log2(1 + 10 / (1 + 0.1 * beta)) - 0.9 * math.log2(11.0))

        beta_star = brentq(gap, 1e-9, 1e6, xtol=1e-12)
        assert 10 * math.log10(beta_star) == pytest.approx(4.862, abs=2e-3)
        assert got_db == pytest.approx(10 * math.log10(beta_star), abs=0.011)

    def test_psi_100_with_degrading_interference_needs_reduction(self, mapper, table):
        # current external interference already pushed the RB one CQI step
        # below its interference-free value; keeping 100% of the rate forces
        # the multiplier below 1
        thr = table.min_sinr_linear[7]
        s = thr * 1.01
        i_out = 0.05  # s/(1+i_out) < thr: step already lost at beta = 1
        beta_db = solve_beta([s], [1.0], [0.0], [i_out], 100.0, mapper)
        assert beta_db < 0.0

    def test_interference_exactly_at_target_boundary(self, mapper):
        rng = np.random.default_rng(8)
        s = rng.lognormal(-18, 1.0, 24)
        base = rng.lognormal(-24, 0.5, 24)
        i0 = rng.lognormal(-25, 1.0, 24)
        first = solve_beta(s, base * 0.4, base * 0.6, i0, 90.0, mapper)
        scaled = i0 * 10 ** (first / 10.0)
        second = solve_beta(s, base * 0.4, base * 0.6, scaled, 90.0, mapper)
        assert abs(second) <= 0.02  # boundary report sits at ~0 dB

    def test_no_external_interference_reports_cap(self, mapper):
        assert solve_beta([1.0], [0.1], [0.0], [0.0], 90.0, mapper) == pytest.approx(60.0)

    def test_rateless_ue_reports_cap(self, mapper):
        assert solve_beta([0.0], [1.0], [0.0], [0.1], 90.0, mapper) == pytest.approx(60.0)

    def test_feasibility_of_returned_beta(self, mapper):
        rng = np.random.default_rng(12)
        for _ in range(200):
            n = 16
            s = rng.lognormal(-18, 2, n)
            base = rng.lognormal(-24, 2, n)
            i_out = rng.lognormal(-25, 3, n) * (rng.random(n) < 0.8)
            psi = float(rng.uniform(50, 100))
            beta_db = solve_beta(s, base, np.zeros(n), i_out, psi, mapper)
            beta = 10 ** (beta_db / 10)
            r0 = mapper.full_band_rate(s / base)
            r_at = mapper.full_band_rate(s / (base + beta * i_out))
            assert r_at >= psi / 100 * r0 - 1e-9
            if beta_db < 59.0:  # below cap the solution is maximal
                r_above = mapper.full_band_rate(s / (base + beta * 1.01 * i_out))
                assert r_above < psi / 100 * r0


class TestDynamicUpdate:
    def make_reports(self, pts, betas):
        return [BetaReport(i, float(x), float(y), float(b), 0)
                for i, ((x, y), b) in enumerate(zip(pts, betas))]

    def test_zero_change_reports_reach_fixed_point(self, scenario, model):
        pts = [(30.0, 50.0), (50.0, 52.0), (70.0, 50.0)]
        from remshare.propagation import build_coupling_matrix
        w = build_coupling_matrix(model, np.array(pts), scenario.indoor_bs).w
        current = np.array([20.0, 40.0, 60.0, 80.0, 100.0])
        reports = self.make_reports(pts, [0.0, 0.0, 0.0])
        alloc = dynamic_update(reports, current, model, SUM_POWER,
                               scenario.indoor_bs, 1e-10)
        est_old = w @ current
        est_new = w @ alloc.p_tx_mw
        assert np.all(est_new <= est_old * (1 + 1e-9) + 1e-15)
        # interference budget is exhausted at the reported points
        assert np.any(est_new >= est_old * (1 - 1e-6))

    def test_exact_fixed_point_on_square_system(self, model, scenario):
        """With as many independent reports as BSs, zero-change reports keep
        the estimated interference identical."""
        bs3 = scenario.indoor_bs[:3]
        pts = [(bs.position[0], 55.0) for bs in bs3]
        # well-conditioned square coupling; reports right under each BS column
        from remshare.propagation import build_coupling_matrix
        w = build_coupling_matrix(model, np.array(pts), bs3).w
        current = np.array([5.0, 7.0, 9.0])
        reports = self.make_reports(pts, [0.0, 0.0, 0.0])
        alloc = dynamic_update(reports, current, model, SUM_POWER, bs3, 1e-10)
        assert np.allclose(w @ alloc.p_tx_mw, w @ current, rtol=1e-7)

    def test_plus_ten_db_reports_raise_binding_interference_ten_db(self, scenario, model):
        rng = np.random.default_rng(7)
        from remshare.propagation import build_coupling_matrix
        for _ in range(10):
            pts = np.c_[rng.uniform(10, 90, 4), rng.uniform(36, 56, 4)]
            w = build_coupling_matrix(model, pts, scenario.indoor_bs).w
            current = rng.uniform(1.0, 20.0, 5)
            reports = self.make_reports(pts, [10.0] * 4)
            alloc = dynamic_update(reports, current, model, SUM_POWER,
                                   scenario.indoor_bs, 1e-10)
            est_old = w @ current
            est_new = w @ alloc.p_tx_mw
            binding = est_new >= 10.0 * est_old * (1 - 1e-6)
            assert np.all(est_new <= 10.0 * est_old * (1 + 1e-9))
            assert np.any(binding)

    def test_strongly_negative_reports_silence_network(self, scenario, model):
        pts = [(30.0, 50.0)]
        reports = self.make_reports(pts, [-200.0])
        current = np.full(5, 100.0)
        alloc = dynamic_update(reports, current, model, SUM_POWER,
                               scenario.indoor_bs, 1e-10)
        assert np.all(alloc.p_tx_mw <= 1e-6)

    def test_solver_failure_keeps_previous_allocation(self, scenario, model, monkeypatch):
        import remshare.controllers as ctrl

        def boom(problem):
            raise SolverError("synthetic failure")

        monkeypatch.setattr(ctrl, "solve_power_problem", boom)
        current = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        reports = self.make_reports([(30.0, 50.0)], [0.0])
        alloc = ctrl.dynamic_update(reports, current, model, SUM_POWER,
                                    scenario.indoor_bs, 1e-10)
        assert np.array_equal(alloc.p_tx_mw, current)
        assert alloc.solver_status == "fallback"

    def test_requires_reports(self, scenario, model):
        with pytest.raises(ConfigurationError):
            dynamic_update([], np.zeros(5), model, SUM_POWER, scenario.indoor_bs, 1e-10)


def fake_summary(p10, power=1.0, indoor_rate=5e6):
    return SimpleNamespace(
        outdoor=SimpleNamespace(p10_rate_bps=p10, mean_rate_bps=p10),
        indoor=SimpleNamespace(p10_rate_bps=indoor_rate, mean_rate_bps=indoor_rate),
        mean_indoor_bs_power_mw=power,
    )


class TestCalibration:
    def test_most_permissive_margin_meeting_target(self):
        degradations = {-40.0: 0.30, -30.0: 0.15, -20.0: 0.08, -10.0: 0.02}

        def simulate(gamma):
            if gamma is None:
                return fake_summary(10e6)
            return fake_summary(10e6 * (1 - degradations[gamma]))

        result = calibrate_margin(simulate, [-40, -30, -20, -10], 0.10)
        assert result.margin.gamma_db == -20.0
        assert result.met_target
        assert [r.gamma_db for r in result.rows] == [-40.0, -30.0, -20.0, -10.0]

    def test_perfect_isolation_returns_most_permissive(self):
        def simulate(gamma):
            return fake_summary(10e6)

        result = calibrate_margin(simulate, [-40, -30, -20], 0.10)
        assert result.margin.gamma_db == -40.0

    def test_no_margin_meets_target(self):
        def simulate(gamma):
            if gamma is None:
                return fake_summary(10e6)
            return fake_summary(5e6)

        result = calibrate_margin(simulate, [-40, -30], 0.10)
        assert result.margin.gamma_db == -30.0
        assert not result.met_target

    def test_rejects_empty_sweep(self):
        with pytest.raises(ConfigurationError):
            calibrate_margin(lambda g: fake_summary(1.0), [], 0.1)


class TestSchemeConfig:
    def test_unknown_scheme_rejected(self):
        with pytest.raises(ConfigurationError):
            SchemeConfig(scheme="bogus")

    def test_psi_bounds(self):
        with pytest.raises(ConfigurationError):
            SchemeConfig(psi_percent=0.0)
        with pytest.raises(ConfigurationError):
            SchemeConfig(psi_percent=101.0)
