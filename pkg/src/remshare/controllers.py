"""Interference-control schemes that set indoor BS transmit powers.

Two regulatory baselines (a belt-protected static rule and a CBRS-style
PAL/GAA rule) and three REM-based schemes: semi-static margin calibration on
the full belt, the same on a restricted protection area, and fully dynamic
control driven by per-UE interference reports.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, SolverError
from .link import (NARROWBAND_CQI, THERMAL_NOISE_DBM_PER_HZ, NoiseModel,
                   RateMapper, thermal_noise_power_mw)
from .optim import (GOALS, SUM_POWER, PowerAllocation, PowerProblem,
                    objective_value, solve_power_problem)
from .propagation import PathlossModel, build_coupling_matrix, pathloss_db
from .rem import BetaReport, RemStore, due_for_update
from .scenario import (PAL_AREA, ProtectionGeometry, Scenario,
                       generate_protection_belt, restrict_to_protection_area)
from .units import dbm_to_mw

log = logging.getLogger(__name__)

MODIFIED_LSA = "modified_lsa"
CBRS = "cbrs"
SEMI_STATIC = "semi_static"
SEMI_STATIC_AREA = "semi_static_area"
DYNAMIC = "dynamic"
OFF = "off"
SCHEMES = (MODIFIED_LSA, CBRS, SEMI_STATIC, SEMI_STATIC_AREA, DYNAMIC, OFF)

# I/N = -6 dB with a 9 dB receiver noise figure and 0 dBi RX gain collapses
# to an allowed RX level of thermal noise + 3 dB, i.e. a belt margin of -3 dB.
LSA_GAMMA_DB = -3.0

BETA_CAP = 1e6  # interference multiplier ceiling when nothing constrains it
BETA_FLOOR_DB = -200.0
BETA_TOL_DB = 0.01


@dataclass(frozen=True)
class ProtectionBeltMargin:
    """Margin (dB) between thermal noise and allowed per-BS interference."""

    gamma_db: float

    def __post_init__(self):
        if not (-60.0 <= self.gamma_db <= 0.0):
            log.warning("belt margin %.1f dB outside the practical 0..-60 dB range",
                        self.gamma_db)


@dataclass(frozen=True)
class SchemeConfig:
    """Parameters of one spectrum-sharing scheme run."""

    scheme: str = DYNAMIC
    gamma_db: float = LSA_GAMMA_DB  # semi-static margins; ignored by modified_lsa
    psi_percent: float = 90.0
    goal: str = SUM_POWER
    update_period_ms: int = 10
    rem_delay_ms: int = 1
    report_period_ms: int = 1
    quantizer_mode: str = "none"
    location_error_m: float = 0.0
    belt_spacing_m: float = 1.0
    belt_offset_m: float = 0.5
    cbrs_pal_threshold_dbm_per_10mhz: float = -96.0
    cbrs_interference_limit_dbm_per_10mhz: float = -80.0
    cbrs_grid_spacing_m: float = 5.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if not (0.0 < self.psi_percent <= 100.0):
            raise ConfigurationError("psi_percent must be in (0, 100]")
        if self.goal not in GOALS:
            raise ConfigurationError(f"unknown goal {self.goal!r}")
        if self.update_period_ms <= 0 or self.report_period_ms <= 0:
            raise ConfigurationError("periods must be positive")
        ProtectionBeltMargin(self.gamma_db)  # emits the range warning


# ----------------------------------------------------------------------------
# Static belt rule
# ----------------------------------------------------------------------------

def lsa_allowed_rx_dbm(gamma_db: float, bandwidth_hz: float) -> float:
    """Maximum acceptable single-BS interference at a belt point (dBm)."""
    return THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth_hz) - gamma_db


def lsa_max_power_at_point(gamma_db: float, bandwidth_hz: float,
                           g_tx_dbi: float, pl_db: float) -> float:
    """TX power cap keeping the interference at one point below the margin."""
    return lsa_allowed_rx_dbm(gamma_db, bandwidth_hz) - g_tx_dbi + pl_db


def lsa_static_power(belt: ProtectionGeometry, bs, gamma_db: float,
                     model: PathlossModel, bandwidth_hz: float,
                     rx_height_m: float = 1.5) -> float:
    """Allowed power of one indoor BS: device cap and the worst belt point."""
    best = bs.max_power_dbm
    for pt in belt.points:
        pl = pathloss_db(model, bs.position, (pt[0], pt[1], rx_height_m))
        best = min(best, lsa_max_power_at_point(gamma_db, bandwidth_hz,
                                                bs.antenna_gain_dbi, pl))
    return best


# ----------------------------------------------------------------------------
# CBRS-style PAL/GAA rule
# ----------------------------------------------------------------------------

def scale_per_10mhz_to_bandwidth(value_dbm_per_10mhz: float, bandwidth_hz: float) -> float:
    """Rescale a per-10-MHz power threshold to the system bandwidth."""
    return value_dbm_per_10mhz + 10.0 * math.log10(bandwidth_hz / 10e6)


def cbrs_pal_protection_area(scenario: Scenario, grid_spacing_m: float,
                             model: PathlossModel,
                             pal_threshold_dbm_per_10mhz: float = -96.0,
                             rx_gain_dbi: float = 0.0) -> ProtectionGeometry | None:
    """Grid points where the strongest outdoor (PAL) signal clears the
    protection threshold.  None means the whole area is unconstrained."""
    if grid_spacing_m <= 0:
        raise ConfigurationError("grid spacing must be > 0")
    thr_dbm = scale_per_10mhz_to_bandwidth(pal_threshold_dbm_per_10mhz, scenario.bandwidth_hz)
    xs = np.arange(grid_spacing_m / 2.0, scenario.area_width_m, grid_spacing_m)
    ys = np.arange(grid_spacing_m / 2.0, scenario.area_height_m, grid_spacing_m)
    pts = []
    for y in ys:
        for x in xs:
            best = -math.inf
            for bs in scenario.outdoor_bs:
                pl = pathloss_db(model, bs.position, (x, y, scenario.ue_height_m))
                best = max(best, bs.max_power_dbm + bs.antenna_gain_dbi + rx_gain_dbi - pl)
            if best > thr_dbm:
                pts.append((x, y))
    if not pts:
        log.info("PAL protection area is empty; GAA transmissions unconstrained")
        return None
    return ProtectionGeometry(points=np.array(pts), kind=PAL_AREA)


def cbrs_gaa_power(pal_area: ProtectionGeometry | None, indoor_bs_list, model: PathlossModel,
                   interference_limit_dbm_per_10mhz: float, bandwidth_hz: float,
                   rx_gain_dbi: float = 0.0, rx_height_m: float = 1.5) -> PowerAllocation:
    """Indoor powers maximizing total power under the cumulative GAA limit."""
    p_max_mw = _common_max_power_mw(indoor_bs_list)
    if pal_area is None:
        p = np.array([bs.max_power_mw for bs in indoor_bs_list])
        return PowerAllocation(p, objective_value(SUM_POWER, p), "unconstrained")
    limit_mw = dbm_to_mw(scale_per_10mhz_to_bandwidth(interference_limit_dbm_per_10mhz,
                                                      bandwidth_hz))
    coupling = build_coupling_matrix(model, pal_area.points, indoor_bs_list,
                                     rx_gain_dbi=rx_gain_dbi, rx_height_m=rx_height_m)
    problem = PowerProblem(w=coupling.w,
                           i_max_mw=np.full(len(pal_area), limit_mw),
                           p_max_mw=p_max_mw, goal=SUM_POWER)
    return solve_power_problem(problem)


def _common_max_power_mw(bs_list) -> float:
    caps = {bs.max_power_dbm for bs in bs_list}
    if len(caps) > 1:
        log.warning("indoor BSs have differing power caps; using the smallest")
    return dbm_to_mw(min(caps))


# ----------------------------------------------------------------------------
# Interference reports (dynamic scheme)
# ----------------------------------------------------------------------------

def solve_beta(s, sigma2, i_in, i_out, psi_percent: float, mapper: RateMapper,
               is_5g: bool = False) -> float:
    """Largest interference multiplier (dB) keeping psi percent of the
    interference-free rate.

    The rate is non-increasing in the multiplier, so the feasible set is an
    interval [0, beta*].  In narrowband-CQI mode the rate is a step function
    and beta* sits exactly on a CQI switching point, located by walking the
    sorted per-RB breakpoints; in Shannon mode beta* is found by doubling and
    bisection to 0.01 dB.  With no external interference (or no rate to
    protect) the cap is reported: interference may grow freely.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    i_in = np.broadcast_to(np.asarray(i_in, dtype=float), s.shape)
    i_out = np.broadcast_to(np.asarray(i_out, dtype=float), s.shape)
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), s.shape)
    base = sigma2 + i_in
    cap_db = 10.0 * math.log10(BETA_CAP)
    if mapper.mode == NARROWBAND_CQI:
        return _solve_beta_breakpoints(s, base, i_out, psi_percent, mapper.table, cap_db)
    return _solve_beta_bisection(s, base, i_out, psi_percent, mapper, is_5g, cap_db)


def _solve_beta_breakpoints(s, base, i_out, psi_percent, table, cap_db) -> float:
    """Exact supremum for the step-function rate.

    RB r drops from CQI k to k-1 once beta exceeds (s_r/thr_k - base_r)/i_r;
    sorting all such events and accumulating the efficiency losses yields the
    exact largest beta that keeps the summed efficiency at target.
    """
    thr = table.min_sinr_linear
    eff = table.efficiency_by_cqi
    cqi0 = np.searchsorted(thr, s / base, side="right")
    r0 = float(eff[cqi0].sum())
    if r0 <= 0.0 or not np.any(i_out > 0):
        return cap_db
    target = psi_percent / 100.0 * r0
    active = np.flatnonzero((i_out > 0) & (cqi0 > 0))
    if active.size == 0:
        return cap_db
    cqi_cap = np.searchsorted(thr, s / (base + BETA_CAP * i_out), side="right")
    if float(eff[cqi_cap].sum()) >= target:
        return cap_db
    lens = cqi0[active]
    total = int(lens.sum())
    rb = np.repeat(active, lens)
    starts = np.concatenate(([0], np.cumsum(lens)))[:-1]
    k = np.arange(total) - np.repeat(starts, lens) + 1  # CQI level being lost
    beta_evt = np.maximum((s[rb] / thr[k - 1] - base[rb]) / i_out[rb], 0.0)
    drops = eff[k] - eff[k - 1]
    # events beyond the cap cannot fire; pruning them shortens the sort
    within = beta_evt < BETA_CAP
    beta_evt = beta_evt[within]
    drops = drops[within]
    rate_floor = r0 - float(drops.sum())
    if rate_floor >= target:
        return cap_db
    order = np.argsort(beta_evt, kind="stable")
    beta_sorted = beta_evt[order]
    rate_after = r0 - np.cumsum(drops[order])
    viol = np.flatnonzero(rate_after < target - 1e-12 * max(1.0, target))
    if viol.size == 0:
        return cap_db
    beta_star = float(beta_sorted[viol[0]])
    if beta_star >= BETA_CAP:
        return cap_db
    if beta_star <= 0.0:
        return BETA_FLOOR_DB
    # the supremum sits exactly on a CQI switching point; back off one part
    # in 1e9 (far inside the 0.01 dB tolerance) so re-evaluating the SINR
    # there cannot round across the threshold
    beta_star *= 1.0 - 1e-9
    if float(eff[np.searchsorted(thr, s / (base + beta_star * i_out), side="right")].sum()) < target:
        beta_star *= 1.0 - 1e-6
    return 10.0 * math.log10(beta_star)


def _solve_beta_bisection(s, base, i_out, psi_percent, mapper, is_5g, cap_db) -> float:
    r0 = mapper.full_band_rate(s / base, is_5g)
    if r0 <= 0.0 or not np.any(i_out > 0):
        return cap_db
    target = psi_percent / 100.0 * r0

    def rate(beta: float) -> float:
        return mapper.full_band_rate(s / (base + beta * i_out), is_5g)

    if rate(BETA_CAP) >= target:
        return cap_db
    lo, hi = 0.0, 1.0
    while rate(hi) >= target:
        lo = hi
        hi *= 2.0
        if hi >= BETA_CAP:
            hi = BETA_CAP
            break
    ratio = 10.0 ** (BETA_TOL_DB / 10.0)
    for _ in range(500):
        if lo > 0.0 and hi <= lo * ratio:
            break
        if lo == 0.0 and hi <= 1e-20:
            break
        mid = math.sqrt(lo * hi) if lo > 0.0 else hi / 2.0
        if rate(mid) >= target:
            lo = mid
        else:
            hi = mid
    if lo <= 0.0:
        return BETA_FLOOR_DB
    return 10.0 * math.log10(lo)


def dynamic_update(reports: list[BetaReport], current_p_mw: np.ndarray,
                   model: PathlossModel, goal: str, indoor_bs_list,
                   fallback_interference_mw: float,
                   rx_gain_dbi: float = 0.0, rx_height_m: float = 1.5) -> PowerAllocation:
    """One closed-loop power update from the visible interference reports.

    The coupling matrix is rebuilt from the reported locations through the
    assumed pathloss model; each report scales the interference estimated at
    its location by beta.  Locations with no current estimated interference
    fall back to scaling the thermal noise floor, so an all-zero allocation
    can recover.  Solver failures keep the previous powers (fail-safe).
    """
    if not reports:
        raise ConfigurationError("dynamic update needs at least one report")
    current_p_mw = np.asarray(current_p_mw, dtype=float)
    pts = np.array([[r.x, r.y] for r in reports])
    coupling = build_coupling_matrix(model, pts, indoor_bs_list,
                                     rx_gain_dbi=rx_gain_dbi, rx_height_m=rx_height_m)
    est = coupling.w @ current_p_mw
    beta_lin = np.array([10.0 ** (r.beta_db / 10.0) for r in reports])
    i_max = np.where(est > 0.0, beta_lin * est, beta_lin * fallback_interference_mw)
    problem = PowerProblem(w=coupling.w, i_max_mw=i_max,
                           p_max_mw=_common_max_power_mw(indoor_bs_list), goal=goal)
    try:
        return solve_power_problem(problem)
    except SolverError as exc:
        log.warning("power update failed (%s); keeping previous allocation", exc)
        return PowerAllocation(current_p_mw, objective_value(goal, current_p_mw), "fallback")


# ----------------------------------------------------------------------------
# Margin calibration (semi-static schemes)
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    gamma_db: float
    outdoor_p10_bps: float
    degradation: float
    mean_indoor_power_mw: float
    mean_indoor_rate_bps: float


@dataclass(frozen=True)
class CalibrationResult:
    margin: ProtectionBeltMargin
    baseline_p10_bps: float
    rows: tuple[SweepRow, ...]
    met_target: bool


def calibrate_margin(simulate, gammas, degradation_target: float = 0.10) -> CalibrationResult:
    """Pick the most permissive margin whose outdoor degradation meets target.

    ``simulate(gamma_db)`` runs a campaign and returns its metrics summary;
    ``simulate(None)`` runs the indoor-off baseline.  Margins are swept in
    ascending order; the first (most negative, highest indoor power) margin
    whose 10th-percentile outdoor degradation is within the target wins.  If
    none qualifies the strictest margin is returned with a warning.
    """
    gammas = sorted(float(g) for g in gammas)
    if not gammas:
        raise ConfigurationError("margin sweep needs at least one candidate")
    if not (0.0 < degradation_target < 1.0):
        raise ConfigurationError("degradation target must be in (0, 1)")
    baseline = simulate(None)
    base_p10 = baseline.outdoor.p10_rate_bps
    rows = []
    chosen = None
    for g in gammas:
        summary = simulate(g)
        p10 = summary.outdoor.p10_rate_bps
        degradation = 1.0 - p10 / base_p10 if base_p10 > 0 else 0.0
        rows.append(SweepRow(g, p10, degradation,
                             summary.mean_indoor_bs_power_mw,
                             summary.indoor.mean_rate_bps))
        if chosen is None and degradation <= degradation_target:
            chosen = g
    met = chosen is not None
    if not met:
        chosen = gammas[-1]
        log.warning("no swept margin meets the %.0f%% degradation target; "
                    "returning the strictest candidate %.1f dB",
                    100 * degradation_target, chosen)
    return CalibrationResult(ProtectionBeltMargin(chosen), base_p10, tuple(rows), met)


# ----------------------------------------------------------------------------
# Engine-facing controllers
# ----------------------------------------------------------------------------

class PowerController:
    """Sets indoor BS total powers; one instance per simulation iteration."""

    emits_reports = False

    def initial_powers_mw(self) -> np.ndarray:
        raise NotImplementedError

    def update(self, store: RemStore, now_ms: int) -> np.ndarray | None:
        """Return new powers if an update fired at this tick, else None."""
        return None


class OffController(PowerController):
    def __init__(self, n_indoor: int):
        self.n_indoor = n_indoor

    def initial_powers_mw(self) -> np.ndarray:
        return np.zeros(self.n_indoor)


# Static allocations are pure functions of (scenario, model, scheme); they are
# memoized by value so Monte Carlo iterations do not recompute belts and PAL
# grids.
_STATIC_POWER_CACHE: dict = {}


def _static_cache_key(scenario: Scenario, model: PathlossModel, cfg: SchemeConfig):
    return (scenario.building, scenario.outdoor_region, scenario.bandwidth_hz,
            scenario.carrier_hz, scenario.ue_height_m,
            tuple((bs.id, bs.position, bs.max_power_dbm, bs.antenna_gain_dbi)
                  for bs in scenario.all_bs),
            model.outdoor_to_outdoor, model.indoor_to_indoor, model.cross_wall,
            cfg)


class StaticBeltController(PowerController):
    """Belt-protected static powers (regulatory or calibrated margin)."""

    def __init__(self, scenario: Scenario, model: PathlossModel, cfg: SchemeConfig):
        key = ("belt", _static_cache_key(scenario, model, cfg))
        powers = _STATIC_POWER_CACHE.get(key)
        if powers is None:
            gamma = LSA_GAMMA_DB if cfg.scheme == MODIFIED_LSA else cfg.gamma_db
            belt = generate_protection_belt(scenario, cfg.belt_spacing_m, cfg.belt_offset_m)
            if cfg.scheme == SEMI_STATIC_AREA:
                belt = restrict_to_protection_area(belt, scenario.outdoor_region)
            powers = np.array([
                dbm_to_mw(lsa_static_power(belt, bs, gamma, model, scenario.bandwidth_hz,
                                           scenario.ue_height_m))
                for bs in scenario.indoor_bs
            ])
            _STATIC_POWER_CACHE[key] = powers
        self._powers = powers

    def initial_powers_mw(self) -> np.ndarray:
        return self._powers.copy()


class CbrsController(PowerController):
    def __init__(self, scenario: Scenario, model: PathlossModel, cfg: SchemeConfig):
        key = ("cbrs", _static_cache_key(scenario, model, cfg))
        powers = _STATIC_POWER_CACHE.get(key)
        if powers is None:
            area = cbrs_pal_protection_area(scenario, cfg.cbrs_grid_spacing_m, model,
                                            cfg.cbrs_pal_threshold_dbm_per_10mhz)
            alloc = cbrs_gaa_power(area, scenario.indoor_bs, model,
                                   cfg.cbrs_interference_limit_dbm_per_10mhz,
                                   scenario.bandwidth_hz, rx_height_m=scenario.ue_height_m)
            powers = np.minimum(alloc.p_tx_mw,
                                np.array([bs.max_power_mw for bs in scenario.indoor_bs]))
            _STATIC_POWER_CACHE[key] = powers
        self._powers = powers

    def initial_powers_mw(self) -> np.ndarray:
        return self._powers.copy()


class DynamicRemController(PowerController):
    """Closed-loop power control from REM interference reports."""

    emits_reports = True

    def __init__(self, scenario: Scenario, model: PathlossModel, cfg: SchemeConfig):
        self.scenario = scenario
        self.model = model
        self.cfg = cfg
        self.current = np.array([bs.max_power_mw for bs in scenario.indoor_bs])
        self.noise_floor_mw = thermal_noise_power_mw(NoiseModel(scenario.bandwidth_hz))

    def initial_powers_mw(self) -> np.ndarray:
        return self.current.copy()

    def update(self, store: RemStore, now_ms: int) -> np.ndarray | None:
        if not due_for_update(store, now_ms):
            return None
        reports = store.visible_reports(now_ms)
        alloc = dynamic_update(reports, self.current, self.model, self.cfg.goal,
                               self.scenario.indoor_bs, self.noise_floor_mw,
                               rx_height_m=self.scenario.ue_height_m)
        store.record_update(now_ms)
        caps = np.array([bs.max_power_mw for bs in self.scenario.indoor_bs])
        self.current = np.clip(alloc.p_tx_mw, 0.0, caps)
        return self.current.copy()


def make_controller(scenario: Scenario, model: PathlossModel,
                    cfg: SchemeConfig, indoor_enabled: bool = True) -> PowerController:
    if not indoor_enabled or cfg.scheme == OFF:
        return OffController(len(scenario.indoor_bs))
    if cfg.scheme in (MODIFIED_LSA, SEMI_STATIC, SEMI_STATIC_AREA):
        return StaticBeltController(scenario, model, cfg)
    if cfg.scheme == CBRS:
        return CbrsController(scenario, model, cfg)
    if cfg.scheme == DYNAMIC:
        return DynamicRemController(scenario, model, cfg)
    raise ConfigurationError(f"unknown scheme {cfg.scheme!r}")
