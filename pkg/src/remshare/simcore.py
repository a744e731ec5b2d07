"""Discrete-time engine: 1 ms ticks, association, interference accounting,
Monte Carlo campaigns and metrics.

Each tick: (1) fading/mobility advance, (2) per-RB signal and interference
from current powers and ICIC masks, (3) CQI measurement (delivered next
tick) and, in the dynamic scheme, interference reports, (4) per-cell PF
scheduling from last tick's CQI, (5) traffic accounting and PF averaging,
(6) controller power update when one is due.

Iterations are independent given their spawned seed streams, so campaigns
are bit-reproducible; schemes sharing a master seed see identical worlds
(common random numbers) because controllers never touch the world RNG.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .controllers import DYNAMIC, SchemeConfig, make_controller, solve_beta
from .errors import ConfigurationError
from .link import CqiTable, RateMapper, THERMAL_NOISE_DBM_PER_HZ
from .propagation import (AWGN, RAYLEIGH, FadingProcess, PathlossModel,
                          coherence_time_ms, coupling_gain, pathloss_db)
from .rem import Quantizer, RemStore, BetaReport, perturb_location, quantize_beta
from .scenario import INDOOR, OUTDOOR, PlacementCounts, Scenario, UeConfig, place_users

EFF_SINR_CLIP = 700.0  # linear; keeps exp() in range, far above the top CQI


@dataclass(frozen=True)
class CampaignConfig:
    scenario: Scenario
    scheme: SchemeConfig
    counts: PlacementCounts = field(default_factory=PlacementCounts)
    iterations: int = 200
    horizon_ms: int = 1000
    seed: int = 1
    indoor_enabled: bool = True
    icic_enabled: bool = True
    fading_mode: str = RAYLEIGH
    noise_figure_db: float = 9.0
    pathloss: PathlossModel | None = None
    cqi_table: CqiTable | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if self.horizon_ms < self.scheme.update_period_ms:
            raise ConfigurationError("horizon shorter than the power update period")
        if self.fading_mode not in (AWGN, RAYLEIGH):
            raise ConfigurationError(f"unknown fading mode {self.fading_mode!r}")

    def resolved_pathloss(self) -> PathlossModel:
        if self.pathloss is not None:
            return self.pathloss
        return PathlossModel.default(self.scenario.carrier_hz, self.scenario.polygon)

    def resolved_table(self) -> CqiTable:
        return self.cqi_table if self.cqi_table is not None else CqiTable.load_default()

    @property
    def warmup_ms(self) -> int:
        """Ticks discarded from statistics: one update period, capped at half
        the horizon so extreme cadences still leave a measurement window."""
        return min(self.scheme.update_period_ms, self.horizon_ms // 2)


@dataclass(frozen=True)
class UeTrace:
    ue_id: int
    network: str
    technology: str
    serving_bs_id: int
    rate_bps: np.ndarray  # per tick
    effective_sinr: np.ndarray  # per tick, linear

    def mean_rate_bps(self, warmup_ms: int = 0) -> float:
        r = self.rate_bps[warmup_ms:]
        return float(r.mean()) if r.size else 0.0


def associate_ues(ues, bs_list, model: PathlossModel, ue_height_m: float = 1.5):
    """Max-RX-power association within the UE's own network, at full BS power.

    Returns {ue_id: bs_id}; ties go to the lowest BS id.
    """
    out = {}
    for ue in ues:
        best_rx, best_id = -math.inf, None
        for bs in bs_list:
            if bs.network != ue.network:
                continue
            pl = pathloss_db(model, bs.position, (ue.position[0], ue.position[1], ue_height_m))
            rx = bs.max_power_dbm + bs.antenna_gain_dbi + ue.antenna_gain_dbi - pl
            if rx > best_rx + 1e-12 or (abs(rx - best_rx) <= 1e-12 and
                                        best_id is not None and bs.id < best_id):
                best_rx, best_id = rx, bs.id
        if best_id is None:
            raise ConfigurationError(f"UE {ue.id} has no BS in network {ue.network}")
        out[ue.id] = best_id
    return out


def _icic_unit_masks(n_bs: int, n_rb: int) -> np.ndarray:
    from .scheduler import icic_unit_mask

    return np.stack([icic_unit_mask(b, n_rb) for b in range(n_bs)])


class SimulationWorld:
    """Mutable per-iteration state; build once, then step() per tick."""

    def __init__(self, config: CampaignConfig, ues: list[UeConfig],
                 world_rng: np.random.Generator, control_rng: np.random.Generator,
                 moving: tuple[int, float, float] | None = None):
        scenario = config.scenario
        self.config = config
        self.scenario = scenario
        self.model = config.resolved_pathloss()
        self.table = config.resolved_table()
        self.mapper = RateMapper(table=self.table)
        self.rng = world_rng
        self.control_rng = control_rng
        self.ues = ues
        self.moving = moving  # (ue_index, vx_m_per_ms, vy_m_per_ms)

        bs_list = scenario.all_bs
        self.bs_ids = np.array([bs.id for bs in bs_list])
        self.bs_pos = np.array([bs.position for bs in bs_list])
        self.bs_gain = np.array([bs.antenna_gain_dbi for bs in bs_list])
        self.bs_indoor = np.array([bs.network == INDOOR for bs in bs_list])
        self.bs_max_mw = np.array([bs.max_power_mw for bs in bs_list])
        self.n_bs = len(bs_list)
        self.n_indoor = int(self.bs_indoor.sum())
        self.n_rb = scenario.n_rb

        self.n_ue = len(ues)
        self.ue_pos = np.array([[u.position[0], u.position[1]] for u in ues]).reshape(-1, 2)
        self.ue_indoor = np.array([u.network == INDOOR for u in ues], dtype=bool)
        self.ue_5g = np.array([u.technology == "5G" for u in ues], dtype=bool)
        self.ue_gain = np.array([u.antenna_gain_dbi for u in ues])
        nf = np.array([u.noise_figure_db for u in ues])
        rb_bw = self.mapper.rb_bandwidth_hz
        self.noise_rb_mw = 10.0 ** ((THERMAL_NOISE_DBM_PER_HZ
                                     + 10.0 * math.log10(rb_bw) + nf) / 10.0)

        assoc = associate_ues(ues, bs_list, self.model, scenario.ue_height_m)
        id_to_idx = {int(b): i for i, b in enumerate(self.bs_ids)}
        self.serving = np.array([id_to_idx[assoc[u.id]] for u in ues], dtype=int)

        self.gain = np.empty((self.n_ue, self.n_bs))
        for b in range(self.n_bs):
            for u in range(self.n_ue):
                self._set_gain(u, b)

        coher = np.array([coherence_time_ms(u.speed_kmh, scenario.carrier_hz) for u in ues])
        self.fading = FadingProcess(config.fading_mode, (self.n_ue, self.n_bs, self.n_rb),
                                    coher, rng=world_rng if config.fading_mode == RAYLEIGH else None)

        if config.icic_enabled:
            self.unit_masks = _icic_unit_masks(self.n_bs, self.n_rb)
        else:
            self.unit_masks = np.full((self.n_bs, self.n_rb), 1.0 / self.n_rb)
        self.own_mask = (self.ue_indoor[:, None] == self.bs_indoor[None, :]).astype(float)
        self.bonus = np.where(self.ue_5g, self.mapper.bonus_5g, 1.0)
        self.rb_bw = rb_bw
        self.eff_by_cqi = self.table.efficiency_by_cqi
        self.thr_lin = self.table.min_sinr_linear

        self.cells = [np.flatnonzero(self.serving == b) for b in range(self.n_bs)]

        cfg = config.scheme
        self.store = RemStore(rem_delay_ms=cfg.rem_delay_ms,
                              update_period_ms=cfg.update_period_ms,
                              quantizer=Quantizer(mode=cfg.quantizer_mode),
                              location_error_m=cfg.location_error_m)
        self.controller = make_controller(scenario, self.model, cfg, config.indoor_enabled)
        self.total_p_mw = np.where(self.bs_indoor, 0.0, self.bs_max_mw)
        self.total_p_mw[self.bs_indoor] = self.controller.initial_powers_mw()
        self.emit_reports = (cfg.scheme == DYNAMIC and config.indoor_enabled)

        self.pf_avg = np.zeros(self.n_ue)
        self.pf_eps = 1.0
        self.cqi_prev = np.zeros((self.n_ue, self.n_rb), dtype=np.int64)
        self.have_cqi = False

        self.rate_trace = None
        self.power_trace = None
        self.eff_sinr_trace = None

    def _set_gain(self, u: int, b: int) -> None:
        pos = (self.ue_pos[u, 0], self.ue_pos[u, 1], self.scenario.ue_height_m)
        pl = pathloss_db(self.model, tuple(self.bs_pos[b]), pos)
        self.gain[u, b] = coupling_gain(pl, float(self.bs_gain[b]), float(self.ue_gain[u]))

    def allocate_traces(self, horizon_ms: int) -> None:
        self.rate_trace = np.zeros((self.n_ue, horizon_ms))
        self.power_trace = np.zeros((self.n_indoor, horizon_ms))
        self.eff_sinr_trace = np.zeros((self.n_ue, horizon_ms))

    def step(self, t_ms: int) -> None:
        # (1) mobility and fading
        if self.moving is not None:
            u, vx, vy = self.moving
            self.ue_pos[u, 0] += vx
            self.ue_pos[u, 1] += vy
            for b in range(self.n_bs):
                self._set_gain(u, b)
        self.fading.step(1.0, self.rng)

        # (2) per-RB receive powers
        p_rb = self.total_p_mw[:, None] * self.unit_masks  # (n_bs, n_rb)
        rx = self.gain[:, :, None] * p_rb[None, :, :]
        if self.fading.mode == RAYLEIGH:
            rx = rx * self.fading.power_gains()
        s = np.take_along_axis(rx, self.serving[:, None, None], axis=1)[:, 0, :]
        own = np.einsum("ubr,ub->ur", rx, self.own_mask)
        i_in = np.maximum(own - s, 0.0)
        i_out = np.maximum(rx.sum(axis=1) - own, 0.0)

        # (3) measurements: CQI for next tick, interference reports to the REM
        sinr = s / (self.noise_rb_mw[:, None] + i_in + i_out)
        cqi_now = np.searchsorted(self.thr_lin, sinr, side="right")
        if self.emit_reports and t_ms % self.config.scheme.report_period_ms == 0:
            psi = self.config.scheme.psi_percent
            for u in np.flatnonzero(~self.ue_indoor):
                beta_db = solve_beta(s[u], self.noise_rb_mw[u], i_in[u], i_out[u],
                                     psi, self.mapper)
                beta_db = quantize_beta(self.store.quantizer, beta_db)
                report = BetaReport(int(self.ues[u].id), float(self.ue_pos[u, 0]),
                                    float(self.ue_pos[u, 1]), beta_db, t_ms)
                if self.store.location_error_m > 0:
                    report = perturb_location(report, self.store.location_error_m,
                                              self.control_rng)
                self.store.submit_report(report, t_ms)

        # (4)+(5) schedule from last tick's CQI, serve, update PF averages
        served = np.zeros(self.n_ue)
        if self.have_cqi:
            rb_idx = np.arange(self.n_rb)
            for cand in self.cells:
                if cand.size == 0:
                    continue
                rates = (self.eff_by_cqi[self.cqi_prev[cand]] * self.rb_bw
                         * self.bonus[cand, None])
                metric = rates / np.maximum(self.pf_avg[cand], self.pf_eps)[:, None]
                winner = np.argmax(metric, axis=0)
                rwin = rates[winner, rb_idx]
                mask = rwin > 0.0
                if not np.any(mask):
                    continue
                served_c = np.bincount(winner[mask], weights=rwin[mask],
                                       minlength=cand.size)
                served[cand] += served_c
                e = np.exp(-np.minimum(sinr[cand], EFF_SINR_CLIP))
                esum = np.bincount(winner[mask], weights=e[winner[mask], rb_idx[mask]],
                                   minlength=cand.size)
                ecnt = np.bincount(winner[mask], minlength=cand.size)
                got = ecnt > 0
                if self.eff_sinr_trace is not None and np.any(got):
                    self.eff_sinr_trace[cand[got], t_ms] = -np.log(esum[got] / ecnt[got])
        if self.rate_trace is not None:
            self.rate_trace[:, t_ms] = served
            self.power_trace[:, t_ms] = self.total_p_mw[self.bs_indoor]
        self.pf_avg = 0.5 * self.pf_avg + 0.5 * served
        self.cqi_prev = cqi_now
        self.have_cqi = True

        # (6) controller update (effective from the next tick)
        new_powers = self.controller.update(self.store, t_ms)
        if new_powers is not None:
            self.total_p_mw[self.bs_indoor] = new_powers

    def log_rate_stats(self, warmup_ms: int, now_ms: int) -> None:
        """Push per-UE windowed mean rates of outdoor users into the REM."""
        if self.rate_trace is None:
            return
        for u in np.flatnonzero(~self.ue_indoor):
            mean = float(self.rate_trace[u, warmup_ms:now_ms].mean()) if now_ms > warmup_ms else 0.0
            self.store.submit_rate_stat(int(self.ues[u].id), float(self.ue_pos[u, 0]),
                                        float(self.ue_pos[u, 1]), mean, now_ms)


def step(world: SimulationWorld, t_ms: int) -> SimulationWorld:
    world.step(t_ms)
    return world


def get_trace(world: SimulationWorld, ue_id: int) -> UeTrace:
    idx = next(i for i, u in enumerate(world.ues) if u.id == ue_id)
    ue = world.ues[idx]
    return UeTrace(ue.id, ue.network, ue.technology,
                   int(world.bs_ids[world.serving[idx]]),
                   world.rate_trace[idx].copy(), world.eff_sinr_trace[idx].copy())


# ----------------------------------------------------------------------------
# Campaigns and metrics
# ----------------------------------------------------------------------------

def nearest_rank_percentile(values, pct: float) -> float:
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return 0.0
    rank = max(1, math.ceil(pct / 100.0 * v.size))
    return float(v[min(rank, v.size) - 1])


@dataclass(frozen=True)
class NetworkMetrics:
    mean_rate_bps: float
    ci95_bps: float
    p10_rate_bps: float
    samples_bps: np.ndarray  # pooled per-UE mean rates, sorted

    def to_dict(self) -> dict:
        return {
            "mean_rate_bps": self.mean_rate_bps,
            "ci95_bps": self.ci95_bps,
            "p10_rate_bps": self.p10_rate_bps,
            "n_samples": int(self.samples_bps.size),
        }


@dataclass(frozen=True)
class MetricsSummary:
    outdoor: NetworkMetrics
    indoor: NetworkMetrics
    mean_indoor_bs_power_mw: float
    iterations: int
    horizon_ms: int
    warmup_ms: int
    seed: int
    scheme: str

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "seed": self.seed,
            "iterations": self.iterations,
            "horizon_ms": self.horizon_ms,
            "warmup_ms": self.warmup_ms,
            "mean_indoor_bs_power_mw": self.mean_indoor_bs_power_mw,
            "outdoor": self.outdoor.to_dict(),
            "indoor": self.indoor.to_dict(),
        }


def _network_metrics(samples: list[np.ndarray]) -> NetworkMetrics:
    """samples: one array of per-UE means per iteration."""
    pooled = np.sort(np.concatenate(samples)) if samples else np.array([])
    iter_means = np.array([s.mean() for s in samples if s.size])
    mean = float(pooled.mean()) if pooled.size else 0.0
    if iter_means.size > 1:
        ci = float(1.96 * iter_means.std(ddof=1) / math.sqrt(iter_means.size))
    else:
        ci = 0.0
    return NetworkMetrics(mean, ci, nearest_rank_percentile(pooled, 10.0), pooled)


def build_world(config: CampaignConfig, iteration_seed: np.random.SeedSequence,
                moving: dict | None = None) -> SimulationWorld:
    w_ss, c_ss = iteration_seed.spawn(2)
    world_rng = np.random.default_rng(w_ss)
    control_rng = np.random.default_rng(c_ss)
    ues = place_users(config.scenario, config.counts, world_rng,
                      noise_figure_db=config.noise_figure_db)
    moving_spec = None
    if moving is not None:
        start = moving["start_xy"]
        ue = UeConfig(id=(max((u.id for u in ues), default=-1) + 1),
                      position=(float(start[0]), float(start[1])),
                      technology="4G", speed_kmh=moving["speed_kmh"],
                      antenna_gain_dbi=0.0, noise_figure_db=config.noise_figure_db,
                      network=OUTDOOR)
        ues = ues + [ue]
        v = moving["speed_kmh"] / 3.6 / 1000.0  # m per ms
        moving_spec = (len(ues) - 1, v * moving["direction"][0], v * moving["direction"][1])
    return SimulationWorld(config, ues, world_rng, control_rng, moving=moving_spec)


def run_iteration(config: CampaignConfig, iteration_seed: np.random.SeedSequence,
                  moving: dict | None = None) -> SimulationWorld:
    world = build_world(config, iteration_seed, moving=moving)
    world.allocate_traces(config.horizon_ms)
    for t in range(config.horizon_ms):
        world.step(t)
    world.log_rate_stats(config.warmup_ms, config.horizon_ms)
    return world


def run_campaign_detailed(config: CampaignConfig) -> tuple[MetricsSummary, list[dict]]:
    """Monte Carlo campaign over independent seeded iterations.

    Returns the summary plus one row per (iteration, UE) with its mean rate.
    """
    master = np.random.SeedSequence(config.seed)
    children = master.spawn(config.iterations)
    warm = config.warmup_ms
    outdoor_samples, indoor_samples, power_means = [], [], []
    rows = []
    for k, child in enumerate(children):
        world = run_iteration(config, child)
        means = world.rate_trace[:, warm:].mean(axis=1)
        outdoor_samples.append(means[~world.ue_indoor])
        indoor_samples.append(means[world.ue_indoor])
        if world.n_indoor:
            power_means.append(float(world.power_trace[:, warm:].mean()))
        rows.extend(
            {"iteration": k, "ue": ue.id, "network": ue.network,
             "technology": ue.technology, "mean_rate_bps": float(means[i])}
            for i, ue in enumerate(world.ues)
        )
    summary = MetricsSummary(
        outdoor=_network_metrics(outdoor_samples),
        indoor=_network_metrics(indoor_samples),
        mean_indoor_bs_power_mw=float(np.mean(power_means)) if power_means else 0.0,
        iterations=config.iterations,
        horizon_ms=config.horizon_ms,
        warmup_ms=warm,
        seed=config.seed,
        scheme=config.scheme.scheme,
    )
    return summary, rows


def run_campaign(config: CampaignConfig) -> MetricsSummary:
    return run_campaign_detailed(config)[0]


@dataclass(frozen=True)
class MovingUeResult:
    window_ms: int
    window_centers_ms: np.ndarray
    outdoor_rate_bps: np.ndarray  # mean per window over iterations
    indoor_rate_bps: np.ndarray

    def to_rows(self):
        for t, o, i in zip(self.window_centers_ms, self.outdoor_rate_bps, self.indoor_rate_bps):
            yield {"time_ms": float(t), "outdoor_rate_bps": float(o), "indoor_rate_bps": float(i)}


def moving_ue_scenario(config: CampaignConfig, speed_kmh: float = 50.0,
                       window_ms: int = 200, path_clearance_m: float = 3.0) -> MovingUeResult:
    """Single outdoor UE passing the building west to east at constant speed.

    Indoor user positions are re-randomized each iteration; the channel must
    be AWGN so window averages converge quickly.  Returns per-window mean
    rates of the moving UE and of the indoor network.
    """
    if config.fading_mode != AWGN:
        raise ConfigurationError("the moving-UE experiment requires AWGN mode")
    counts = replace(config.counts, outdoor=0)
    config = replace(config, counts=counts)
    minx, miny, maxx, _ = config.scenario.polygon.bounds
    path_y = miny - path_clearance_m
    length_m = speed_kmh / 3.6 * config.horizon_ms / 1000.0
    x0 = (minx + maxx) / 2.0 - length_m / 2.0
    moving = {"start_xy": (x0, path_y), "speed_kmh": speed_kmh, "direction": (1.0, 0.0)}

    n_w = config.horizon_ms // window_ms
    master = np.random.SeedSequence(config.seed)
    out_acc = np.zeros(n_w)
    in_acc = np.zeros(n_w)
    for child in master.spawn(config.iterations):
        world = run_iteration(config, child, moving=moving)
        mov = world.n_ue - 1
        indoor_rates = world.rate_trace[world.ue_indoor]
        for w in range(n_w):
            sl = slice(w * window_ms, (w + 1) * window_ms)
            out_acc[w] += world.rate_trace[mov, sl].mean()
            in_acc[w] += indoor_rates[:, sl].mean() if indoor_rates.size else 0.0
    centers = (np.arange(n_w) + 0.5) * window_ms
    return MovingUeResult(window_ms, centers,
                          out_acc / config.iterations, in_acc / config.iterations)
