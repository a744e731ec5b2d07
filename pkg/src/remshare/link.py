"""Link abstraction: noise, per-RB SINR, EESM compression, CQI, rate mapping.

All operations are pure; the CQI table ships as a versioned data file and can
be overridden from the scenario config.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigurationError

THERMAL_NOISE_DBM_PER_HZ = -174.0

NARROWBAND_CQI = "narrowband_cqi"
SHANNON = "shannon"


@dataclass(frozen=True)
class NoiseModel:
    bandwidth_hz: float
    noise_figure_db: float = 0.0

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ConfigurationError("bandwidth must be > 0")


def thermal_noise_power_dbm(noise: NoiseModel) -> float:
    """kTB noise power plus receiver noise figure, in dBm."""
    return THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(noise.bandwidth_hz) + noise.noise_figure_db


def thermal_noise_power_mw(noise: NoiseModel) -> float:
    return 10.0 ** (thermal_noise_power_dbm(noise) / 10.0)


@dataclass(frozen=True)
class CqiTable:
    """15-level CQI table: switching thresholds, efficiencies, EESM betas."""

    min_sinr_db: np.ndarray  # (15,)
    efficiency_bps_hz: np.ndarray  # (15,)
    eesm_beta: np.ndarray  # (15,)
    # efficiency indexed by CQI value 0..15 (0 -> no transmission)
    efficiency_by_cqi: np.ndarray = field(init=False, repr=False, compare=False)
    min_sinr_linear: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        thr = np.asarray(self.min_sinr_db, dtype=float)
        eff = np.asarray(self.efficiency_bps_hz, dtype=float)
        beta = np.asarray(self.eesm_beta, dtype=float)
        if not (thr.shape == eff.shape == beta.shape) or thr.ndim != 1:
            raise ConfigurationError("CQI table columns must have identical 1-D shape")
        if np.any(np.diff(thr) <= 0):
            raise ConfigurationError("CQI thresholds must be strictly increasing")
        if np.any(np.diff(eff) <= 0) or eff[0] <= 0:
            raise ConfigurationError("CQI efficiencies must be positive and strictly increasing")
        if np.any(beta <= 0):
            raise ConfigurationError("EESM betas must be positive")
        object.__setattr__(self, "min_sinr_db", thr)
        object.__setattr__(self, "efficiency_bps_hz", eff)
        object.__setattr__(self, "eesm_beta", beta)
        object.__setattr__(self, "efficiency_by_cqi", np.concatenate(([0.0], eff)))
        object.__setattr__(self, "min_sinr_linear", 10.0 ** (thr / 10.0))

    @property
    def n_levels(self) -> int:
        return len(self.min_sinr_db)

    @classmethod
    def from_rows(cls, rows) -> "CqiTable":
        rows = sorted(rows, key=lambda r: r[0])
        idx = [r[0] for r in rows]
        if idx != list(range(1, len(rows) + 1)):
            raise ConfigurationError("CQI indices must be 1..N without gaps")
        return cls(
            min_sinr_db=np.array([r[1] for r in rows]),
            efficiency_bps_hz=np.array([r[2] for r in rows]),
            eesm_beta=np.array([r[3] for r in rows]),
        )

    @classmethod
    def from_csv(cls, path) -> "CqiTable":
        rows = []
        with open(path, newline="", encoding="utf-8") as f:
            for rec in csv.DictReader(r for r in f if not r.startswith("#")):
                rows.append((int(rec["cqi_index"]), float(rec["min_sinr_db"]),
                             float(rec["efficiency_bps_hz"]), float(rec["eesm_beta"])))
        return cls.from_rows(rows)

    @classmethod
    def load_default(cls) -> "CqiTable":
        ref = resources.files("remshare.data").joinpath("cqi_table.csv")
        with resources.as_file(ref) as path:
            return cls.from_csv(path)


def eesm_effective_sinr(per_subcarrier_sinr, beta: float) -> float:
    """Exponential effective SINR: -beta * ln(mean(exp(-g/beta))).

    Computed through log-sum-exp so very high per-subcarrier SINR does not
    underflow.  Constant vectors map to their common value exactly.
    """
    g = np.asarray(per_subcarrier_sinr, dtype=float)
    if g.size == 0:
        raise ConfigurationError("EESM needs a non-empty SINR vector")
    if beta <= 0:
        raise ConfigurationError("EESM beta must be > 0")
    if np.all(g == g.flat[0]):
        return float(g.flat[0])
    return float(-beta * (logsumexp(-g / beta) - math.log(g.size)))


def sinr_to_cqi(effective_sinr_db: float, table: CqiTable):
    """Largest CQI whose threshold is <= the effective SINR; 0 = no TX."""
    return np.searchsorted(table.min_sinr_db, effective_sinr_db, side="right")


@dataclass(frozen=True)
class SinrVector:
    """Per-RB linear signal and interference components of one receiver."""

    s: np.ndarray
    noise: np.ndarray
    i_in: np.ndarray
    i_out: np.ndarray

    def __post_init__(self):
        arrays = {}
        n = None
        for name in ("s", "noise", "i_in", "i_out"):
            a = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if np.any(a < 0):
                raise ConfigurationError(f"{name} must be non-negative")
            arrays[name] = a
            n = a.size if n is None else n
        shaped = np.broadcast_arrays(*(arrays[k] for k in ("s", "noise", "i_in", "i_out")))
        for name, a in zip(("s", "noise", "i_in", "i_out"), shaped):
            object.__setattr__(self, name, a)

    @property
    def sinr(self) -> np.ndarray:
        return self.s / (self.noise + self.i_in + self.i_out)

    @property
    def n_rb(self) -> int:
        return self.s.size


@dataclass(frozen=True)
class RateMapper:
    """Maps per-RB SINR to achievable rate.

    ``narrowband_cqi`` sums the per-RB CQI rates (a step function of SINR);
    ``shannon`` is the smooth surrogate used by solver oracles and
    robustness checks.  5G terminals get a flat +5 % rate bonus.
    """

    table: CqiTable
    mode: str = NARROWBAND_CQI
    rb_bandwidth_hz: float = 180e3
    bonus_5g: float = 1.05

    def __post_init__(self):
        if self.mode not in (NARROWBAND_CQI, SHANNON):
            raise ConfigurationError(f"unknown rate mapper mode {self.mode!r}")

    def _bonus(self, is_5g: bool) -> float:
        return self.bonus_5g if is_5g else 1.0

    def rb_rates_from_cqi(self, cqi) -> np.ndarray:
        """bits/s per RB for integer CQI values (0 -> 0)."""
        return self.table.efficiency_by_cqi[np.asarray(cqi)] * self.rb_bandwidth_hz

    def full_band_rate(self, sinr_linear, is_5g: bool = False) -> float:
        """Rate over the given per-RB SINR vector (all RBs granted)."""
        g = np.asarray(sinr_linear, dtype=float)
        if self.mode == SHANNON:
            return float(np.sum(self.rb_bandwidth_hz * np.log2(1.0 + g))) * self._bonus(is_5g)
        cqi = np.searchsorted(self.table.min_sinr_linear, g, side="right")
        return float(np.sum(self.rb_rates_from_cqi(cqi))) * self._bonus(is_5g)


def rate_of_allocation(ue, allocated_rbs, sinr: SinrVector, mapper: RateMapper) -> float:
    """Scheduled rate of one user over its allocated RB set (bits/s)."""
    rbs = np.asarray(allocated_rbs, dtype=int)
    if rbs.size == 0:
        return 0.0
    if np.any(rbs < 0) or np.any(rbs >= sinr.n_rb):
        raise ConfigurationError("allocated RB index out of range")
    is_5g = getattr(ue, "technology", "4G") == "5G"
    g = sinr.sinr[rbs]
    if mapper.mode == SHANNON:
        return float(np.sum(mapper.rb_bandwidth_hz * np.log2(1.0 + g))) * mapper._bonus(is_5g)
    cqi = np.searchsorted(mapper.table.min_sinr_linear, g, side="right")
    return float(np.sum(mapper.rb_rates_from_cqi(cqi))) * mapper._bonus(is_5g)
