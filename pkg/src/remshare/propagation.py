"""Link gains: log-distance pathloss per link class, coupling matrix, fading.

Power algebra is linear (mW) internally; dB/dBm appear only at the API
boundary.  The pathloss interface is pluggable: any object with the same
``pathloss_db`` contract can replace the log-distance model.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from shapely.geometry import Polygon

from .errors import ConfigurationError

log = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299792458.0


class LinkClass(Enum):
    OUTDOOR_TO_OUTDOOR = "outdoor_to_outdoor"
    INDOOR_TO_INDOOR = "indoor_to_indoor"
    CROSS_WALL = "cross_wall"


@dataclass(frozen=True)
class ClassParams:
    """Log-distance parameters of one link class."""

    reference_loss_db: float  # loss at 1 m
    exponent: float
    wall_loss_db: float = 0.0

    def __post_init__(self):
        if self.exponent <= 0:
            raise ConfigurationError("pathloss exponent must be > 0")
        if self.wall_loss_db < 0:
            raise ConfigurationError("wall_loss_db must be >= 0")


def free_space_reference_loss_db(carrier_hz: float, distance_m: float = 1.0) -> float:
    """Free-space loss 20*log10(4*pi*d*f/c), the default 1 m anchor."""
    return 20.0 * math.log10(4.0 * math.pi * distance_m * carrier_hz / SPEED_OF_LIGHT)


@dataclass(frozen=True)
class PathlossModel:
    """Per-link-class log-distance pathloss, aware of the building footprint."""

    outdoor_to_outdoor: ClassParams
    indoor_to_indoor: ClassParams
    cross_wall: ClassParams
    building: Polygon | None = None

    @classmethod
    def default(cls, carrier_hz: float = 3.5e9, building: Polygon | None = None,
                wall_loss_db: float = 10.0) -> "PathlossModel":
        """Free-space anchored log-distance defaults: exponent 3.0 outdoors,
        3.5 indoors (office clutter), wall penetration on cross-wall links."""
        ref = free_space_reference_loss_db(carrier_hz)
        return cls(
            outdoor_to_outdoor=ClassParams(ref, 3.0),
            indoor_to_indoor=ClassParams(ref, 3.5),
            cross_wall=ClassParams(ref, 3.0, wall_loss_db),
            building=building,
        )

    def params_for(self, link_class: LinkClass) -> ClassParams:
        return getattr(self, link_class.value)

    def classify(self, a, b) -> LinkClass:
        """Link class from the building footprint (x, y only)."""
        if self.building is None:
            raise ConfigurationError("pathloss model has no building; pass link_class explicitly")
        import shapely

        a_in = bool(shapely.intersects_xy(self.building, a[0], a[1]))
        b_in = bool(shapely.intersects_xy(self.building, b[0], b[1]))
        if a_in and b_in:
            return LinkClass.INDOOR_TO_INDOOR
        if a_in or b_in:
            return LinkClass.CROSS_WALL
        return LinkClass.OUTDOOR_TO_OUTDOOR


def _distance_3d(a, b) -> float:
    az = a[2] if len(a) > 2 else 0.0
    bz = b[2] if len(b) > 2 else 0.0
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (az - bz) ** 2)


def pathloss_db(model: PathlossModel, a, b, link_class: LinkClass | None = None) -> float:
    """Deterministic log-distance pathloss between two positions (dB).

    Distances below 1 m are clamped to the 1 m reference distance (and
    logged); positions may be (x, y) or (x, y, z).
    """
    if link_class is None:
        link_class = model.classify(a, b)
    p = model.params_for(link_class)
    d = _distance_3d(a, b)
    if d <= 0.0:
        log.warning("zero-length link %s-%s clamped to 1 m", a, b)
    if d < 1.0:
        d = 1.0
    return p.reference_loss_db + 10.0 * p.exponent * math.log10(d) + p.wall_loss_db


def coupling_gain(pl_db: float, g_tx_dbi: float, g_rx_dbi: float) -> float:
    """Linear power gain 10**((-PL + G_tx + G_rx)/10)."""
    return 10.0 ** ((-pl_db + g_tx_dbi + g_rx_dbi) / 10.0)


@dataclass(frozen=True)
class CouplingMatrix:
    """Linear gain matrix from indoor BSs to victim points.

    The estimated interference (mW) at the victim points for a transmit power
    vector ``p_tx_mw`` is simply ``w @ p_tx_mw``.
    """

    w: np.ndarray  # (n_points, n_bs)
    victim_points: np.ndarray  # (n_points, 2)
    bs_ids: tuple[int, ...]

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "victim_points",
                           np.asarray(self.victim_points, dtype=float).reshape(-1, 2))
        if w.ndim != 2 or w.shape[0] != self.victim_points.shape[0]:
            raise ConfigurationError("coupling matrix shape does not match victim points")
        if w.shape[1] != len(self.bs_ids):
            raise ConfigurationError("coupling matrix shape does not match BS list")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ConfigurationError("coupling gains must be positive and finite")

    def estimate_interference_mw(self, p_tx_mw: np.ndarray) -> np.ndarray:
        return self.w @ np.asarray(p_tx_mw, dtype=float)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["x_m", "y_m"] + [f"gain_bs_{i}" for i in self.bs_ids])
            for pt, row in zip(self.victim_points, self.w):
                writer.writerow([f"{pt[0]:.6f}", f"{pt[1]:.6f}"] + [f"{g:.12e}" for g in row])


def build_coupling_matrix(model: PathlossModel, victim_points, indoor_bs_list,
                          rx_gain_dbi: float = 0.0,
                          rx_height_m: float = 1.5) -> CouplingMatrix:
    """Evaluate the indoor-BS → victim-point gains through the pathloss model."""
    pts = np.asarray(victim_points, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise ConfigurationError("victim point set is empty")
    w = np.empty((pts.shape[0], len(indoor_bs_list)))
    for j, bs in enumerate(indoor_bs_list):
        for i, pt in enumerate(pts):
            pl = pathloss_db(model, bs.position, (pt[0], pt[1], rx_height_m))
            w[i, j] = coupling_gain(pl, bs.antenna_gain_dbi, rx_gain_dbi)
    return CouplingMatrix(w=w, victim_points=pts,
                          bs_ids=tuple(bs.id for bs in indoor_bs_list))


AWGN = "awgn"
RAYLEIGH = "rayleigh"


def coherence_time_ms(speed_kmh: float, carrier_hz: float) -> float:
    """Clarke coherence time 9/(16*pi*f_d); infinite for a static terminal."""
    v = speed_kmh / 3.6
    if v <= 0:
        return math.inf
    doppler_hz = v * carrier_hz / SPEED_OF_LIGHT
    return 1000.0 * 9.0 / (16.0 * math.pi * doppler_hz)


class FadingProcess:
    """Per-RB block fading shared by a set of links, correlated over time.

    Rayleigh mode keeps one complex gain per (link, RB), updated by a
    first-order autoregression whose per-step correlation follows the link's
    coherence time, so the autocorrelation decay time scales like 1/speed.
    AWGN mode returns unit gains and never touches the RNG.
    """

    def __init__(self, mode: str, shape: tuple[int, ...],
                 coherence_ms: np.ndarray | float, rng: np.random.Generator | None = None):
        if mode not in (AWGN, RAYLEIGH):
            raise ConfigurationError(f"unknown fading mode {mode!r}")
        self.mode = mode
        self.shape = shape
        coher = np.broadcast_to(np.asarray(coherence_ms, dtype=float), shape[:1])
        self.coherence_ms = coher
        self._h = None
        self._coeff_cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
        if mode == RAYLEIGH:
            if rng is None:
                raise ConfigurationError("rayleigh fading needs an RNG")
            self._h = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)

    def _coeffs(self, dt_ms: float):
        cached = self._coeff_cache.get(dt_ms)
        if cached is None:
            rho = np.exp(-dt_ms / self.coherence_ms)
            rho = rho.reshape((-1,) + (1,) * (len(self.shape) - 1))
            cached = (rho, np.sqrt(1.0 - rho ** 2))
            self._coeff_cache[dt_ms] = cached
        return cached

    def step(self, dt_ms: float, rng: np.random.Generator) -> None:
        """Advance the process by dt_ms using Gauss-Markov innovation."""
        if self.mode == AWGN:
            return
        rho, innov_scale = self._coeffs(dt_ms)
        innov = (rng.standard_normal(self.shape) + 1j * rng.standard_normal(self.shape)) / math.sqrt(2.0)
        self._h = rho * self._h + innov_scale * innov

    def power_gains(self) -> np.ndarray:
        """Current per-(link, RB) linear power gains, mean 1."""
        if self.mode == AWGN:
            return np.ones(self.shape)
        return np.abs(self._h) ** 2


def sample_fading(process: FadingProcess, dt_ms: float, rng: np.random.Generator) -> np.ndarray:
    """Advance the fading process and return the current power gains."""
    process.step(dt_ms, rng)
    return process.power_gains()
