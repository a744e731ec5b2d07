"""REM message plane: interference reports, delay, quantization, location error.

A single in-process store stands in for the private/public repository pair;
the configured delay models UE->BS reporting plus inter-REM transport.  A
snapshot at time t exposes only reports with timestamp <= t - delay, newest
report per UE (last write wins).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError

QUANT_NONE = "none"
QUANT_TWO_BIT = "two_bit"
TWO_BIT_LEVELS_DB = (-6.0, -3.0, 3.0, 6.0)


@dataclass(frozen=True)
class BetaReport:
    """One interference report: location, allowed interference change, time."""

    ue_id: int
    x: float
    y: float
    beta_db: float
    timestamp_ms: int

    def __post_init__(self):
        if not math.isfinite(self.beta_db):
            raise ConfigurationError("beta_db must be finite (caps are applied upstream)")


@dataclass(frozen=True)
class Quantizer:
    mode: str = QUANT_NONE
    levels_db: tuple[float, ...] = TWO_BIT_LEVELS_DB

    def __post_init__(self):
        if self.mode not in (QUANT_NONE, QUANT_TWO_BIT):
            raise ConfigurationError(f"unknown quantizer mode {self.mode!r}")
        object.__setattr__(self, "levels_db", tuple(sorted(self.levels_db)))


def quantize_beta(q: Quantizer, beta_db: float) -> float:
    """Map beta to the nearest report level; ties resolve to the lower
    (more protective) level, so 0 dB quantizes to -3 dB."""
    if q.mode == QUANT_NONE:
        return beta_db
    levels = np.asarray(q.levels_db)
    return float(levels[np.argmin(np.abs(levels - beta_db))])


def perturb_location(report: BetaReport, error_m: float, rng: np.random.Generator) -> BetaReport:
    """Displace the reported location uniformly within a disk of radius error_m."""
    if error_m < 0:
        raise ConfigurationError("location error must be >= 0")
    if error_m == 0:
        return report
    r = error_m * math.sqrt(rng.uniform())
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return replace(report, x=report.x + r * math.cos(theta), y=report.y + r * math.sin(theta))


@dataclass
class RemStore:
    """Append-only report and rate logs with a visibility delay."""

    rem_delay_ms: int = 1
    update_period_ms: int = 10
    quantizer: Quantizer = field(default_factory=Quantizer)
    location_error_m: float = 0.0
    _reports: dict[int, list[BetaReport]] = field(default_factory=dict)
    _rates: list[tuple[int, float, float, float, int]] = field(default_factory=list)
    last_update_ms: int | None = None

    def __post_init__(self):
        if self.update_period_ms <= 0:
            raise ConfigurationError("update_period_ms must be > 0")
        if self.rem_delay_ms < 0:
            raise ConfigurationError("rem_delay_ms must be >= 0")

    def submit_report(self, report: BetaReport, now_ms: int) -> None:
        if report.timestamp_ms > now_ms:
            raise ConfigurationError("report timestamp lies in the future")
        self._reports.setdefault(report.ue_id, []).append(report)

    def visible_reports(self, now_ms: int) -> list[BetaReport]:
        """Newest visible report per UE, ordered by UE id."""
        cutoff = now_ms - self.rem_delay_ms
        out = []
        for ue_id in sorted(self._reports):
            log = self._reports[ue_id]
            for rep in reversed(log):
                if rep.timestamp_ms <= cutoff:
                    out.append(rep)
                    break
        return out

    def has_visible_report(self, now_ms: int) -> bool:
        cutoff = now_ms - self.rem_delay_ms
        return any(log[0].timestamp_ms <= cutoff for log in self._reports.values())

    def submit_rate_stat(self, ue_id: int, x: float, y: float,
                         mean_rate_bps: float, now_ms: int) -> None:
        self._rates.append((ue_id, x, y, mean_rate_bps, now_ms))

    def rate_stats(self) -> list[tuple[int, float, float, float, int]]:
        return list(self._rates)

    def record_update(self, now_ms: int) -> None:
        self.last_update_ms = now_ms

    def export_reports_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["time_ms", "ue", "x_m", "y_m", "beta_db"])
            rows = []
            for ue_id, log in self._reports.items():
                rows.extend((r.timestamp_ms, ue_id, r.x, r.y, r.beta_db) for r in log)
            rows.sort()
            writer.writerows(rows)


def due_for_update(store: RemStore, now_ms: int) -> bool:
    """Whether the controller should recompute powers at this tick.

    Updates run on multiples of the update period once reports are visible;
    the very first visible report also triggers an immediate (off-period)
    update so protection starts as soon as information exists instead of
    waiting out the first period.
    """
    if not store.has_visible_report(now_ms):
        return False
    if store.last_update_ms is None:
        return True
    return now_ms % store.update_period_ms == 0
