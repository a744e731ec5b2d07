"""Per-cell downlink RB allocation: proportional fair under soft-frequency-reuse.

The band is split into three contiguous parts; each cell boosts one part by
4x and the per-RB powers are renormalized so they sum to the cell's total
power budget exactly.  The PF metric divides the instantaneous achievable
rate (from last tick's CQI) by an exponential moving average of served rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

PF_SMOOTHING = 0.5
PF_EPSILON_BPS = 1.0  # floor for the average rate in the PF metric
ICIC_BOOST = 4.0
ICIC_PARTS = 3


def icic_unit_mask(cell_index: int, n_rb: int) -> np.ndarray:
    """Per-RB fraction of the cell's total power (sums to 1 exactly)."""
    if n_rb < ICIC_PARTS:
        raise ConfigurationError(f"n_rb={n_rb} cannot be split into {ICIC_PARTS} parts")
    part = cell_index % ICIC_PARTS
    size = n_rb // ICIC_PARTS
    bounds = [0, size, 2 * size, n_rb]  # remainder goes to the last part
    weights = np.ones(n_rb)
    weights[bounds[part]:bounds[part + 1]] = ICIC_BOOST
    return weights / weights.sum()


@dataclass(frozen=True)
class IcicMask:
    """Per-RB transmit power of one cell (mW)."""

    per_rb_power_mw: np.ndarray
    partition: int

    @property
    def total_power_mw(self) -> float:
        return float(self.per_rb_power_mw.sum())


def icic_power_mask(cell_index: int, total_power_mw: float, n_rb: int) -> IcicMask:
    """Soft-frequency-reuse power mask; non-positive budgets give silence."""
    part = cell_index % ICIC_PARTS
    if total_power_mw <= 0:
        return IcicMask(np.zeros(n_rb), part)
    return IcicMask(total_power_mw * icic_unit_mask(cell_index, n_rb), part)


@dataclass
class PfState:
    """Per-UE exponentially averaged served rate (bits/s)."""

    avg_rate: dict[int, float] = field(default_factory=dict)
    smoothing: float = PF_SMOOTHING
    epsilon: float = PF_EPSILON_BPS

    @classmethod
    def for_ues(cls, ue_ids, smoothing: float = PF_SMOOTHING) -> "PfState":
        return cls(avg_rate={int(u): 0.0 for u in ue_ids}, smoothing=smoothing)


def pf_schedule(candidate_ues, per_ue_per_rb_rate, state: PfState) -> dict[int, int]:
    """Assign each RB to the UE maximizing rate / max(avg_rate, epsilon).

    ``per_ue_per_rb_rate`` is (n_candidates, n_rb), aligned with
    ``candidate_ues``.  Ties go to the lowest UE id; RBs on which the winner
    has no usable CQI (rate 0) stay unassigned.  Returns {rb: ue_id}.
    """
    ids = [int(u) for u in candidate_ues]
    if not ids:
        return {}
    order = np.argsort(ids, kind="stable")
    ids_sorted = [ids[i] for i in order]
    rates = np.asarray(per_ue_per_rb_rate, dtype=float)[order]
    avg = np.array([max(state.avg_rate.get(u, 0.0), state.epsilon) for u in ids_sorted])
    metric = rates / avg[:, None]
    winner = np.argmax(metric, axis=0)  # first max -> lowest UE id
    out = {}
    for rb in range(rates.shape[1]):
        if rates[winner[rb], rb] > 0.0:
            out[rb] = ids_sorted[winner[rb]]
    return out


def update_average_rate(state: PfState, served_rates) -> PfState:
    """One EMA tick: avg <- (1-s)*avg + s*instantaneous (0 when unserved)."""
    s = state.smoothing
    new = {u: (1.0 - s) * old + s * float(served_rates.get(u, 0.0))
           for u, old in state.avg_rate.items()}
    return PfState(avg_rate=new, smoothing=s, epsilon=state.epsilon)
