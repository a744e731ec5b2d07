"""Constrained indoor power allocation.

Maximize a goal over {p : W p <= i_max, 0 <= p <= p_max}.  Problem sizes are
tiny (a handful of BSs, at most a few hundred victim-point rows), so the LP
solver is a dense two-phase tableau simplex with Bland's rule: deterministic,
exactly reproducible vertices, no external solver state.  The log-sum goal is
concave and solved by a log-barrier Newton method; any stationary point is
globally optimal.

Degenerate LP optima are canonicalized to the lexicographically smallest
optimal allocation so results are reproducible across runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import ConfigurationError, SolverError

SUM_POWER = "sum_power"
MAX_MIN = "max_min"
LOG_SUM = "log_sum"
GOALS = (SUM_POWER, MAX_MIN, LOG_SUM)

FEASIBILITY_TOL_MW = 1e-9
OPTIMALITY_RTOL = 1e-8


@dataclass(frozen=True)
class PowerProblem:
    """W p <= i_max, 0 <= p <= p_max, maximize the chosen goal."""

    w: np.ndarray  # (n_points, n_bs), non-negative gains
    i_max_mw: np.ndarray  # (n_points,)
    p_max_mw: float
    goal: str = SUM_POWER

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.w, dtype=float))
        i_max = np.atleast_1d(np.asarray(self.i_max_mw, dtype=float))
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "i_max_mw", i_max)
        if w.shape[0] != i_max.shape[0]:
            raise ConfigurationError("W and i_max dimensions disagree")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ConfigurationError("coupling entries must be non-negative and finite")
        if np.any(i_max < 0):
            raise ConfigurationError("negative interference limit makes the problem infeasible")
        if not (self.p_max_mw > 0):
            raise ConfigurationError("p_max_mw must be > 0")
        if self.goal not in GOALS:
            raise ConfigurationError(f"unknown goal {self.goal!r}")

    @property
    def n_bs(self) -> int:
        return self.w.shape[1]


@dataclass(frozen=True)
class PowerAllocation:
    p_tx_mw: np.ndarray
    objective_value: float
    solver_status: str

    def __post_init__(self):
        object.__setattr__(self, "p_tx_mw", np.asarray(self.p_tx_mw, dtype=float))

    def is_feasible(self, problem: PowerProblem, tol_mw: float = FEASIBILITY_TOL_MW) -> bool:
        p = self.p_tx_mw
        if np.any(p < -1e-12 * problem.p_max_mw) or np.any(p > problem.p_max_mw * (1 + 1e-12)):
            return False
        return bool(np.all(problem.w @ p <= problem.i_max_mw * (1 + 1e-9) + tol_mw))


def objective_value(goal: str, p: np.ndarray) -> float:
    if goal == SUM_POWER:
        return float(np.sum(p))
    if goal == MAX_MIN:
        return float(np.min(p))
    return float(np.sum(np.log1p(p)))


# ----------------------------------------------------------------------------
# Dense two-phase tableau simplex (minimization, x >= 0, Bland's rule).
# ----------------------------------------------------------------------------

_LE, _EQ = 0, 1


def _simplex_min(c, rows, max_iter=20000, tol=1e-11):
    """Minimize c @ x s.t. the given (coeffs, rhs, kind) rows, x >= 0.

    kind is _LE or _EQ.  Rows are equilibrated; rhs is made non-negative by
    row negation (flipping <= to >=, realized as negative slack + artificial).
    Returns (x, value).  Raises SolverError on non-convergence.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    norm_rows = []
    for a, b, kind in rows:
        a = np.asarray(a, dtype=float).copy()
        b = float(b)
        scale = max(np.max(np.abs(a)), abs(b))
        if scale > 0:
            a /= scale
            b /= scale
        sign = 1.0
        if b < 0:
            a, b, sign = -a, -b, -1.0
        norm_rows.append((a, b, kind, sign))

    m = len(norm_rows)
    n_slack = sum(1 for r in norm_rows if r[2] == _LE)
    # negated <= rows become >= rows: surplus column with -1
    cols = n + n_slack
    art_cols = []
    a_full = np.zeros((m, cols))
    b_full = np.zeros(m)
    basis = [-1] * m
    slack_i = 0
    need_art = []
    for i, (a, b, kind, sign) in enumerate(norm_rows):
        a_full[i, :n] = a
        b_full[i] = b
        if kind == _LE:
            a_full[i, n + slack_i] = 1.0 if sign > 0 else -1.0
            if sign > 0:
                basis[i] = n + slack_i
            else:
                need_art.append(i)
            slack_i += 1
        else:
            need_art.append(i)
    if need_art:
        extra = np.zeros((m, len(need_art)))
        for j, i in enumerate(need_art):
            extra[i, j] = 1.0
            basis[i] = cols + j
            art_cols.append(cols + j)
        a_full = np.hstack([a_full, extra])
    total_cols = a_full.shape[1]

    tableau = np.zeros((m + 1, total_cols + 1))
    tableau[:m, :total_cols] = a_full
    tableau[:m, -1] = b_full

    def _set_objective(cost):
        tableau[m, :] = 0.0
        tableau[m, :total_cols] = cost
        for i, bi in enumerate(basis):
            if cost[bi] != 0.0:
                tableau[m, :] -= cost[bi] * tableau[i, :]

    def _pivot(allowed_cols):
        for _ in range(max_iter):
            enter = -1
            for j in allowed_cols:
                if tableau[m, j] < -tol:
                    enter = j
                    break
            if enter < 0:
                return
            leave, best, best_basis = -1, math.inf, math.inf
            for i in range(m):
                aij = tableau[i, enter]
                if aij > tol:
                    ratio = tableau[i, -1] / aij
                    if ratio < best - tol or (abs(ratio - best) <= tol and basis[i] < best_basis):
                        leave, best, best_basis = i, ratio, basis[i]
            if leave < 0:
                raise SolverError("LP is unbounded")
            piv = tableau[leave, enter]
            tableau[leave, :] /= piv
            for i in range(m + 1):
                if i != leave and tableau[i, enter] != 0.0:
                    tableau[i, :] -= tableau[i, enter] * tableau[leave, :]
            basis[leave] = enter
        raise SolverError("simplex iteration limit reached")

    if art_cols:
        cost1 = np.zeros(total_cols)
        cost1[art_cols] = 1.0
        _set_objective(cost1)
        _pivot(list(range(total_cols)))
        infeas = -tableau[m, -1]
        if infeas > 1e-7 * (1.0 + np.max(np.abs(b_full))):
            raise SolverError(f"LP infeasible (phase-1 residual {infeas:.3e})")
        # drive surviving zero-valued artificials out of the basis; rows that
        # cannot pivot on a structural/slack column are redundant and dropped
        drop = []
        for i in range(m):
            if basis[i] in art_cols:
                for j in range(cols):
                    if abs(tableau[i, j]) > tol:
                        piv = tableau[i, j]
                        tableau[i, :] /= piv
                        for k in range(m + 1):
                            if k != i and tableau[k, j] != 0.0:
                                tableau[k, :] -= tableau[k, j] * tableau[i, :]
                        basis[i] = j
                        break
                else:
                    drop.append(i)
        if drop:
            keep = [i for i in range(m) if i not in drop]
            tableau = tableau[keep + [m], :]
            basis = [basis[i] for i in keep]
            m = len(basis)

    cost2 = np.zeros(total_cols)
    cost2[:n] = c
    _set_objective(cost2)
    allowed = [j for j in range(cols)]
    _pivot(allowed)

    x = np.zeros(total_cols)
    for i, bi in enumerate(basis):
        if bi < total_cols:
            x[bi] = tableau[i, -1]
    return x[:n], float(c @ x[:n])


def _lp_max(c, a_ub, b_ub, a_eq=None, b_eq=None):
    """Maximize c @ x s.t. a_ub x <= b_ub, a_eq x = b_eq, x >= 0."""
    rows = [(a, b, _LE) for a, b in zip(np.atleast_2d(a_ub), np.atleast_1d(b_ub))]
    if a_eq is not None:
        rows += [(a, b, _EQ) for a, b in zip(np.atleast_2d(a_eq), np.atleast_1d(b_eq))]
    x, val = _simplex_min(-np.asarray(c, dtype=float), rows)
    return x, -val


def _box_rows(n, p_max):
    return np.eye(n), np.full(n, p_max)


def _lexicographic_smallest(problem: PowerProblem, a_ub, b_ub, value: float,
                            obj_coeffs: np.ndarray) -> np.ndarray:
    """Among optima of obj_coeffs @ p == value, pick the lexicographically
    smallest point by minimizing one coordinate at a time."""
    n = problem.n_bs
    eq_rows = [obj_coeffs]
    eq_vals = [value]
    fixed = np.full(n, np.nan)
    for i in range(n):
        c = np.zeros(n)
        c[i] = -1.0  # maximize -p_i == minimize p_i
        x, _ = _lp_max(c, a_ub, b_ub, np.array(eq_rows), np.array(eq_vals))
        fixed[i] = max(x[i], 0.0) + 0.0  # normalize -0.0
        row = np.zeros(n)
        row[i] = 1.0
        eq_rows.append(row)
        eq_vals.append(fixed[i])
    return fixed


def solve_sum_power(problem: PowerProblem) -> PowerAllocation:
    """Maximize total power; degenerate optima resolved lexicographically."""
    n = problem.n_bs
    box_a, box_b = _box_rows(n, problem.p_max_mw)
    a_ub = np.vstack([problem.w, box_a])
    b_ub = np.concatenate([problem.i_max_mw, box_b])
    ones = np.ones(n)
    _, value = _lp_max(ones, a_ub, b_ub)
    p = _lexicographic_smallest(problem, a_ub, b_ub, value, ones)
    return PowerAllocation(p, objective_value(SUM_POWER, p), "optimal")


def solve_max_min(problem: PowerProblem) -> PowerAllocation:
    """Maximize the minimum power, then spend remaining slack on total power.

    Stage 1 is an LP in (p, t) maximizing the level t <= min(p).  Because W
    is non-negative, the uniform vector t*1 is feasible, so stage 2 restates
    the problem in q = p - t* >= 0 and maximizes total power at the fixed
    minimum (avoiding dominated points), again with lexicographic
    canonicalization.
    """
    n = problem.n_bs
    # variables (p_1..p_n, t)
    rows = []
    rhs = []
    for wr, im in zip(problem.w, problem.i_max_mw):
        rows.append(np.concatenate([wr, [0.0]]))
        rhs.append(im)
    for i in range(n):  # t - p_i <= 0
        r = np.zeros(n + 1)
        r[i] = -1.0
        r[n] = 1.0
        rows.append(r)
        rhs.append(0.0)
    for i in range(n):  # p_i <= p_max
        r = np.zeros(n + 1)
        r[i] = 1.0
        rows.append(r)
        rhs.append(problem.p_max_mw)
    c = np.zeros(n + 1)
    c[n] = 1.0
    _, t_star = _lp_max(c, np.array(rows), np.array(rhs))
    t_star = min(max(t_star, 0.0), problem.p_max_mw)

    # stage 2 in q = p - t*
    b2 = np.maximum(problem.i_max_mw - problem.w @ np.full(n, t_star), 0.0)
    box_b2 = np.full(n, max(problem.p_max_mw - t_star, 0.0))
    a_ub = np.vstack([problem.w, np.eye(n)])
    b_ub = np.concatenate([b2, box_b2])
    ones = np.ones(n)
    _, value = _lp_max(ones, a_ub, b_ub)
    q = _lexicographic_smallest(problem, a_ub, b_ub, value, ones)
    p = q + t_star
    return PowerAllocation(p, objective_value(MAX_MIN, p), "optimal")


def solve_log_sum(problem: PowerProblem, gap_rtol: float = 1e-10,
                  max_outer: int = 60, max_newton: int = 80) -> PowerAllocation:
    """Maximize sum(log(1+p)) by a log-barrier Newton method.

    The problem is concave with linear constraints, so the barrier path
    converges to the global optimum; iteration stops once the duality gap
    (number of constraints / barrier weight) is below ``gap_rtol`` relative
    to the objective scale.
    """
    n = problem.n_bs
    w = problem.w
    i_max = problem.i_max_mw
    p_max = problem.p_max_mw

    # presolve: variables whose row caps are negligible are pinned to zero
    caps = np.full(n, p_max)
    for wr, im in zip(w, i_max):
        pos = wr > 0
        if np.any(pos):
            caps[pos] = np.minimum(caps[pos], im / wr[pos])
    active = caps > 1e-12 * p_max
    p_full = np.zeros(n)
    if not np.any(active):
        return PowerAllocation(p_full, objective_value(LOG_SUM, p_full), "optimal")

    # zero-budget rows pin their variables via caps above, so surviving rows
    # with any active coefficient have strictly positive budget
    wa = w[:, active]
    keep_rows = np.any(wa > 0, axis=1)
    wa = wa[keep_rows]
    ia = i_max[keep_rows]

    na = int(active.sum())
    cap_a = caps[active]
    if wa.shape[0]:
        row_room = ia / (wa @ np.ones(na))
        delta = 0.45 * min(cap_a.min(), row_room.min(), p_max)
    else:
        delta = 0.45 * min(cap_a.min(), p_max)
    p = np.full(na, max(delta, 1e-12))

    m = wa.shape[0] + 2 * na

    def barrier(p, t):
        s = ia - wa @ p if wa.shape[0] else np.array([])
        if np.any(p <= 0) or np.any(p >= p_max) or (s.size and np.any(s <= 0)):
            return -math.inf
        val = t * np.sum(np.log1p(p)) + np.sum(np.log(p)) + np.sum(np.log(p_max - p))
        if s.size:
            val += np.sum(np.log(s))
        return val

    t = 1.0
    for _ in range(max_outer):
        for _ in range(max_newton):
            s = ia - wa @ p if wa.shape[0] else np.array([])
            grad = t / (1.0 + p) + 1.0 / p - 1.0 / (p_max - p)
            hess = np.diag(t / (1.0 + p) ** 2 + 1.0 / p ** 2 + 1.0 / (p_max - p) ** 2)
            if s.size:
                grad -= wa.T @ (1.0 / s)
                hess += (wa / (s[:, None] ** 2)).T @ wa
            try:
                step = cho_solve(cho_factor(hess), grad)
            except LinAlgError as exc:
                raise SolverError(f"barrier Hessian not positive definite: {exc}") from exc
            decrement = float(grad @ step)
            if decrement / 2.0 <= 1e-13 * max(1.0, t):
                break
            alpha = 1.0
            base = barrier(p, t)
            while alpha > 1e-14:
                cand = p + alpha * step
                val = barrier(cand, t)
                if val > base + 0.25 * alpha * decrement:
                    p = cand
                    break
                alpha *= 0.5
            else:
                break
        obj = float(np.sum(np.log1p(p)))
        if m / t <= gap_rtol * max(1.0, abs(obj)):
            p_full[active] = p
            return PowerAllocation(p_full, objective_value(LOG_SUM, p_full), "optimal")
        t *= 10.0
    raise SolverError("log-sum barrier did not converge; check problem scaling")


_SOLVERS = {SUM_POWER: solve_sum_power, MAX_MIN: solve_max_min, LOG_SUM: solve_log_sum}


def solve_power_problem(problem: PowerProblem) -> PowerAllocation:
    return _SOLVERS[problem.goal](problem)


def _goal_slices(goal: str, grid: np.ndarray):
    if goal == MAX_MIN:
        return grid.copy(), np.minimum
    vals = grid + 0.0 if goal == SUM_POWER else np.log1p(grid)
    return vals, np.add


def brute_force_power_oracle(problem: PowerProblem, grid_points_per_dim: int = 200) -> PowerAllocation:
    """Exhaustive feasible grid search over [0, p_max]^n (test oracle).

    Limited to 3 BSs and 200 grid points per dimension; the best feasible
    grid point is an achievable lower bound on the optimum.  All goals are
    monotone in each coordinate, so the scan over the last dimension
    collapses to the per-point feasibility cap (identical result to the full
    n-dim enumeration, without materializing the n-dim grid).
    """
    n = problem.n_bs
    if n > 3:
        raise SolverError("brute-force oracle supports at most 3 BSs")
    if grid_points_per_dim > 200 or grid_points_per_dim < 2:
        raise SolverError("grid_points_per_dim must be in [2, 200]")
    g = grid_points_per_dim
    grid = np.linspace(0.0, problem.p_max_mw, g)
    w = problem.w
    i_max = problem.i_max_mw
    vals, combine = _goal_slices(problem.goal, grid)

    # partial sums over the leading n-1 dims, then cap the last dim per point
    if n == 1:
        lead_shape = (1,)
        lead_load = np.zeros((w.shape[0], 1))
        lead_val = np.zeros(1) if problem.goal != MAX_MIN else np.full(1, np.inf)
    else:
        axes = [grid.reshape([g if d == k else 1 for k in range(n - 1)])
                for d in range(n - 1)]
        lead_shape = (g,) * (n - 1)
        lead_load = np.empty((w.shape[0],) + lead_shape)
        for r, wr in enumerate(w):
            acc = np.zeros(lead_shape)
            for d in range(n - 1):
                acc = acc + wr[d] * axes[d]
            lead_load[r] = acc
        lead_val = None
        for d in range(n - 1):
            v = vals.reshape([g if k == d else 1 for k in range(n - 1)])
            lead_val = np.broadcast_to(v, lead_shape).copy() if lead_val is None \
                else combine(lead_val, v)

    last_cap = np.full(lead_shape, problem.p_max_mw)
    feasible = np.ones(lead_shape, dtype=bool)
    for r, wr in enumerate(w):
        room = i_max[r] * (1 + 1e-12) - lead_load[r].reshape(lead_shape)
        if wr[-1] > 0:
            last_cap = np.minimum(last_cap, room / wr[-1])
        else:
            feasible &= room >= 0
    feasible &= last_cap >= 0
    step = grid[1] - grid[0]
    idx = np.clip((last_cap * (1 + 1e-12) // step).astype(int), 0, g - 1)
    total = combine(lead_val, vals[idx])
    total = np.where(feasible, total, -np.inf)
    flat = int(np.argmax(total))
    best = np.unravel_index(flat, lead_shape)
    lead = [grid[i] for i in best] if n > 1 else []
    p = np.array(lead + [grid[idx[best]]])
    if total[best] == -np.inf:
        p = np.zeros(n)  # origin is always feasible when i_max >= 0
    return PowerAllocation(p, objective_value(problem.goal, p), "oracle")


def dump_problem(problem: PowerProblem, path) -> None:
    """Write a problem instance as documented JSON for offline debugging."""
    payload = {
        "format": "remshare-power-problem-v1",
        "goal": problem.goal,
        "p_max_mw": problem.p_max_mw,
        "i_max_mw": problem.i_max_mw.tolist(),
        "w": problem.w.tolist(),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)


def load_problem(path) -> PowerProblem:
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("format") != "remshare-power-problem-v1":
        raise ConfigurationError("unrecognized power-problem file format")
    return PowerProblem(
        w=np.array(payload["w"], dtype=float),
        i_max_mw=np.array(payload["i_max_mw"], dtype=float),
        p_max_mw=float(payload["p_max_mw"]),
        goal=payload.get("goal", SUM_POWER),
    )
