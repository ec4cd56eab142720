"""Optimization-problem constructors for a degraded production line.

Two families of problems share the same physical data:

* a single aggregated-interval LP whose feasibility defines the satisfiable
  degradation set (mode shares relax to [0,1], switching transients vanish),
* the full multi-interval scheduling MILP with integral mode indicators,
  queue dynamics and switching-reduced first-interval rates. The MILP is
  constructed and audited only; nothing here solves integer programs.

Boundary-point constructors re-cast degradation itself as a decision
variable. The per-machine time-share coupling is bilinear in (share, d), but
eliminating the shares turns it into the linear row
sum_j rate_{i,j} / mu_{i,j} + d_i <= 1, which is equivalent for d_i < 1 and
closes the same region at d_i = 1.

All matrices are built in triplet form with a fixed row order (stage, then
machine, then part, then interval), so serialized problems and residual
audits are reproducible byte for byte.
"""

from __future__ import annotations

import numpy as np

from .line import (
    IDLE, LineConfig, MachineSpec, effective_rate, expand_virtual_machines,
    validate_degradation, validate_line,
)
from .simplex import LpProblem, TripletMatrix, make_problem

RESIDUAL_TOL = 1e-9


class StructuralInfeasibility(Exception):
    """A demanded part has no capable machine in some stage; no LP needed."""

    def __init__(self, part_id: int, stage: str):
        self.part_id = part_id
        self.stage = stage
        super().__init__(
            f"part {part_id} has positive demand but no capable machine "
            f"in stage {stage!r}")


def check_structure(line: LineConfig) -> None:
    """Raise StructuralInfeasibility if demand cannot flow through every stage."""
    for part in line.parts:
        if line.demand_rate(part) <= 0:
            continue
        for stage in line.stages:
            if not any(m.capable(part.id) for m in line.stage_machines(stage)):
                raise StructuralInfeasibility(part.id, stage)


def _stage_major(line: LineConfig) -> list[MachineSpec]:
    return [m for stage in line.stages for m in line.stage_machines(stage)]


def _objective(line: LineConfig, n_vars: int) -> np.ndarray:
    if line.cost_vector_policy == "supplied":
        cost = np.asarray(line.cost_vector, dtype=np.float64)
        if cost.shape != (n_vars,):
            raise ValueError(
                f"supplied cost vector has {cost.shape[0] if cost.ndim else 0} "
                f"entries, problem has {n_vars} variables")
        return cost
    return np.zeros(n_vars)


def build_aggregated_lp(line: LineConfig, d, share_constraint: bool = True) -> LpProblem:
    """Single-interval feasibility LP at a fixed degradation vector.

    Variables are mode shares x_{i,j} in [0,1] and throughputs (parts per
    interval) for every capable machine/part pair of the slot-expanded line.
    Constraints: optional per-machine share budget, throughput limited by
    share times degraded rate, downstream stage flow bounded by upstream,
    input caps as throughput bounds, final-stage output meeting the demand
    rate and first-stage output meeting the aging-shifted rate.
    """
    validate_line(line)
    d_phys = validate_degradation(line, d)
    check_structure(line)
    exp, parent = expand_virtual_machines(line)
    machines = _stage_major(exp)
    d_of = {m.id: d_phys[parent[m.id]] for m in exp.machines}

    pairs = [(m, p) for m in machines for p in exp.parts if m.capable(p.id)]
    n_pairs = len(pairs)
    x_at = {(m.id, p.id): k for k, (m, p) in enumerate(pairs)}
    r_at = {(m.id, p.id): n_pairs + k for k, (m, p) in enumerate(pairs)}
    n = 2 * n_pairs

    names = [f"x[{m.id},{p.id}]" for m, p in pairs]
    names += [f"rate[{m.id},{p.id}]" for m, p in pairs]
    lb = np.zeros(n)
    ub = np.empty(n)
    ub[:n_pairs] = 1.0
    for k, (m, p) in enumerate(pairs):
        ub[n_pairs + k] = exp.input_cap(m, p.id)

    rows = []          # (entries, rhs) with entries = [(col, coef), ...]
    if share_constraint:
        for m in machines:
            cols = [(x_at[(m.id, p.id)], 1.0) for p in exp.parts if m.capable(p.id)]
            if cols:
                rows.append((cols, 1.0))
    for m, p in pairs:
        cap = (1.0 - d_of[m.id]) * m.rates[p.id]
        rows.append(([(r_at[(m.id, p.id)], 1.0), (x_at[(m.id, p.id)], -cap)], 0.0))
    for b in range(len(exp.stages) - 1):
        up = [m for m in machines if m.stage == exp.stages[b]]
        dn = [m for m in machines if m.stage == exp.stages[b + 1]]
        for p in exp.parts:
            cols = [(r_at[(m.id, p.id)], 1.0) for m in dn if m.capable(p.id)]
            cols += [(r_at[(m.id, p.id)], -1.0) for m in up if m.capable(p.id)]
            if cols:
                rows.append((cols, 0.0))
    first, last = exp.stages[0], exp.stages[-1]
    for p in exp.parts:
        if line.demand_rate(p) <= 0:
            continue
        cols = [(r_at[(m.id, p.id)], -1.0)
                for m in machines if m.stage == last and m.capable(p.id)]
        rows.append((cols, -line.demand_rate(p)))
    for p in exp.parts:
        if line.demand_rate(p) <= 0:
            continue
        cols = [(r_at[(m.id, p.id)], -1.0)
                for m in machines if m.stage == first and m.capable(p.id)]
        rows.append((cols, -line.aging_rate(p)))

    a_ineq, b_ineq = _assemble(rows, n)
    return make_problem(_objective(line, n), a_ineq=a_ineq, b_ineq=b_ineq,
                        lb=lb, ub=ub, names=names)


def _assemble(rows, n_vars) -> tuple[TripletMatrix, np.ndarray]:
    entries = []
    rhs = np.empty(len(rows))
    for r, (cols, b) in enumerate(rows):
        rhs[r] = b
        for c, v in cols:
            entries.append((r, c, v))
    return TripletMatrix.from_entries((len(rows), n_vars), entries), rhs


def _boundary_lp(line: LineConfig, scalar_coef, scalar_ub: float,
                 scalar_name: str, share_constraint: bool) -> LpProblem:
    """Shared body of the boundary constructors.

    Variables: one throughput per capable pair of the expanded line plus a
    trailing scalar that scales degradation. `scalar_coef(machine)` gives the
    machine's occupancy-row coefficient for that scalar. Maximizes the scalar.
    """
    validate_line(line)
    check_structure(line)
    exp, parent = expand_virtual_machines(line)
    machines = _stage_major(exp)

    pairs = [(m, p) for m in machines for p in exp.parts if m.capable(p.id)]
    n_pairs = len(pairs)
    r_at = {(m.id, p.id): k for k, (m, p) in enumerate(pairs)}
    s_at = n_pairs
    n = n_pairs + 1

    names = [f"rate[{m.id},{p.id}]" for m, p in pairs] + [scalar_name]
    lb = np.zeros(n)
    ub = np.empty(n)
    for k, (m, p) in enumerate(pairs):
        ub[k] = exp.input_cap(m, p.id)
    ub[s_at] = scalar_ub

    rows = []
    if share_constraint:
        # occupancy per machine: sum_j rate/mu + coef * scalar <= 1
        for m in machines:
            cols = [(r_at[(m.id, p.id)], 1.0 / m.rates[p.id])
                    for p in exp.parts if m.capable(p.id)]
            if not cols:
                continue
            coef = scalar_coef(parent[m.id])
            if coef != 0.0:
                cols.append((s_at, coef))
            rows.append((cols, 1.0))
    else:
        # uncoupled machines: rate/mu + coef * scalar <= 1 per pair
        for m, p in pairs:
            cols = [(r_at[(m.id, p.id)], 1.0 / m.rates[p.id])]
            coef = scalar_coef(parent[m.id])
            if coef != 0.0:
                cols.append((s_at, coef))
            rows.append((cols, 1.0))
    for b in range(len(exp.stages) - 1):
        up = [m for m in machines if m.stage == exp.stages[b]]
        dn = [m for m in machines if m.stage == exp.stages[b + 1]]
        for p in exp.parts:
            cols = [(r_at[(m.id, p.id)], 1.0) for m in dn if m.capable(p.id)]
            cols += [(r_at[(m.id, p.id)], -1.0) for m in up if m.capable(p.id)]
            if cols:
                rows.append((cols, 0.0))
    first, last = exp.stages[0], exp.stages[-1]
    for p in exp.parts:
        if line.demand_rate(p) <= 0:
            continue
        cols = [(r_at[(m.id, p.id)], -1.0)
                for m in machines if m.stage == last and m.capable(p.id)]
        rows.append((cols, -line.demand_rate(p)))
    for p in exp.parts:
        if line.demand_rate(p) <= 0:
            continue
        cols = [(r_at[(m.id, p.id)], -1.0)
                for m in machines if m.stage == first and m.capable(p.id)]
        rows.append((cols, -line.aging_rate(p)))

    c = np.zeros(n)
    c[s_at] = -1.0  # maximize the scalar
    a_ineq, b_ineq = _assemble(rows, n)
    return make_problem(c, a_ineq=a_ineq, b_ineq=b_ineq, lb=lb, ub=ub, names=names)


def build_axis_boundary_lp(line: LineConfig, axis: int,
                           share_constraint: bool = True) -> tuple[LpProblem, int]:
    """LP maximizing degradation along one axis with all others held at zero.

    Returns the problem and the column index of the degradation variable.
    """
    if not 0 <= axis < line.n_machines:
        raise ValueError(f"axis {axis} out of range for {line.n_machines} machines")

    def coef(phys_idx: int) -> float:
        return 1.0 if phys_idx == axis else 0.0

    prob = _boundary_lp(line, coef, 1.0, f"d[{axis}]", share_constraint)
    return prob, prob.n_vars - 1


def build_ray_extension_lp(line: LineConfig, u,
                           share_constraint: bool = True) -> tuple[LpProblem, int]:
    """LP maximizing alpha >= 0 with degradation alpha*u inside the unit cube.

    Returns the problem and the column index of alpha.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (line.n_machines,):
        raise ValueError("direction must have one entry per machine")
    if not np.all(np.isfinite(u)) or np.any(u < 0):
        raise ValueError("direction must be finite and non-negative")
    top = float(u.max())
    if top <= 0:
        raise ValueError("direction must have a positive component")

    prob = _boundary_lp(line, lambda i: float(u[i]), 1.0 / top, "alpha", share_constraint)
    return prob, prob.n_vars - 1


# ---------------------------------------------------------------------------
# Full-horizon scheduling MILP (constructed and audited, never solved)
# ---------------------------------------------------------------------------

def _switch_pairs(exp: LineConfig, machines) -> list[tuple[MachineSpec, int]]:
    return [(m, p.id) for m in machines for p in exp.parts
            if m.capable(p.id) and m.setup_times.get(p.id, 0.0) > 0.0]


def horizon_dimensions(line: LineConfig) -> dict:
    """Closed-form variable counts of the horizon problem for `line`."""
    exp, _ = expand_virtual_machines(line)
    machines = _stage_major(exp)
    mv, np_, k = len(machines), len(exp.parts), line.horizon_intervals
    n_w = len(_switch_pairs(exp, machines)) * max(k - 1, 0)
    block = mv * np_ * k
    return {
        "machines": mv, "parts": np_, "intervals": k,
        "queue_vars": block, "mode_vars": block, "inflow_vars": block,
        "output_rate_vars": np_ * k, "switch_vars": n_w,
        "total": 3 * block + np_ * k + n_w,
    }


class _HorizonIndex:
    """Variable layout: queue, mode, inflow, final-output, switch blocks."""

    def __init__(self, line: LineConfig):
        self.exp, self.parent = expand_virtual_machines(line)
        self.machines = _stage_major(self.exp)
        self.k_max = line.horizon_intervals
        self.parts = self.exp.parts
        mv, np_, kk = len(self.machines), len(self.parts), self.k_max
        self.pos = {m.id: i for i, m in enumerate(self.machines)}
        block = mv * np_ * kk
        self.off_q, self.off_x, self.off_lam = 0, block, 2 * block
        self.off_out = 3 * block
        self.off_w = 3 * block + np_ * kk
        self.w_at = {}
        for m, pid in _switch_pairs(self.exp, self.machines):
            for k in range(2, kk + 1):
                self.w_at[(m.id, pid, k)] = self.off_w + len(self.w_at)
        self.n_vars = self.off_w + len(self.w_at)

    def _cell(self, m_id: int, p_id: int, k: int) -> int:
        return (self.pos[m_id] * len(self.parts) + p_id) * self.k_max + (k - 1)

    def q(self, m_id, p_id, k):
        return self.off_q + self._cell(m_id, p_id, k)

    def x(self, m_id, p_id, k):
        return self.off_x + self._cell(m_id, p_id, k)

    def lam(self, m_id, p_id, k):
        return self.off_lam + self._cell(m_id, p_id, k)

    def out(self, p_id, k):
        return self.off_out + p_id * self.k_max + (k - 1)

    def produced(self, m: MachineSpec, p_id: int, k: int, d_i: float):
        """Columns of the interval-k output of machine m for part p.

        Output is (1-d) * (switched rate * x + (full - switched rate) * w);
        the carry-over indicator w exists only past the first interval for
        pairs with a real setup, so first-interval production always pays it.
        """
        if not m.capable(p_id):
            return []
        mu = m.rates[p_id]
        setup = m.setup_times.get(p_id, 0.0)
        mu_s = mu * (self.exp.control_interval_hours - setup) / self.exp.control_interval_hours
        cols = [(self.x(m.id, p_id, k), (1.0 - d_i) * mu_s)]
        key = (m.id, p_id, k)
        if key in self.w_at:
            cols.append((self.w_at[key], (1.0 - d_i) * (mu - mu_s)))
        return cols


def build_horizon_milp(line: LineConfig, d) -> LpProblem:
    """Multi-interval scheduling problem with integral mode indicators.

    Equalities carry queue dynamics, inter-stage flow conservation and the
    definition of the final-stage output rates; inequalities carry machine
    time budgets, the product linearization of consecutive-interval mode
    indicators, demand totals and aging-shifted first-stage totals. Mode
    variables are flagged integral; the solver treats the flags as advisory,
    so this problem is only ever audited against candidate schedules.
    """
    validate_line(line)
    if line.horizon_intervals < 1:
        raise ValueError("horizon must span at least one interval")
    d_phys = validate_degradation(line, d)
    ix = _HorizonIndex(line)
    exp, machines = ix.exp, ix.machines
    d_of = {m.id: d_phys[ix.parent[m.id]] for m in exp.machines}
    kk = ix.k_max
    n = ix.n_vars

    eq_rows = []
    for m in machines:
        for p in ix.parts:
            for k in range(1, kk + 1):
                cols = [(ix.q(m.id, p.id, k), 1.0), (ix.lam(m.id, p.id, k), -1.0)]
                if k > 1:
                    cols.append((ix.q(m.id, p.id, k - 1), -1.0))
                cols += ix.produced(m, p.id, k, d_of[m.id])
                eq_rows.append((cols, 0.0))
    for b in range(len(exp.stages) - 1):
        up = [m for m in machines if m.stage == exp.stages[b]]
        dn = [m for m in machines if m.stage == exp.stages[b + 1]]
        for p in ix.parts:
            for k in range(1, kk + 1):
                cols = [(ix.lam(m.id, p.id, k), 1.0) for m in dn]
                for m in up:
                    cols += [(c, -v) for c, v in ix.produced(m, p.id, k, d_of[m.id])]
                eq_rows.append((cols, 0.0))
    final = [m for m in machines if m.stage == exp.stages[-1]]
    for p in ix.parts:
        for k in range(1, kk + 1):
            cols = [(ix.out(p.id, k), 1.0)]
            for m in final:
                cols += [(c, -v) for c, v in ix.produced(m, p.id, k, d_of[m.id])]
            eq_rows.append((cols, 0.0))

    ineq_rows = []
    for m in machines:
        capable = [p for p in ix.parts if m.capable(p.id)]
        if not capable:
            continue
        for k in range(1, kk + 1):
            ineq_rows.append(([(ix.x(m.id, p.id, k), 1.0) for p in capable], 1.0))
    for (m_id, p_id, k), w_col in ix.w_at.items():
        ineq_rows.append(([(w_col, 1.0), (ix.x(m_id, p_id, k), -1.0)], 0.0))
        ineq_rows.append(([(w_col, 1.0), (ix.x(m_id, p_id, k - 1), -1.0)], 0.0))
        ineq_rows.append(([(ix.x(m_id, p_id, k), 1.0), (ix.x(m_id, p_id, k - 1), 1.0),
                           (w_col, -1.0)], 1.0))
    first = [m for m in machines if m.stage == exp.stages[0]]
    for p in ix.parts:
        if p.demand_quantity <= 0:
            continue
        ineq_rows.append(([(ix.out(p.id, k), -1.0) for k in range(1, kk + 1)],
                          -p.demand_quantity))
    for p in ix.parts:
        if p.demand_quantity <= 0:
            continue
        cols = []
        for m in first:
            for k in range(1, kk + 1 - p.aging_intervals):
                cols += [(c, -v) for c, v in ix.produced(m, p.id, k, d_of[m.id])]
        ineq_rows.append((cols, -p.demand_quantity))

    lb = np.zeros(n)
    ub = np.empty(n)
    names = [""] * n
    integer = np.zeros(n, dtype=bool)
    for m in machines:
        for p in ix.parts:
            for k in range(1, kk + 1):
                col = ix.q(m.id, p.id, k)
                ub[col] = exp.queue_cap(m, p.id)
                names[col] = f"Q[{m.id},{p.id},{k}]"
                col = ix.x(m.id, p.id, k)
                ub[col] = 1.0 if m.capable(p.id) else 0.0
                names[col] = f"x[{m.id},{p.id},{k}]"
                integer[col] = True
                col = ix.lam(m.id, p.id, k)
                ub[col] = exp.input_cap(m, p.id)
                names[col] = f"lam[{m.id},{p.id},{k}]"
    for p in ix.parts:
        for k in range(1, kk + 1):
            col = ix.out(p.id, k)
            ub[col] = np.inf
            names[col] = f"out[{p.id},{k}]"
    for (m_id, p_id, k), col in ix.w_at.items():
        ub[col] = 1.0
        names[col] = f"w[{m_id},{p_id},{k}]"

    a_eq, b_eq = _assemble(eq_rows, n)
    a_ineq, b_ineq = _assemble(ineq_rows, n)
    return make_problem(_objective(line, n), a_eq=a_eq, b_eq=b_eq,
                        a_ineq=a_ineq, b_ineq=b_ineq,
                        lb=lb, ub=ub, integer=integer, names=names)


def simulate_schedule(line: LineConfig, d, modes) -> np.ndarray:
    """Forward-simulate a mode schedule into a full horizon decision vector.

    `modes` has one row per slot-expanded machine (stage-major order) and one
    column per interval; entries are part ids or -1 for idle. Material moves
    by pass-through routing: first-stage machines draw exactly what they
    process, downstream arrivals split proportionally to same-interval
    processing (all to the first capable machine when a stage is idle).
    The returned vector satisfies the horizon problem's equality rows by
    construction; bound and demand rows depend on the schedule's quality.
    """
    d_phys = validate_degradation(line, d)
    ix = _HorizonIndex(line)
    exp, machines = ix.exp, ix.machines
    d_of = {m.id: d_phys[ix.parent[m.id]] for m in exp.machines}
    kk = ix.k_max
    modes = np.asarray(modes)
    if modes.shape != (len(machines), kk):
        raise ValueError(f"modes must have shape {(len(machines), kk)}")

    z = np.zeros(ix.n_vars)
    pos_of = {m.id: i for i, m in enumerate(machines)}
    produced = {}
    for m in machines:
        for k in range(1, kk + 1):
            cur = modes[pos_of[m.id], k - 1]
            prev = modes[pos_of[m.id], k - 2] if k > 1 else IDLE
            cur = IDLE if cur < 0 else int(cur)
            prev = IDLE if (prev is IDLE or prev < 0) else int(prev)
            for p in ix.parts:
                rate = 0.0
                if cur == p.id:
                    z[ix.x(m.id, p.id, k)] = 1.0
                    rate = (1.0 - d_of[m.id]) * effective_rate(
                        m, p.id, prev, cur, exp.control_interval_hours)
                produced[(m.id, p.id, k)] = rate
                key = (m.id, p.id, k)
                if key in ix.w_at and cur == p.id and prev == cur:
                    z[ix.w_at[key]] = 1.0

    for k in range(1, kk + 1):
        for s, stage in enumerate(exp.stages):
            members = [m for m in machines if m.stage == stage]
            for p in ix.parts:
                if s == 0:
                    for m in members:
                        z[ix.lam(m.id, p.id, k)] = produced[(m.id, p.id, k)]
                else:
                    upstream = sum(produced[(m.id, p.id, k)]
                                   for m in machines if m.stage == exp.stages[s - 1])
                    local = [produced[(m.id, p.id, k)] for m in members]
                    total = sum(local)
                    if total > 0:
                        for m, amount in zip(members, local):
                            z[ix.lam(m.id, p.id, k)] = upstream * amount / total
                    elif upstream > 0:
                        target = next((m for m in members if m.capable(p.id)), members[0])
                        z[ix.lam(target.id, p.id, k)] = upstream

    for m in machines:
        for p in ix.parts:
            level = 0.0
            for k in range(1, kk + 1):
                level += z[ix.lam(m.id, p.id, k)] - produced[(m.id, p.id, k)]
                z[ix.q(m.id, p.id, k)] = level
    final = [m for m in machines if m.stage == exp.stages[-1]]
    for p in ix.parts:
        for k in range(1, kk + 1):
            z[ix.out(p.id, k)] = sum(produced[(m.id, p.id, k)] for m in final)
    return z
