"""Feasibility oracle over degradation vectors.

A degradation vector is satisfiable when the aggregated single-interval LP
still meets every demand and aging target; the oracle labels vectors by
solving that LP. It also supplies boundary points of the satisfiable set,
either along coordinate axes or along arbitrary rays, by re-solving with
degradation as a decision variable.

Budgets meter oracle usage. Every feasibility check charges the budget;
boundary-point solves are free by default (they seed learners rather than
answer queries) and can be charged with `charge_boundary=True` for strict
accounting. Budgets also count every demand-constrained LP solve they see,
charged or not, so accounting can be audited exactly.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from . import problems, simplex
from .line import LineConfig, validate_degradation

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"

STRUCTURAL = "structural"  # refuted by connectivity alone, no LP solved


class BudgetExhausted(Exception):
    """The oracle-call budget has no calls left."""


class OriginInfeasible(Exception):
    """Demand is unsatisfiable even with zero degradation; no boundary exists."""


@dataclass(frozen=True)
class FeasibilityLabel:
    label: str                 # FEASIBLE or INFEASIBLE
    solver_status: str         # LP status, or STRUCTURAL when no LP ran
    oracle_call_index: int     # position in the owning budget, -1 if unmetered

    @property
    def feasible(self) -> bool:
        return self.label == FEASIBLE


class OracleBudget:
    """Thread-safe call meter: at most `max_calls` charged oracle queries.

    `lp_solves` counts every demand-constrained LP the oracle runs under this
    budget, including uncharged boundary solves.
    """

    def __init__(self, max_calls: int):
        if max_calls < 1:
            raise ValueError("budget must allow at least one call")
        self.max_calls = int(max_calls)
        self.used_calls = 0
        self.lp_solves = 0
        self._lock = threading.Lock()

    def charge(self) -> int:
        with self._lock:
            if self.used_calls >= self.max_calls:
                raise BudgetExhausted(f"all {self.max_calls} oracle calls used")
            self.used_calls += 1
            return self.used_calls - 1

    def count_solve(self) -> None:
        with self._lock:
            self.lp_solves += 1

    @property
    def remaining(self) -> int:
        with self._lock:
            return self.max_calls - self.used_calls


def check_feasibility(line: LineConfig, d, budget: OracleBudget | None = None,
                      share_constraint: bool = True) -> FeasibilityLabel:
    """Label one degradation vector by aggregated-LP feasibility."""
    d = validate_degradation(line, d)
    index = budget.charge() if budget is not None else -1
    try:
        problem = problems.build_aggregated_lp(line, d, share_constraint=share_constraint)
    except problems.StructuralInfeasibility:
        return FeasibilityLabel(INFEASIBLE, STRUCTURAL, index)
    if budget is not None:
        budget.count_solve()
    sol = simplex.solve(problem)
    if sol.status == simplex.OPTIMAL:
        return FeasibilityLabel(FEASIBLE, sol.status, index)
    if sol.status == simplex.INFEASIBLE:
        return FeasibilityLabel(INFEASIBLE, sol.status, index)
    raise RuntimeError(f"feasibility LP ended {sol.status}; problem is malformed")


def _boundary_solve(problem, col, budget, charge_boundary):
    if budget is not None:
        if charge_boundary:
            budget.charge()
        budget.count_solve()
    sol = simplex.solve(problem)
    if sol.status == simplex.INFEASIBLE:
        raise OriginInfeasible(
            "demand is unsatisfiable even with zero degradation")
    if sol.status != simplex.OPTIMAL:
        raise RuntimeError(f"boundary LP ended {sol.status}; problem is malformed")
    return float(sol.x[col])


def maximize_direction(line: LineConfig, axis: int,
                       budget: OracleBudget | None = None,
                       charge_boundary: bool = False,
                       share_constraint: bool = True) -> np.ndarray:
    """Largest satisfiable degradation along one axis, all others zero.

    Returns the boundary point (0, ..., d_i*, ..., 0); d_i* is 1 when the
    axis never binds (idle machines, zero demand).
    """
    problem, col = problems.build_axis_boundary_lp(
        line, axis, share_constraint=share_constraint)
    d_star = _boundary_solve(problem, col, budget, charge_boundary)
    point = np.zeros(line.n_machines)
    point[axis] = min(max(d_star, 0.0), 1.0)
    return point


def extend_ray(line: LineConfig, u,
               budget: OracleBudget | None = None,
               charge_boundary: bool = False,
               share_constraint: bool = True) -> np.ndarray:
    """Farthest satisfiable point along the ray alpha * u inside the unit cube.

    `u` must be non-negative with a positive component; coordinates where
    u is zero stay zero. Raises OriginInfeasible when not even d = 0 works.
    """
    u = np.asarray(u, dtype=np.float64)
    problem, col = problems.build_ray_extension_lp(
        line, u, share_constraint=share_constraint)
    alpha = _boundary_solve(problem, col, budget, charge_boundary)
    return np.clip(alpha * u, 0.0, 1.0)
