"""Deterministic bounded-variable linear program solver.

Two-phase revised simplex over the computational form

    A_eq x = b_eq,  A_ineq x + s = b_ineq,  lb <= x <= ub,  s >= 0,

with artificial variables on every row in phase 1. Pivot selection is
Dantzig's rule with lowest-index tie-breaking, switching to Bland's rule
after 3x the expected iteration count to rule out cycling. No randomness,
no presolve beyond skipping fixed columns: identical input bytes produce
identical output.

Problems here are small (desk-scale, at most a few thousand variables), so
the basis is refactorized densely at every iteration; exactness and
reproducibility are worth more than speed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .util import dump_json, load_json

PIVOT_TOL = 1e-10
DUAL_TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LpInputError(ValueError):
    """Malformed problem data (NaN, wrong shapes, crossed bounds)."""


@dataclass
class TripletMatrix:
    """Sparse matrix in coordinate (triplet) form with a fixed row order."""

    shape: tuple[int, int]
    rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    cols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    vals: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.float64))

    @classmethod
    def from_entries(cls, shape, entries) -> "TripletMatrix":
        rows = np.array([e[0] for e in entries], dtype=np.int64)
        cols = np.array([e[1] for e in entries], dtype=np.int64)
        vals = np.array([e[2] for e in entries], dtype=np.float64)
        return cls(shape=tuple(shape), rows=rows, cols=cols, vals=vals)

    @classmethod
    def from_dense(cls, a) -> "TripletMatrix":
        a = np.asarray(a, dtype=np.float64)
        rows, cols = np.nonzero(a)
        return cls(shape=a.shape, rows=rows, cols=cols, vals=a[rows, cols])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.float64)
        # accumulate duplicates so builders may emit repeated coordinates
        np.add.at(out, (self.rows, self.cols), self.vals)
        return out


@dataclass
class LpProblem:
    """min c.x subject to a_eq x = b_eq, a_ineq x <= b_ineq, lb <= x <= ub."""

    c: np.ndarray
    a_eq: TripletMatrix
    b_eq: np.ndarray
    a_ineq: TripletMatrix
    b_ineq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray | None = None  # advisory markers; solve() ignores them
    names: list[str] | None = None

    @property
    def n_vars(self) -> int:
        return len(self.c)

    def validate(self) -> None:
        n = self.n_vars
        for mat, rhs, tag in ((self.a_eq, self.b_eq, "eq"), (self.a_ineq, self.b_ineq, "ineq")):
            if mat.shape[1] != n:
                raise LpInputError(f"{tag} matrix has {mat.shape[1]} columns, expected {n}")
            if mat.shape[0] != len(rhs):
                raise LpInputError(f"{tag} rhs length {len(rhs)} != {mat.shape[0]} rows")
            if len(rhs) and not np.all(np.isfinite(rhs)):
                raise LpInputError(f"{tag} rhs contains NaN or infinity")
            if len(mat.vals) and not np.all(np.isfinite(mat.vals)):
                raise LpInputError(f"{tag} matrix contains NaN or infinity")
        if len(self.lb) != n or len(self.ub) != n:
            raise LpInputError("bound arrays must match variable count")
        if not np.all(np.isfinite(self.c)):
            raise LpInputError("objective contains NaN or infinity")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)):
            raise LpInputError("bounds contain NaN")
        if np.any(self.lb > self.ub):
            raise LpInputError("crossed bounds (lb > ub)")


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None
    objective: float | None
    iterations: int
    phase1_objective: float | None = None


def make_problem(c, a_eq=None, b_eq=None, a_ineq=None, b_ineq=None,
                 lb=None, ub=None, integer=None, names=None) -> LpProblem:
    c = np.asarray(c, dtype=np.float64)
    n = len(c)

    def _mat(m, rhs):
        if m is None:
            return TripletMatrix((0, n)), np.zeros(0)
        if isinstance(m, TripletMatrix):
            return m, np.asarray(rhs, dtype=np.float64)
        return TripletMatrix.from_dense(m), np.asarray(rhs, dtype=np.float64)

    a_eq, b_eq = _mat(a_eq, b_eq)
    a_ineq, b_ineq = _mat(a_ineq, b_ineq)
    lb = np.full(n, -np.inf) if lb is None else np.asarray(lb, dtype=np.float64)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=np.float64)
    integer = None if integer is None else np.asarray(integer, dtype=bool)
    prob = LpProblem(c, a_eq, b_eq, a_ineq, b_ineq, lb, ub, integer, names)
    prob.validate()
    return prob


def solve(problem: LpProblem, feas_tol: float = 1e-7) -> LpSolution:
    """Solve the LP. Integrality markers are ignored (callers pre-relax)."""
    problem.validate()
    n = problem.n_vars
    m_eq = problem.a_eq.shape[0]
    m_ineq = problem.a_ineq.shape[0]
    m = m_eq + m_ineq

    a = np.zeros((m, n + m_ineq + m))
    a[:m_eq, :n] = problem.a_eq.to_dense()
    a[m_eq:, :n] = problem.a_ineq.to_dense()
    a[m_eq:, n:n + m_ineq] = np.eye(m_ineq)  # slacks turn <= rows into equalities
    b = np.concatenate([problem.b_eq, problem.b_ineq])

    lb = np.concatenate([problem.lb, np.zeros(m_ineq), np.zeros(m)])
    ub = np.concatenate([problem.ub, np.full(m_ineq, np.inf), np.full(m, np.inf)])

    if m == 0:
        # pure bound problem: each variable sits at whichever bound its cost prefers
        if np.any((problem.c > 0) & ~np.isfinite(problem.lb)) or \
           np.any((problem.c < 0) & ~np.isfinite(problem.ub)):
            return LpSolution(UNBOUNDED, None, None, 0)
        fallback = np.where(np.isfinite(problem.lb), problem.lb,
                            np.where(np.isfinite(problem.ub), problem.ub, 0.0))
        x = np.where(problem.c > 0, problem.lb,
                     np.where(problem.c < 0, problem.ub, fallback))
        return LpSolution(OPTIMAL, x, float(problem.c @ x), 0)

    # non-artificial columns start at the finite bound nearest their value range
    x = np.zeros(n + m_ineq + m)
    state = np.zeros(n + m_ineq + m, dtype=np.int8)  # -1 lower, +1 upper, 0 free
    for j in range(n + m_ineq):
        if np.isfinite(lb[j]):
            x[j], state[j] = lb[j], -1
        elif np.isfinite(ub[j]):
            x[j], state[j] = ub[j], +1

    # artificial basis: one per row, signed to absorb the initial residual
    resid = b - a[:, :n + m_ineq] @ x[:n + m_ineq]
    art = np.arange(n + m_ineq, n + m_ineq + m)
    for k in range(m):
        a[k, art[k]] = 1.0 if resid[k] >= 0 else -1.0
    x[art] = np.abs(resid)
    basis = art.copy()

    c1 = np.zeros(n + m_ineq + m)
    c1[art] = 1.0
    iters = 0

    iters, _ = _simplex_loop(a, b, c1, lb, ub, x, state, basis, iters)
    p1_obj = float(np.sum(x[art]))
    if p1_obj > feas_tol:
        return LpSolution(INFEASIBLE, None, None, iters, phase1_objective=p1_obj)

    # pin artificials at zero and optimize the real objective
    lb[art] = 0.0
    ub[art] = 0.0
    x[art] = 0.0
    c2 = np.zeros(n + m_ineq + m)
    c2[:n] = problem.c
    iters, bounded = _simplex_loop(a, b, c2, lb, ub, x, state, basis, iters)
    if not bounded:
        return LpSolution(UNBOUNDED, None, None, iters, phase1_objective=p1_obj)

    z = x[:n].copy()
    _audit(problem, z, feas_tol)
    return LpSolution(OPTIMAL, z, float(problem.c @ z), iters, phase1_objective=p1_obj)


def _simplex_loop(a, b, c, lb, ub, x, state, basis, iters):
    """Run one phase to optimality. Returns (iterations, bounded)."""
    m, ncols = a.shape
    expected = 2 * (m + ncols)
    bland_after = iters + 3 * expected
    max_iters = iters + 100 * expected + 1000
    in_basis = np.zeros(ncols, dtype=bool)
    in_basis[basis] = True
    span_ok = (ub - lb) > PIVOT_TOL

    while True:
        bmat = a[:, basis]
        nb_mask = ~in_basis
        # refresh basic values from scratch each iteration to stop drift
        rhs = b - a[:, nb_mask] @ x[nb_mask]
        x[basis] = np.linalg.solve(bmat, rhs)

        y = np.linalg.solve(bmat.T, c[basis])
        d = c - y @ a

        # at-lower variables may rise, at-upper may fall, free ones may do either
        can_enter = nb_mask & span_ok & (
            ((state < 0) & (d < -DUAL_TOL)) | ((state > 0) & (d > DUAL_TOL))
            | ((state == 0) & (np.abs(d) > DUAL_TOL)))
        if not np.any(can_enter):
            return iters, True
        if iters >= max_iters:
            raise RuntimeError("simplex iteration limit exceeded")

        cand = np.nonzero(can_enter)[0]
        if iters < bland_after:
            e = cand[int(np.argmax(np.abs(d[cand])))]
        else:
            e = cand[0]  # Bland's rule: lowest index, guarantees termination

        if state[e] == 0:
            delta = 1.0 if d[e] < 0 else -1.0
        else:
            delta = 1.0 if state[e] < 0 else -1.0
        w = np.linalg.solve(bmat, a[:, e])
        g = delta * w  # basic variable k decreases at rate g[k] per unit step

        t_flip = ub[e] - lb[e] if np.isfinite(ub[e]) and np.isfinite(lb[e]) else np.inf
        t_best = t_flip
        leave_pos = -1
        leave_to = 0
        for k in range(m):
            gk = g[k]
            bk = basis[k]
            if gk > PIVOT_TOL and np.isfinite(lb[bk]):
                tk = (x[bk] - lb[bk]) / gk
                to = -1
            elif gk < -PIVOT_TOL and np.isfinite(ub[bk]):
                tk = (x[bk] - ub[bk]) / gk
                to = +1
            else:
                continue
            if tk < t_best - PIVOT_TOL or (tk < t_best + PIVOT_TOL and leave_pos >= 0
                                           and bk < basis[leave_pos]):
                t_best = tk
                leave_pos = k
                leave_to = to

        if not np.isfinite(t_best):
            return iters + 1, False
        t = max(t_best, 0.0)

        x[e] = x[e] + delta * t
        x[basis] -= t * g
        if leave_pos < 0:
            state[e] = -state[e]  # bound flip, basis unchanged
        else:
            out = basis[leave_pos]
            x[out] = lb[out] if leave_to < 0 else ub[out]
            state[out] = leave_to
            basis[leave_pos] = e
            in_basis[out] = False
            in_basis[e] = True
            state[e] = 0
        iters += 1


def _audit(problem: LpProblem, z: np.ndarray, feas_tol: float) -> None:
    res = solution_residual(problem, z)
    if res > 100 * feas_tol:
        raise RuntimeError(f"solver produced an invalid optimum (residual {res:.3e})")


def solution_residual(problem: LpProblem, z: np.ndarray) -> float:
    """Worst constraint violation of z, checked against the raw problem data."""
    worst = 0.0
    if problem.a_eq.shape[0]:
        worst = max(worst, float(np.max(np.abs(problem.a_eq.to_dense() @ z - problem.b_eq))))
    if problem.a_ineq.shape[0]:
        worst = max(worst, float(np.max(problem.a_ineq.to_dense() @ z - problem.b_ineq, initial=0.0)))
    lo = problem.lb - z
    hi = z - problem.ub
    worst = max(worst, float(np.max(lo[np.isfinite(problem.lb)], initial=0.0)))
    worst = max(worst, float(np.max(hi[np.isfinite(problem.ub)], initial=0.0)))
    return worst


def _mat_payload(mat: TripletMatrix, rhs) -> dict:
    return {
        "shape": list(mat.shape),
        "rows": [int(r) for r in mat.rows],
        "cols": [int(c) for c in mat.cols],
        "vals": [float(v) for v in mat.vals],
        "rhs": [float(v) for v in rhs],
    }


def problem_to_json(problem: LpProblem, path) -> None:
    """Dump the problem in a documented triplet format for external checks."""

    def _bound(v):
        return float(v) if np.isfinite(v) else ("-inf" if v < 0 else "inf")

    payload = {
        "n_vars": problem.n_vars,
        "objective": [float(v) for v in problem.c],
        "eq": _mat_payload(problem.a_eq, problem.b_eq),
        "ineq": _mat_payload(problem.a_ineq, problem.b_ineq),
        "lower": [_bound(v) for v in problem.lb],
        "upper": [_bound(v) for v in problem.ub],
        "integer": [] if problem.integer is None else
                   [int(i) for i in np.nonzero(problem.integer)[0]],
        "names": problem.names or [],
    }
    dump_json(payload, path)


def problem_from_json(path) -> LpProblem:
    raw = load_json(path)
    n = raw["n_vars"]

    def _mat(block):
        return TripletMatrix(
            shape=tuple(block["shape"]),
            rows=np.array(block["rows"], dtype=np.int64),
            cols=np.array(block["cols"], dtype=np.int64),
            vals=np.array(block["vals"], dtype=np.float64),
        ), np.array(block["rhs"], dtype=np.float64)

    a_eq, b_eq = _mat(raw["eq"])
    a_ineq, b_ineq = _mat(raw["ineq"])
    lb = np.array([float(v) for v in raw["lower"]])
    ub = np.array([float(v) for v in raw["upper"]])
    integer = np.zeros(n, dtype=bool)
    integer[raw.get("integer", [])] = True
    prob = LpProblem(np.array(raw["objective"]), a_eq, b_eq, a_ineq, b_ineq,
                     lb, ub, integer, raw.get("names") or None)
    prob.validate()
    return prob
