import dataclasses
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from rescap.line import PartSpec, preset
from rescap.oracle import (
    FEASIBLE, INFEASIBLE, STRUCTURAL, BudgetExhausted, OracleBudget,
    OriginInfeasible, check_feasibility, extend_ray, maximize_direction,
)
from rescap.line import LineConfig, MachineSpec


def overloaded_line():
    # total healthy rate 20 < demand 25: nothing is satisfiable
    return dataclasses.replace(
        preset("analytic2"), parts=(PartSpec(id=0, demand_quantity=25.0),))


def test_check_feasibility_labels():
    a2 = preset("analytic2")
    assert check_feasibility(a2, [0.0, 0.0]).label == FEASIBLE
    assert check_feasibility(a2, [1.0, 1.0]).label == INFEASIBLE
    assert check_feasibility(a2, [0.5, 0.4]).label == INFEASIBLE
    assert check_feasibility(a2, [0.5, 0.2]).feasible


def test_budget_counts_and_exhausts():
    a2 = preset("analytic2")
    budget = OracleBudget(3)
    labels = [check_feasibility(a2, [0.1 * i, 0.0], budget) for i in range(3)]
    assert [lab.oracle_call_index for lab in labels] == [0, 1, 2]
    assert budget.used_calls == 3 and budget.remaining == 0
    with pytest.raises(BudgetExhausted):
        check_feasibility(a2, [0.0, 0.0], budget)
    assert budget.used_calls == 3
    # unmetered calls carry no index
    assert check_feasibility(a2, [0.0, 0.0]).oracle_call_index == -1
    with pytest.raises(ValueError):
        OracleBudget(0)


def test_budget_accounting_matches_lp_solves():
    desk = preset("desk6")
    strict = OracleBudget(20)
    for i in range(4):
        check_feasibility(desk, np.full(6, 0.1 * i), strict)
    maximize_direction(desk, 0, budget=strict, charge_boundary=True)
    extend_ray(desk, np.ones(6), budget=strict, charge_boundary=True)
    assert strict.used_calls == strict.lp_solves == 6

    loose = OracleBudget(20)
    maximize_direction(desk, 0, budget=loose)
    extend_ray(desk, np.ones(6), budget=loose)
    check_feasibility(desk, np.zeros(6), loose)
    assert loose.used_calls == 1
    assert loose.lp_solves == 3


def test_structural_shortcut_label():
    line = LineConfig(
        stages=("A", "B"),
        machines=(MachineSpec(id=0, stage="A", rates={0: 10.0}),
                  MachineSpec(id=1, stage="B", rates={})),
        parts=(PartSpec(id=0, demand_quantity=5.0),),
        control_interval_hours=100.0,
        horizon_intervals=1,
    )
    budget = OracleBudget(2)
    label = check_feasibility(line, [0.0, 0.0], budget)
    assert label.label == INFEASIBLE and label.solver_status == STRUCTURAL
    assert budget.used_calls == 1 and budget.lp_solves == 0


def test_monotonicity_seeded_pairs():
    desk = preset("desk6")
    rng = np.random.default_rng(17)
    for _ in range(50):
        d = rng.uniform(0, 1, 6)
        feasible = check_feasibility(desk, d).feasible
        if feasible:
            weaker = d * rng.uniform(0, 1, 6)
            assert check_feasibility(desk, weaker).feasible
        else:
            stronger = d + (1 - d) * rng.uniform(0, 1, 6)
            assert not check_feasibility(desk, stronger).feasible


def test_convexity_seeded_midpoints():
    desk = preset("desk6")
    rng = np.random.default_rng(23)
    found = 0
    while found < 30:
        a, b = rng.uniform(0, 1, 6), rng.uniform(0, 1, 6)
        if check_feasibility(desk, a).feasible and check_feasibility(desk, b).feasible:
            found += 1
            assert check_feasibility(desk, (a + b) / 2).feasible


def test_maximize_direction_points():
    a2 = preset("analytic2")
    assert maximize_direction(a2, 0) == pytest.approx([0.8, 0.0], abs=1e-7)
    assert maximize_direction(a2, 1) == pytest.approx([0.0, 0.8], abs=1e-7)


def test_extend_ray_points():
    a2 = preset("analytic2")
    u = np.array([1.0, 1.0]) / np.sqrt(2.0)
    assert extend_ray(a2, u) == pytest.approx([0.4, 0.4], abs=1e-7)
    # axis rays reproduce the axis maxima
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = 1.0
        assert extend_ray(a2, e) == pytest.approx(maximize_direction(a2, axis), abs=1e-7)
    # zero components stay zero
    desk = preset("desk6")
    u6 = np.array([1.0, 1.0, 0.0, 0.0, 1.0, 1.0])
    point = extend_ray(desk, u6)
    assert point[2] == point[3] == 0.0
    assert point[0] > 0


def test_boundary_points_sit_on_the_boundary():
    cases = [
        (preset("analytic2"), [np.array([1.0, 1.0]), np.array([1.0, 0.3])]),
        (preset("desk6"), [np.ones(6), np.array([1, 1, 0.2, 0.2, 1, 1.0])]),
    ]
    for line, rays in cases:
        points = [maximize_direction(line, axis) for axis in range(line.n_machines)]
        points += [extend_ray(line, u) for u in rays]
        for point in points:
            assert check_feasibility(line, point).feasible
            grown = np.clip(point * 1.001, 0.0, 1.0)
            if np.any(grown > point):
                assert not check_feasibility(line, grown).feasible


def test_origin_infeasible_reported():
    line = overloaded_line()
    with pytest.raises(OriginInfeasible):
        extend_ray(line, np.array([1.0, 1.0]))
    with pytest.raises(OriginInfeasible):
        maximize_direction(line, 0)
    assert not check_feasibility(line, [0.0, 0.0]).feasible


def test_concurrent_budget_is_exact():
    a2 = preset("analytic2")
    budget = OracleBudget(64)
    rng = np.random.default_rng(1)
    points = rng.uniform(0, 1, size=(80, 2))

    def probe(d):
        try:
            return check_feasibility(a2, d, budget).oracle_call_index
        except BudgetExhausted:
            return None

    with ThreadPoolExecutor(max_workers=8) as pool:
        indices = list(pool.map(probe, points))
    granted = [i for i in indices if i is not None]
    assert budget.used_calls == 64
    assert sorted(granted) == list(range(64))
