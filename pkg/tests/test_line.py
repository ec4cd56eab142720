import dataclasses

import numpy as np
import pytest

from rescap.line import (
    IDLE, LineConfig, MachineSpec, PartSpec, QueueState, effective_rate,
    expand_virtual_machines, line_from_json, line_to_json, preset,
    step_queues, validate_degradation, validate_line,
)


def two_machine_line(**overrides):
    fields = dict(
        stages=("A",),
        machines=(
            MachineSpec(id=0, stage="A", rates={0: 10.0}),
            MachineSpec(id=1, stage="A", rates={0: 10.0}),
        ),
        parts=(PartSpec(id=0, demand_quantity=12.0),),
        control_interval_hours=168.0,
        horizon_intervals=1,
    )
    fields.update(overrides)
    return LineConfig(**fields)


def test_effective_rate_values():
    m = MachineSpec(id=0, stage="A", rates={0: 10.0}, setup_times={0: 25.0})
    assert effective_rate(m, 0, IDLE, 0, 100.0) == pytest.approx(7.5)
    assert effective_rate(m, 0, 0, 0, 100.0) == 10.0
    assert effective_rate(m, 0, 1, IDLE, 100.0) == 0.0
    assert effective_rate(m, 0, 0, 1, 100.0) == 0.0
    zero_setup = MachineSpec(id=0, stage="A", rates={0: 10.0})
    assert effective_rate(zero_setup, 0, IDLE, 0, 168.0) == 10.0
    with pytest.raises(KeyError):
        effective_rate(m, 7, IDLE, 7, 100.0)


def test_effective_rate_monotone_in_setup():
    rates = []
    for setup in (0.0, 10.0, 50.0, 90.0):
        m = MachineSpec(id=0, stage="A", rates={0: 10.0}, setup_times={0: setup})
        rates.append(effective_rate(m, 0, IDLE, 0, 100.0))
    assert rates == sorted(rates, reverse=True)
    assert rates[0] == 10.0


def test_step_queues_recursion():
    line = two_machine_line()
    q0 = QueueState(levels={(0, 0): 5.0, (1, 0): 0.0})
    q1 = step_queues(line, q0, {(0, 0): 3.0}, {(0, 0): 2.0})
    assert q1.levels[(0, 0)] == pytest.approx(6.0)
    assert q1.levels[(1, 0)] == 0.0
    assert q1.violations == ()

    idle = step_queues(line, QueueState(levels={}), {}, {})
    assert all(v == 0.0 for v in idle.levels.values())

    breach = step_queues(line, QueueState(levels={(0, 0): 1.0}), {}, {(0, 0): 2.0})
    assert breach.levels[(0, 0)] == pytest.approx(-1.0)
    assert len(breach.violations) == 1
    assert breach.violations[0][:2] == (0, 0)

    with pytest.raises(ValueError):
        step_queues(line, QueueState(levels={(9, 9): 1.0}), {}, {})


def test_step_queues_affine_consistency():
    line = two_machine_line()
    rng = np.random.default_rng(3)
    for _ in range(20):
        alpha = rng.uniform(0.0, 1.0)
        beta = 1.0 - alpha
        qa, qb = rng.uniform(0, 5, 2), rng.uniform(0, 5, 2)
        la, lb = rng.uniform(0, 3, 2), rng.uniform(0, 3, 2)
        oa, ob = rng.uniform(0, 3, 2), rng.uniform(0, 3, 2)

        def run(q, lam, out):
            return step_queues(
                line,
                QueueState(levels={(0, 0): q[0], (1, 0): q[1]}),
                {(0, 0): lam[0], (1, 0): lam[1]},
                {(0, 0): out[0], (1, 0): out[1]})

        mixed = run(alpha * qa + beta * qb, alpha * la + beta * lb,
                    alpha * oa + beta * ob)
        sa, sb = run(qa, la, oa), run(qb, lb, ob)
        for key in mixed.levels:
            want = alpha * sa.levels[key] + beta * sb.levels[key]
            assert mixed.levels[key] == pytest.approx(want)


def test_expand_virtual_machines():
    desk = preset("desk6")
    expanded, parent = expand_virtual_machines(desk)
    assert len(expanded.machines) == 8
    assert parent == (0, 1, 2, 2, 3, 3, 4, 5)
    assert all(m.parallel_slots == 1 for m in expanded.machines)
    assert [m.id for m in expanded.machines] == list(range(8))
    # total stage throughput is preserved: slots x parent rate per part
    for part in desk.parts:
        for stage in desk.stages:
            before = sum(m.rates.get(part.id, 0.0) * m.parallel_slots
                         for m in desk.stage_machines(stage))
            after = sum(m.rates.get(part.id, 0.0)
                        for m in expanded.stage_machines(stage))
            assert after == pytest.approx(before)

    same, ident = expand_virtual_machines(preset("analytic2"))
    assert ident == (0, 1)
    assert same.machines == preset("analytic2").machines

    tri = two_machine_line(machines=(
        MachineSpec(id=0, stage="A", rates={0: 10.0, 1: 4.0}, parallel_slots=3),),
        parts=(PartSpec(id=0, demand_quantity=1.0), PartSpec(id=1, demand_quantity=1.0)))
    exp3, par3 = expand_virtual_machines(tri)
    assert len(exp3.machines) == 3 and par3 == (0, 0, 0)
    assert all(m.rates == {0: 10.0, 1: 4.0} for m in exp3.machines)


def test_validate_line_rejections():
    good = two_machine_line()
    validate_line(good)
    with pytest.raises(ValueError):
        validate_line(dataclasses.replace(good, stages=()))
    with pytest.raises(ValueError):
        validate_line(dataclasses.replace(good, stages=("A", "A")))
    with pytest.raises(ValueError):
        validate_line(dataclasses.replace(
            good, parts=(PartSpec(id=0, demand_quantity=12.0, aging_intervals=1),)))
    with pytest.raises(ValueError):
        validate_line(dataclasses.replace(
            good, machines=(MachineSpec(id=0, stage="B", rates={0: 1.0}),
                            good.machines[1])))
    with pytest.raises(ValueError):
        validate_line(dataclasses.replace(
            good, machines=(MachineSpec(id=0, stage="A", rates={0: 10.0},
                                        setup_times={0: 168.0}),
                            good.machines[1])))
    with pytest.raises(ValueError):
        validate_line(dataclasses.replace(
            good, machines=(MachineSpec(id=1, stage="A", rates={0: 1.0}),
                            good.machines[1])))
    with pytest.raises(ValueError):
        validate_line(dataclasses.replace(good, cost_vector_policy="supplied"))
    with pytest.raises(ValueError):
        validate_line(dataclasses.replace(good, stages=("A", "B")))


def test_validate_degradation():
    line = two_machine_line()
    d = validate_degradation(line, [0.25, 0.5])
    assert d.dtype == np.float64 and d.shape == (2,)
    for bad in ([0.5], [0.5, 1.5], [-0.1, 0.0], [np.nan, 0.0]):
        with pytest.raises(ValueError):
            validate_degradation(line, bad)


def test_default_caps():
    desk = preset("desk6")
    assert desk.queue_cap(desk.machines[0], 0) == pytest.approx(120.0)
    assert desk.input_cap(desk.machines[0], 0) == pytest.approx(100.0)
    custom = MachineSpec(id=0, stage="A", rates={0: 10.0},
                         queue_caps={0: 7.0}, input_caps={0: 3.0})
    line = two_machine_line(machines=(custom, two_machine_line().machines[1]))
    assert line.queue_cap(custom, 0) == 7.0
    assert line.input_cap(custom, 0) == 3.0


def test_presets():
    a2 = preset("analytic2")
    assert len(a2.stages) == 1 and len(a2.machines) == 2 and len(a2.parts) == 1
    assert a2.demand_rate(a2.parts[0]) == pytest.approx(12.0)
    desk = preset("desk6")
    assert len(desk.stages) == 3 and len(desk.machines) == 6 and len(desk.parts) == 2
    assert [m.parallel_slots for m in desk.machines] == [1, 1, 2, 2, 1, 1]
    assert desk.demand_rate(desk.parts[0]) == pytest.approx(3.0)
    assert desk.aging_rate(desk.parts[1]) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        preset("nope")


def test_json_roundtrip_is_stable(tmp_path):
    desk = preset("desk6")
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    line_to_json(desk, p1)
    back = line_from_json(p1)
    assert back == desk
    line_to_json(back, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_json_rejects_bad_documents(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"stages": ["A"]}')
    with pytest.raises(ValueError):
        line_from_json(path)
