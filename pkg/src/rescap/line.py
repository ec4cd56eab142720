"""Multi-stage production line model.

A line is an ordered sequence of stages, each holding one or more machines.
Machines process parts at part-specific nominal rates (parts per control
interval) and lose a setup fraction of the interval when they switch part
modes. Every machine keeps a per-part input queue. Demand is a quantity per
part due by the end of the horizon; aging parts must clear the first stage
a fixed number of intervals before the deadline.

Degradation is a vector d in [0,1]^n_d with one coordinate per physical
machine; a machine degraded by d_i runs at (1 - d_i) times its nominal rate.
Machines advertising parallel_slots > 1 expand into that many single-slot
virtual machines which all share the parent's degradation coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .util import dump_json, load_json

IDLE = None  # mode value for a machine that is not producing

COST_POLICIES = ("zero", "supplied")


@dataclass(frozen=True)
class PartSpec:
    id: int
    demand_quantity: float          # parts due over the whole horizon
    aging_intervals: int = 0        # first-stage work must end this many intervals early


@dataclass(frozen=True)
class MachineSpec:
    id: int
    stage: str
    rates: dict[int, float]         # part id -> parts per interval; absent part: incapable
    setup_times: dict[int, float] = field(default_factory=dict)   # part id -> hours
    queue_caps: dict[int, float] = field(default_factory=dict)    # part id -> parts
    input_caps: dict[int, float] = field(default_factory=dict)    # part id -> parts per interval
    parallel_slots: int = 1

    def capable(self, part_id: int) -> bool:
        return self.rates.get(part_id, 0.0) > 0.0


@dataclass(frozen=True)
class LineConfig:
    stages: tuple[str, ...]
    machines: tuple[MachineSpec, ...]
    parts: tuple[PartSpec, ...]
    control_interval_hours: float
    horizon_intervals: int
    cost_vector_policy: str = "zero"
    cost_vector: tuple[float, ...] | None = None   # used only when policy is "supplied"

    @property
    def n_machines(self) -> int:
        return len(self.machines)

    @property
    def horizon_hours(self) -> float:
        return self.control_interval_hours * self.horizon_intervals

    def stage_index(self, stage: str) -> int:
        return self.stages.index(stage)

    def stage_machines(self, stage: str) -> list[MachineSpec]:
        return [m for m in self.machines if m.stage == stage]

    def demand_rate(self, part: PartSpec) -> float:
        """Average output rate needed to meet demand, in parts per interval."""
        return part.demand_quantity / self.horizon_intervals

    def aging_rate(self, part: PartSpec) -> float:
        """First-stage rate implied by the shifted deadline, parts per interval."""
        return part.demand_quantity / (self.horizon_intervals - part.aging_intervals)

    def queue_cap(self, machine: MachineSpec, part_id: int) -> float:
        if part_id in machine.queue_caps:
            return machine.queue_caps[part_id]
        return 10.0 * max((p.demand_quantity for p in self.parts), default=0.0)

    def input_cap(self, machine: MachineSpec, part_id: int) -> float:
        if part_id in machine.input_caps:
            return machine.input_caps[part_id]
        top = max((max(m.rates.values(), default=0.0) for m in self.machines), default=0.0)
        return 10.0 * top


def validate_line(line: LineConfig) -> LineConfig:
    if not line.stages:
        raise ValueError("line needs at least one stage")
    if len(set(line.stages)) != len(line.stages):
        raise ValueError("duplicate stage labels")
    if line.control_interval_hours <= 0:
        raise ValueError("control interval must be positive")
    if line.horizon_intervals < 1:
        raise ValueError("horizon must span at least one interval")
    if line.cost_vector_policy not in COST_POLICIES:
        raise ValueError(f"unknown cost policy {line.cost_vector_policy!r}")
    if line.cost_vector_policy == "supplied" and line.cost_vector is None:
        raise ValueError("cost policy 'supplied' requires a cost vector")
    for pos, part in enumerate(line.parts):
        if part.id != pos:
            raise ValueError(f"part ids must run 0..{len(line.parts) - 1} in order")
        if part.demand_quantity < 0:
            raise ValueError(f"part {part.id}: negative demand")
        if not 0 <= part.aging_intervals < line.horizon_intervals:
            raise ValueError(f"part {part.id}: aging must stay inside the horizon")
    part_ids = {p.id for p in line.parts}
    for pos, mach in enumerate(line.machines):
        if mach.id != pos:
            raise ValueError(f"machine ids must run 0..{len(line.machines) - 1} in order")
        if mach.stage not in line.stages:
            raise ValueError(f"machine {mach.id}: unknown stage {mach.stage!r}")
        if mach.parallel_slots < 1:
            raise ValueError(f"machine {mach.id}: parallel_slots must be >= 1")
        for table, label, bound in ((mach.rates, "rate", None),
                                    (mach.setup_times, "setup time", line.control_interval_hours),
                                    (mach.queue_caps, "queue cap", None),
                                    (mach.input_caps, "input cap", None)):
            for pid, val in table.items():
                if pid not in part_ids:
                    raise ValueError(f"machine {mach.id}: unknown part {pid} in {label}s")
                if val < 0:
                    raise ValueError(f"machine {mach.id}: negative {label} for part {pid}")
                if bound is not None and val >= bound:
                    raise ValueError(
                        f"machine {mach.id}: {label} for part {pid} must stay below "
                        f"the control interval")
    for stage in line.stages:
        if not line.stage_machines(stage):
            raise ValueError(f"stage {stage!r} has no machines")
    return line


def validate_degradation(line: LineConfig, d) -> np.ndarray:
    arr = np.asarray(d, dtype=np.float64)
    if arr.shape != (line.n_machines,):
        raise ValueError(
            f"degradation vector must have one entry per machine "
            f"({line.n_machines}), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("degradation entries must be finite")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("degradation entries must lie in [0, 1]")
    return arr


def effective_rate(machine: MachineSpec, part_id: int, prev_mode, cur_mode,
                   interval_hours: float) -> float:
    """Production rate of `machine` for `part_id` this interval.

    Full nominal rate when the mode is unchanged, the switching-reduced rate
    mu * (T - T_setup) / T when the machine just switched into the part, zero
    when it is producing something else or idle.
    """
    if cur_mode != part_id:
        return 0.0
    if part_id not in machine.rates:
        raise KeyError(f"machine {machine.id} cannot process part {part_id}")
    mu = machine.rates[part_id]
    if prev_mode == cur_mode:
        return mu
    setup = machine.setup_times.get(part_id, 0.0)
    return mu * (interval_hours - setup) / interval_hours


@dataclass(frozen=True)
class QueueState:
    """Per-machine, per-part buffer levels after one recursion step.

    `violations` lists (machine id, part id, level, bound) tuples for levels
    outside [0, cap]; levels are reported as computed, never clamped.
    """
    levels: dict[tuple[int, int], float]
    violations: tuple[tuple[int, int, float, float], ...] = ()


def step_queues(line: LineConfig, state: QueueState,
                inflow: dict[tuple[int, int], float],
                outflow: dict[tuple[int, int], float]) -> QueueState:
    """Advance queues one interval: Q' = Q + inflow - outflow per buffer."""
    keys = {(m.id, p.id) for m in line.machines for p in line.parts}
    for name, table in (("state", state.levels), ("inflow", inflow), ("outflow", outflow)):
        extra = set(table) - keys
        if extra:
            raise ValueError(f"{name} references unknown buffers: {sorted(extra)}")
    levels = {}
    violations = []
    for mach in line.machines:
        for part in line.parts:
            key = (mach.id, part.id)
            nxt = (state.levels.get(key, 0.0)
                   + inflow.get(key, 0.0) - outflow.get(key, 0.0))
            levels[key] = nxt
            cap = line.queue_cap(mach, part.id)
            if nxt < 0.0 or nxt > cap:
                violations.append((mach.id, part.id, nxt, cap))
    return QueueState(levels=levels, violations=tuple(violations))


def expand_virtual_machines(line: LineConfig) -> tuple[LineConfig, tuple[int, ...]]:
    """Replace every multi-slot machine by single-slot copies of itself.

    Returns the expanded line plus a map from expanded machine index to the
    index of its physical parent; all copies of one machine share the parent's
    degradation coordinate through that map.
    """
    machines = []
    parent_of = []
    for mach in line.machines:
        for _ in range(mach.parallel_slots):
            machines.append(replace(mach, id=len(machines), parallel_slots=1))
            parent_of.append(mach.id)
    expanded = replace(line, machines=tuple(machines))
    return expanded, tuple(parent_of)


def line_to_json(line: LineConfig, path) -> None:
    doc = {
        "stages": list(line.stages),
        "machines": [
            {
                "id": m.id,
                "stage": m.stage,
                "rates": {str(k): v for k, v in sorted(m.rates.items())},
                "setup_times": {str(k): v for k, v in sorted(m.setup_times.items())},
                "queue_caps": {str(k): v for k, v in sorted(m.queue_caps.items())},
                "input_caps": {str(k): v for k, v in sorted(m.input_caps.items())},
                "parallel_slots": m.parallel_slots,
            }
            for m in line.machines
        ],
        "parts": [
            {
                "id": p.id,
                "demand_quantity": p.demand_quantity,
                "aging_intervals": p.aging_intervals,
            }
            for p in line.parts
        ],
        "control_interval_hours": line.control_interval_hours,
        "horizon_intervals": line.horizon_intervals,
        "cost_vector_policy": line.cost_vector_policy,
    }
    if line.cost_vector is not None:
        doc["cost_vector"] = list(line.cost_vector)
    dump_json(doc, path)


def line_from_json(path) -> LineConfig:
    doc = load_json(path)
    try:
        machines = tuple(
            MachineSpec(
                id=int(m["id"]),
                stage=str(m["stage"]),
                rates={int(k): float(v) for k, v in m["rates"].items()},
                setup_times={int(k): float(v) for k, v in m.get("setup_times", {}).items()},
                queue_caps={int(k): float(v) for k, v in m.get("queue_caps", {}).items()},
                input_caps={int(k): float(v) for k, v in m.get("input_caps", {}).items()},
                parallel_slots=int(m.get("parallel_slots", 1)),
            )
            for m in doc["machines"]
        )
        parts = tuple(
            PartSpec(
                id=int(p["id"]),
                demand_quantity=float(p["demand_quantity"]),
                aging_intervals=int(p.get("aging_intervals", 0)),
            )
            for p in doc["parts"]
        )
        cost = doc.get("cost_vector")
        line = LineConfig(
            stages=tuple(str(s) for s in doc["stages"]),
            machines=machines,
            parts=parts,
            control_interval_hours=float(doc["control_interval_hours"]),
            horizon_intervals=int(doc["horizon_intervals"]),
            cost_vector_policy=str(doc.get("cost_vector_policy", "zero")),
            cost_vector=tuple(float(c) for c in cost) if cost is not None else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad line config document: {exc}") from exc
    return validate_line(line)


def make_analytic2() -> LineConfig:
    """Single stage, two identical machines, one part.

    With rates of 10 and a demand rate of 12 the satisfiable degradation set
    has the closed form d_0 + d_1 <= 0.8, which makes this line the ground
    truth for classifier and volume checks.
    """
    return validate_line(LineConfig(
        stages=("A",),
        machines=(
            MachineSpec(id=0, stage="A", rates={0: 10.0}),
            MachineSpec(id=1, stage="A", rates={0: 10.0}),
        ),
        parts=(PartSpec(id=0, demand_quantity=12.0),),
        control_interval_hours=168.0,
        horizon_intervals=1,
    ))


def make_desk6() -> LineConfig:
    """Three stages of two machines each, two parts, desk-scale.

    Stage-B machines carry two parallel slots apiece, part 1 ages (its
    first-stage work must end one interval early), and every machine needs an
    8 hour setup when it changes parts. Demand is 12 of each part over a
    four-interval horizon. The satisfiable set is the intersection of
    d_0 + d_1 <= 1.3, d_2 + d_3 <= 1.7 and d_4 + d_5 <= 1.4.
    """
    rates = {0: 10.0, 1: 10.0}
    setups = {0: 8.0, 1: 8.0}

    def mach(i, stage, slots=1):
        return MachineSpec(id=i, stage=stage, rates=dict(rates),
                           setup_times=dict(setups), parallel_slots=slots)

    return validate_line(LineConfig(
        stages=("A", "B", "C"),
        machines=(
            mach(0, "A"), mach(1, "A"),
            mach(2, "B", slots=2), mach(3, "B", slots=2),
            mach(4, "C"), mach(5, "C"),
        ),
        parts=(
            PartSpec(id=0, demand_quantity=12.0),
            PartSpec(id=1, demand_quantity=12.0, aging_intervals=1),
        ),
        control_interval_hours=168.0,
        horizon_intervals=4,
    ))


PRESETS = {
    "analytic2": make_analytic2,
    "desk6": make_desk6,
}


def preset(name: str) -> LineConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
