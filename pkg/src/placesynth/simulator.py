"""Topology-aware cost model for lowered reduction programs.

Each group's traffic crosses the interconnect of its span level (the topmost
hardware level where members differ).  Groups of one step that span the same
switch instance share its bandwidth evenly.  Per-group times use the usual
pipelined ring / tree collective formulas; a step lasts as long as its
slowest group and steps run back to back.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .dsl import LoweredProgram
from .semantics import Collective, SemanticError, apply_step, initial_context, row_set
from .topology import SystemModel, device_count


class Algo(enum.Enum):
    Ring = "ring"
    Tree = "tree"


@dataclass(frozen=True)
class CostModelConfig:
    algo: Algo = Algo.Ring
    payload_bytes: float = float(1 << 30)

    def __post_init__(self) -> None:
        if not self.payload_bytes > 0:
            raise ValueError("payload_bytes must be positive")


@dataclass(frozen=True)
class StepCost:
    seconds: float
    bottleneck_level: int | None
    flows: int
    bytes_per_device: float

    def to_dict(self, system: SystemModel | None = None) -> dict:
        out = {
            "seconds": self.seconds,
            "bottleneck_level": self.bottleneck_level,
            "flows_sharing": self.flows,
            "bytes_per_device": self.bytes_per_device,
        }
        if system is not None and self.bottleneck_level is not None:
            out["bottleneck_name"] = system.levels[self.bottleneck_level].name
        return out


@dataclass(frozen=True)
class CostReport:
    total_seconds: float
    steps: tuple[StepCost, ...] = field(default_factory=tuple)


class SimulationError(ValueError):
    pass


def span_level(group: Sequence[int], system: SystemModel) -> int:
    """Topmost hardware level at which the members' coordinates differ."""
    if len(group) < 2:
        raise ValueError("span_level needs at least two devices")
    coords = [system.hardware_coordinate(d) for d in group]
    for lvl in range(len(system.levels)):
        if len({c[lvl] for c in coords}) > 1:
            return lvl
    raise ValueError(f"group {list(group)} repeats a device")


def _group_time(op: Collective, n: int, c: float, bw: float, lat: float, algo: Algo) -> float:
    """Standard pipelined collective times for ``n`` devices moving ``c`` bytes each."""
    one_pass = (n - 1) / n * c / bw
    if algo is Algo.Tree and op is not Collective.ReduceScatter and op is not Collective.AllGather:
        t = 2.0 * c / bw if op is Collective.AllReduce else c / bw
    elif op is Collective.AllReduce:
        # written as two passes so ReduceScatter + AllGather ties with it exactly
        t = 2.0 * one_pass
    else:
        t = one_pass
    return t + lat


def step_cost(
    groups: Sequence[Sequence[int]],
    op: Collective,
    c: float | Sequence[float],
    system: SystemModel,
    cfg: CostModelConfig,
) -> StepCost:
    """Time of one step; ``c`` is the per-device payload, scalar or per group."""
    if not groups:
        return StepCost(0.0, None, 0, 0.0)
    sizes = [c] * len(groups) if isinstance(c, (int, float)) else list(c)
    switch = []
    for g in groups:
        lvl = span_level(g, system)
        parent = system.hardware_coordinate(g[0])[:lvl]
        switch.append((lvl, parent))
    sharing = Counter(switch)
    best = (-1.0, None, 0, 0.0)
    for g, sw, cg in zip(groups, switch, sizes):
        lvl = sw[0]
        spec = system.levels[lvl]
        flows = sharing[sw]
        t = _group_time(op, len(g), cg, spec.bandwidth / flows, spec.latency, cfg.algo)
        if t > best[0]:
            best = (t, lvl, flows, cg)
    return StepCost(*best)


def simulate(lowered: LoweredProgram, system: SystemModel, cfg: CostModelConfig) -> CostReport:
    """Serialize the steps, tracking each device's live payload through the semantics.

    A group's payload is ``D * rows / K`` for the largest non-empty row count
    among its members before or after the step (the input of a reduce-scatter,
    the output of an all-gather).
    """
    K = device_count(system)
    ctx = initial_context(K)
    per_row = cfg.payload_bytes / K
    costs = []
    for i, st in enumerate(lowered.steps):
        try:
            nxt = apply_step(ctx, st.groups, st.op)
        except SemanticError as exc:
            raise SimulationError(f"refusing to simulate an invalid program: {exc.at_step(i)}") from None
        payload = []
        for g in st.groups:
            rows = max(
                max(row_set(ctx.states[d], K).bit_count(), row_set(nxt.states[d], K).bit_count())
                for d in g
            )
            payload.append(per_row * rows)
        costs.append(step_cost(st.groups, st.op, payload, system, cfg))
        ctx = nxt
    # fsum keeps equal-work splits (e.g. AllReduce vs ReduceScatter + AllGather) exactly tied
    return CostReport(math.fsum(s.seconds for s in costs), tuple(costs))


@dataclass(frozen=True)
class RankedProgram:
    index: int  # position in the input list
    seconds: float
    speedup: float  # baseline seconds / this program's seconds


def rank(reports: Sequence[CostReport], lengths: Sequence[int], baseline: int) -> list[RankedProgram]:
    """Order programs by simulated time; ties keep shorter, then earlier, programs first."""
    if not reports:
        raise ValueError("nothing to rank")
    if not 0 <= baseline < len(reports):
        raise ValueError("baseline program missing")
    base = reports[baseline].total_seconds
    order = sorted(range(len(reports)), key=lambda i: (reports[i].total_seconds, lengths[i], i))
    return [
        RankedProgram(i, reports[i].total_seconds,
                      base / reports[i].total_seconds if reports[i].total_seconds > 0 else 1.0)
        for i in order
    ]

