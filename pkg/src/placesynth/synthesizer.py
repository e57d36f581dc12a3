"""Enumerative synthesis of reduction programs over the reduction-axis hierarchy."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .dsl import (
    Form,
    FormKind,
    GroupSet,
    LoweredProgram,
    NoOpInstruction,
    Program,
    ReductionInstruction,
    Step,
    derive_groups,
    lower,
    run_program,
)
from .hierarchy import HierarchyKind, SynthesisHierarchy, build_hierarchy, reduction_group_partition
from .placement import ParallelismMatrix
from .semantics import COLLECTIVES, Collective, StateContext, goal_context, initial_context, try_step
from .topology import SystemModel, device_count


@dataclass(frozen=True)
class SynthesisConfig:
    size_limit: int = 5
    dedupe_states: bool = True

    def __post_init__(self) -> None:
        if self.size_limit < 1:
            raise ValueError("size_limit must be at least 1")


@dataclass
class SearchStats:
    explored: int = 0  # prefixes whose state was computed
    pruned: int = 0  # prefixes rejected by the semantics or the prune hook
    memo_hits: int = 0
    elapsed_s: float = 0.0

    def to_dict(self) -> dict:
        return {"explored": self.explored, "pruned": self.pruned, "memo_hits": self.memo_hits}


@dataclass
class SynthesisResult:
    hierarchy: SynthesisHierarchy
    programs: list[tuple[Program, LoweredProgram]]
    stats: SearchStats = field(default_factory=SearchStats)


def _forms(slice_: int) -> list[Form]:
    return (
        [Form.inside()]
        + [Form.parallel(j) for j in range(slice_)]
        + [Form.master(j) for j in range(slice_)]
    )


def instruction_universe(hierarchy: SynthesisHierarchy) -> list[ReductionInstruction]:
    """Every non-trivial instruction, one per distinct (group set, collective)."""
    seen: set[tuple[GroupSet, Collective]] = set()
    out = []
    for s in range(len(hierarchy.levels)):
        for form in _forms(s):
            try:
                groups = derive_groups(hierarchy, s, form)
            except NoOpInstruction:
                continue
            for op in COLLECTIVES:
                if (groups, op) in seen:
                    continue
                seen.add((groups, op))
                out.append(ReductionInstruction(s, form, op))
    return out


def enumerate_step_programs(
    universe: Sequence[tuple[GroupSet, Collective]],
    start: StateContext,
    goal: StateContext,
    limit: int,
    dedupe_states: bool = True,
    prune: Callable[[StateContext], bool] | None = None,
    stats: SearchStats | None = None,
) -> list[tuple[int, ...]]:
    """All minimal step sequences (as universe indices) of length <= limit reaching ``goal``.

    A sequence stops as soon as it reaches the goal.  With ``dedupe_states`` the
    suffixes completing a given (state, remaining budget) are computed once.
    ``prune(ctx)`` may reject states known to be unable to reach the goal.
    Output is ordered by length, then lexicographically by universe index.
    """
    stats = stats if stats is not None else SearchStats()
    memo: dict[tuple[tuple[int, ...], int], list[tuple[int, ...]]] = {}
    k = start.k
    target = goal.states

    def complete(states: tuple[int, ...], budget: int) -> list[tuple[int, ...]]:
        if dedupe_states:
            key = (states, budget)
            hit = memo.get(key)
            if hit is not None:
                stats.memo_hits += 1
                return hit
        out: list[tuple[int, ...]] = []
        for idx, (groups, op) in enumerate(universe):
            nxt = try_step(states, k, groups, op)
            if nxt is None:
                stats.pruned += 1
                continue
            stats.explored += 1
            if nxt == target:
                out.append((idx,))
                continue
            if budget == 1:
                continue
            if prune is not None and prune(StateContext(k, nxt)):
                stats.pruned += 1
                continue
            out.extend((idx,) + suf for suf in complete(nxt, budget - 1))
        if dedupe_states:
            memo[key] = out
        return out

    if start == goal or limit < 1:
        return []
    found = complete(start.states, limit)
    return sorted(found, key=lambda p: (len(p), p))


def validity_prefilter(
    hierarchy: SynthesisHierarchy,
    instruction: ReductionInstruction,
    reduction_axes=None,
) -> bool:
    """Necessary condition for an instruction to take part in a valid program.

    Every level the grouping varies over must have cardinality 1 or consist only
    of reduction-axis factors.  A reducing Master (AllReduce, ReduceScatter,
    Reduce) additionally needs every level below its form level to be clean:
    otherwise it reduces one instance of the inner groups but not its siblings,
    which can then never be reduced.  A data-moving Master (AllGather,
    Broadcast) reduces nothing, so a later step can still complete the siblings.
    """
    red = hierarchy.reduction_axes if reduction_axes is None else frozenset(reduction_axes)
    radix = hierarchy.layout.radix

    def clean(pos: int) -> bool:
        lvl = hierarchy.levels[pos]
        return lvl.cardinality == 1 or all(i in red for (j, i) in lvl.parts if radix[(j, i)] > 1)

    n = len(hierarchy.levels)
    s, form = instruction.slice, instruction.form
    if form.kind is FormKind.InsideGroup:
        span = range(s + 1, n)
    elif form.kind is FormKind.Parallel:
        span = range(form.level + 1, s + 1)
    elif instruction.op in (Collective.AllGather, Collective.Broadcast):
        span = range(form.level + 1, s + 1)
    else:
        span = range(form.level + 1, n)
    return all(clean(p) for p in span)


def synthesize(
    matrix: ParallelismMatrix,
    reduction_axes,
    system: SystemModel,
    cfg: SynthesisConfig | None = None,
    hierarchy: SynthesisHierarchy | None = None,
) -> SynthesisResult:
    """Synthesize every minimal valid program up to ``cfg.size_limit`` instructions.

    The search runs in the device space of the reduction-axis hierarchy, where
    the goal is a single full reduction; each emitted program is then lowered
    and re-checked against the goal over the full system.
    """
    cfg = cfg or SynthesisConfig()
    t0 = time.perf_counter()
    h = hierarchy or build_hierarchy(matrix, reduction_axes, HierarchyKind.ReductionAxis)
    if h.kind is not HierarchyKind.ReductionAxis:
        raise ValueError("synthesize works on a reduction-axis hierarchy")
    stats = SearchStats()
    k = h.size
    universe = instruction_universe(h)
    steps = [(derive_groups(h, ins.slice, ins.form), ins.op) for ins in universe]
    found = enumerate_step_programs(
        steps, initial_context(k), goal_context(k, [range(k)]), cfg.size_limit,
        dedupe_states=cfg.dedupe_states, stats=stats,
    )
    K = device_count(system)
    goal = goal_context(K, reduction_group_partition(matrix, reduction_axes, system)) if found else None
    programs = []
    for seq in found:
        prog = Program(tuple(universe[i] for i in seq), h)
        low = lower(prog, matrix, reduction_axes, system)
        final = run_program(low, K)
        if final != goal:
            raise AssertionError(f"lowered program misses the goal: {seq}")
        programs.append((prog, low))
    stats.elapsed_s = time.perf_counter() - t0
    return SynthesisResult(h, programs, stats)


def baseline_program(hierarchy: SynthesisHierarchy) -> Program:
    """Single AllReduce over the whole reduction group."""
    return Program((ReductionInstruction(0, Form.inside(), Collective.AllReduce),), hierarchy)


def lowered_key(low: LoweredProgram) -> tuple[tuple[GroupSet, Collective], ...]:
    return tuple((st.groups, st.op) for st in low.steps)


def as_steps(universe: Sequence[tuple[GroupSet, Collective]], seq: Sequence[int]) -> tuple[Step, ...]:
    return tuple(Step(*universe[i]) for i in seq)
