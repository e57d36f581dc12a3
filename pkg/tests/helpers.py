"""Shared oracles for the test-suite (independent of the search code paths)."""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from placesynth.dsl import NoOpInstruction, derive_groups, lower_groups
from placesynth.hierarchy import HierarchyKind, build_hierarchy, reduction_group_partition
from placesynth.placement import ParallelismMatrix, ParallelismSpec, enumerate_matrices
from placesynth.semantics import Collective, SemanticError, apply_step, goal_context, initial_context
from placesynth.synthesizer import SynthesisConfig, enumerate_step_programs, instruction_universe, synthesize
from placesynth.topology import SystemModel

AXIS_KINDS = (HierarchyKind.System, HierarchyKind.ColumnBased, HierarchyKind.RowBased)

CRITERIA: dict[int, str] = {}  # acceptance verdict lines, printed in the terminal summary


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    CRITERIA[n] = line
    print(line)


# ---------------------------------------------------------------- reference semantics
class RefInvalid(Exception):
    pass


def ref_initial(k: int) -> np.ndarray:
    s = np.zeros((k, k, k), dtype=bool)
    for d in range(k):
        s[d, :, d] = True
    return s


def ref_apply(states: np.ndarray, group, op: Collective) -> np.ndarray:
    """Dense-array restatement of the five rules, written from their definitions."""
    out = states.copy()
    g = list(group)
    mats = [states[d] for d in g]
    nonempty = [tuple(np.flatnonzero(m.any(axis=1))) for m in mats]
    total = np.logical_or.reduce(mats)
    if op in (Collective.AllReduce, Collective.ReduceScatter, Collective.Reduce):
        if len(set(nonempty)) != 1:
            raise RefInvalid("rows differ")
        if (np.sum(mats, axis=0) > 1).any():
            raise RefInvalid("columns overlap")
        if op is Collective.AllReduce:
            for d in g:
                out[d] = total
        elif op is Collective.Reduce:
            for i, d in enumerate(g):
                out[d] = total if i == 0 else False
        else:
            rows = list(nonempty[0])
            if len(rows) % len(g):
                raise RefInvalid("indivisible")
            share = len(rows) // len(g)
            for i, d in enumerate(g):
                keep = rows[i * share:(i + 1) * share]
                m = np.zeros_like(total)
                m[keep] = total[keep]
                out[d] = m
    elif op is Collective.AllGather:
        used = [r for rs in nonempty for r in rs]
        if len(used) != len(set(used)):
            raise RefInvalid("rows overlap")
        for d in g:
            out[d] = total
    elif op is Collective.Broadcast:
        root = mats[0]
        if any((m & ~root).any() for m in mats[1:]):
            raise RefInvalid("not a superset")
        if all((m == root).all() for m in mats[1:]):
            raise RefInvalid("no information increase")
        for d in g:
            out[d] = root
    return out


def ref_to_packed(states: np.ndarray) -> tuple[int, ...]:
    k = states.shape[1]
    out = []
    for m in states:
        bits = 0
        for r, c in zip(*np.nonzero(m)):
            bits |= 1 << (int(r) * k + int(c))
        out.append(bits)
    return tuple(out)


# ---------------------------------------------------------------- group counting
def closed_form_size_count(cards, s, form):
    """Closed-form group size and group count of a slice/form pair."""
    if form.level is None:
        return math.prod(cards[s + 1:]), math.prod(cards[:s + 1])
    j = form.level
    size = math.prod(cards[j + 1:s + 1])
    if form.kind.value == "Master":
        return size, math.prod(cards[:j + 1])
    return size, math.prod(cards[:j + 1]) * math.prod(cards[s + 1:])


# ---------------------------------------------------------------- configurations
def compositions(n: int, min_part: int = 2):
    """Ordered factorizations of ``n`` into factors >= min_part."""
    if n == 1:
        yield ()
        return
    for f in range(min_part, n + 1):
        if n % f == 0:
            for rest in compositions(n // f, min_part):
                yield (f,) + rest


def systems_up_to(max_k: int):
    for k in range(2, max_k + 1):
        for cards in compositions(k):
            yield SystemModel.from_cardinalities((1,) + cards, [1e9 * (i + 1) for i in range(len(cards) + 1)])


def specs_for(k: int, max_axes: int = 3):
    seen = set()
    for n in range(1, max_axes + 1):
        for axes in itertools.product(*[range(1, k + 1)] * n):
            if math.prod(axes) != k or axes in seen:
                continue
            seen.add(axes)
            for r in range(1, n + 1):
                for red in itertools.combinations(range(n), r):
                    yield ParallelismSpec(axes, red)


def configs_up_to(max_k: int, max_axes: int = 3):
    for system in systems_up_to(max_k):
        k = math.prod(system.cardinalities)
        for spec in specs_for(k, max_axes):
            for m in enumerate_matrices(system, spec):
                yield system, spec, m


# ---------------------------------------------------------------- search oracles
def physical_universe(h):
    """Lowered (groups, op) steps for every instruction the grammar can express over ``h``."""
    out, seen = [], set()
    n = len(h.levels)
    for ins in _all_instructions(n):
        try:
            local = derive_groups(h, ins[0], ins[1])
        except NoOpInstruction:
            continue
        key = (lower_groups(h, local), ins[2])
        if key not in seen:
            seen.add(key)
            out.append(key)
    return out


@lru_cache(maxsize=None)
def _all_instructions(n: int):
    from placesynth.dsl import Form

    out = []
    for s in range(n):
        forms = [Form.inside()] + [Form.parallel(j) for j in range(s)] + [Form.master(j) for j in range(s)]
        for f in forms:
            for op in Collective:
                out.append((s, f, op))
    return tuple(out)


def brute_force(universe, k: int, goal, limit: int) -> set:
    """Plain DFS (no memo, no pruning): all minimal goal-reaching step sequences."""
    found = set()

    def dfs(ctx, prefix):
        for step in universe:
            try:
                nxt = apply_step(ctx, *step)
            except SemanticError:
                continue
            seq = prefix + (step,)
            if nxt == goal:
                found.add(seq)
            elif len(seq) < limit:
                dfs(nxt, seq)

    dfs(initial_context(k), ())
    return found


def synthesized_set(matrix, red, system, limit: int, collapse: bool = True) -> set:
    h = build_hierarchy(matrix, red, HierarchyKind.ReductionAxis, collapse=collapse)
    res = synthesize(matrix, red, system, SynthesisConfig(size_limit=limit), hierarchy=h)
    return {tuple((st.groups, st.op) for st in low.steps) for _, low in res.programs}


def contaminated(states, k: int, group_masks: tuple[int, ...]) -> bool:
    """True when some row mixes columns of two reduction groups.

    Every rule keeps each non-empty row on at least one device, so such a
    state can never reach the goal.
    """
    mask = (1 << k) - 1
    for s in states:
        while s:
            row = s & mask
            if row and sum(1 for gm in group_masks if row & gm) > 1:
                return True
            s >>= k
    return False


def hierarchy_programs(matrix, red, kind: HierarchyKind, limit: int) -> set:
    """Goal-reaching lowered programs written against one of hierarchies (a)-(c)."""
    h = build_hierarchy(matrix, red, kind)
    k = h.layout.size
    parts = reduction_group_partition(matrix, red)
    masks = tuple(sum(1 << d for d in g) for g in parts)
    universe = []
    seen = set()
    for ins in instruction_universe(h):
        key = (lower_groups(h, derive_groups(h, ins.slice, ins.form)), ins.op)
        if key not in seen:
            seen.add(key)
            universe.append(key)
    seqs = enumerate_step_programs(
        universe, initial_context(k), goal_context(k, parts), limit,
        prune=lambda ctx: contaminated(ctx.states, k, masks),
    )
    return {tuple(universe[i] for i in seq) for seq in seqs}


def lowered_universe(h) -> dict:
    """Distinct lowered (groups, op) steps expressible in hierarchy ``h``."""
    out = {}
    for ins in instruction_universe(h):
        out.setdefault((lower_groups(h, derive_groups(h, ins.slice, ins.form)), ins.op), None)
    return out


def ordering_check(matrix, red, system, limit: int) -> dict:
    """Programs of (a)-(c) that the next hierarchy up, or (d), cannot express.

    One search runs over the union of the (a)-(c) universes; minimality does
    not depend on the universe, so each hit belongs to exactly the hierarchies
    whose universes contain all of its steps.  (d) is tried both collapsed and
    in plain row order; a program counts against (d) only if neither has it.
    """
    parts = reduction_group_partition(matrix, red)
    hs = {kind: build_hierarchy(matrix, red, kind) for kind in AXIS_KINDS}
    k = hs[HierarchyKind.System].layout.size
    tags: dict = {}
    for kind, h in hs.items():
        for step in lowered_universe(h):
            tags.setdefault(step, set()).add(kind)
    universe = list(tags)
    masks = tuple(sum(1 << d for d in g) for g in parts)
    seqs = enumerate_step_programs(
        universe, initial_context(k), goal_context(k, parts), limit,
        prune=lambda ctx: contaminated(ctx.states, k, masks),
    )
    d_sets = [synthesized_set(matrix, red, system, limit, collapse=c) for c in (True, False)]
    a, b, c = AXIS_KINDS
    out = {"b>=a": [], "c>=b": [], "d>=c": [], "d>=all": [], "programs": len(seqs)}
    for seq in seqs:
        prog = tuple(universe[i] for i in seq)
        who = set.intersection(*(tags[s] for s in prog))
        in_d = any(prog in ds for ds in d_sets)
        if a in who and b not in who:
            out["b>=a"].append(prog)
        if b in who and c not in who:
            out["c>=b"].append(prog)
        if c in who and not in_d:
            out["d>=c"].append(prog)
        if not in_d:
            out["d>=all"].append(prog)
    return out
