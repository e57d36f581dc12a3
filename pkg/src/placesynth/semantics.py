"""Contribution-tracking semantics of the five collectives.

Each device holds a ``k x k`` boolean matrix: bit ``(r, c)`` is set when device
``c``'s original chunk ``r`` has been folded into this device's chunk ``r``.
A matrix is packed into one Python int with bit ``r * k + c``, so the OR of
states and per-row disjointness reduce to integer ``|`` and ``&``.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence


class Collective(enum.Enum):
    AllReduce = "AllReduce"
    ReduceScatter = "ReduceScatter"
    AllGather = "AllGather"
    Reduce = "Reduce"
    Broadcast = "Broadcast"

    def __str__(self) -> str:
        return self.value


COLLECTIVES: tuple[Collective, ...] = tuple(Collective)

RULE_NAMES = {
    Collective.AllReduce: "r-AllReduce",
    Collective.ReduceScatter: "s-ReduceScatter",
    Collective.AllGather: "s-AllGather",
    Collective.Reduce: "s-Reduce",
    Collective.Broadcast: "s-Broadcast",
}


class SemanticError(Exception):
    """A collective whose premises fail; the program prefix can never reach its goal."""

    def __init__(self, rule: str, devices: Sequence[int], detail: str, step_index: int | None = None):
        self.rule = rule
        self.devices = tuple(devices)
        self.detail = detail
        self.step_index = step_index
        where = "" if step_index is None else f"step {step_index + 1}: "
        super().__init__(f"{where}{rule} on devices {list(self.devices)}: {detail}")

    def at_step(self, step_index: int) -> SemanticError:
        return SemanticError(self.rule, self.devices, self.detail, step_index)


@lru_cache(maxsize=None)
def _row_mask(k: int) -> int:
    return (1 << k) - 1


@lru_cache(maxsize=1 << 16)
def row_set(bits: int, k: int) -> int:
    """Bitmask of the non-empty rows of a packed state."""
    mask = _row_mask(k)
    out = 0
    r = 0
    while bits:
        if bits & mask:
            out |= 1 << r
        bits >>= k
        r += 1
    return out


def _row_list(rows: int) -> list[int]:
    out = []
    r = 0
    while rows:
        if rows & 1:
            out.append(r)
        rows >>= 1
        r += 1
    return out


def _keep_rows(bits: int, rows: Iterable[int], k: int) -> int:
    mask = _row_mask(k)
    out = 0
    for r in rows:
        out |= bits & (mask << (r * k))
    return out


@dataclass(frozen=True)
class DeviceState:
    bits: int
    k: int

    def get(self, row: int, col: int) -> bool:
        return bool(self.bits >> (row * self.k + col) & 1)

    def rows(self) -> list[int]:
        return _row_list(row_set(self.bits, self.k))

    def row_columns(self, row: int) -> list[int]:
        return [c for c in range(self.k) if self.get(row, c)]

    def issubset(self, other: DeviceState) -> bool:
        return self.bits & ~other.bits == 0

    def to_text(self) -> str:
        return "\n".join(
            "".join("1" if self.get(r, c) else "0" for c in range(self.k)) for r in range(self.k)
        )

    @classmethod
    def from_text(cls, text: str) -> DeviceState:
        lines = [ln.strip() for ln in text.strip().splitlines()]
        k = len(lines)
        bits = 0
        for r, ln in enumerate(lines):
            if len(ln) != k:
                raise ValueError("state text must be k lines of k characters")
            for c, ch in enumerate(ln):
                if ch == "1":
                    bits |= 1 << (r * k + c)
                elif ch != "0":
                    raise ValueError(f"bad state character {ch!r}")
        return cls(bits, k)


@dataclass(frozen=True)
class StateContext:
    """Dense map from device index ``0..n-1`` to packed states of dimension ``k``."""

    k: int
    states: tuple[int, ...]

    def __getitem__(self, device: int) -> DeviceState:
        return DeviceState(self.states[device], self.k)

    def __len__(self) -> int:
        return len(self.states)

    def replace(self, updates: dict[int, int]) -> StateContext:
        s = list(self.states)
        for d, v in updates.items():
            s[d] = v
        return StateContext(self.k, tuple(s))

    def to_text(self) -> str:
        return "\n\n".join(f"d{d}:\n{self[d].to_text()}" for d in range(len(self.states)))


def column_indicator(k: int, cols: Iterable[int]) -> int:
    """Packed state with every row set at ``cols``."""
    row = 0
    for c in cols:
        row |= 1 << c
    out = 0
    for r in range(k):
        out |= row << (r * k)
    return out


def initial_context(k: int) -> StateContext:
    if k < 1:
        raise ValueError("k must be positive")
    return StateContext(k, tuple(column_indicator(k, [i]) for i in range(k)))


def goal_context(k: int, groups: Iterable[Iterable[int]]) -> StateContext:
    states: list[int | None] = [None] * k
    for g in groups:
        members = list(g)
        ind = column_indicator(k, members)
        for d in members:
            if states[d] is not None:
                raise ValueError(f"device {d} appears in two groups")
            states[d] = ind
    if any(s is None for s in states):
        raise ValueError("groups must partition the devices")
    return StateContext(k, tuple(states))  # type: ignore[arg-type]


def _check_reducible(rule: str, group: Sequence[int], states: list[int], k: int) -> int:
    """Shared AllReduce/ReduceScatter/Reduce premises; returns the summed state."""
    rows0 = row_set(states[0], k)
    acc = 0
    for d, s in zip(group, states):
        if row_set(s, k) != rows0:
            raise SemanticError(rule, group, f"non-empty rows of device {d} differ from device {group[0]}")
        if acc & s:
            overlap = row_set(acc & s, k)
            raise SemanticError(rule, group, f"columns not disjoint in rows {_row_list(overlap)}")
        acc |= s
    return acc


def apply_states(states: Sequence[int], k: int, group: Sequence[int], op: Collective) -> list[int]:
    """Apply one collective to the member states (in group order); returns new member states."""
    n = len(group)
    rule = RULE_NAMES[op]
    states = list(states)
    if op is Collective.AllReduce:
        acc = _check_reducible(rule, group, states, k)
        return [acc] * n
    if op is Collective.ReduceScatter:
        acc = _check_reducible(rule, group, states, k)
        rows = _row_list(row_set(acc, k))
        if len(rows) % n:
            raise SemanticError(rule, group, f"{len(rows)} non-empty rows not divisible by {n} devices")
        share = len(rows) // n
        return [_keep_rows(acc, rows[i * share:(i + 1) * share], k) for i in range(n)]
    if op is Collective.AllGather:
        seen = 0
        acc = 0
        for d, s in zip(group, states):
            rs = row_set(s, k)
            if seen & rs:
                raise SemanticError(rule, group, f"rows {_row_list(seen & rs)} of device {d} already present")
            seen |= rs
            acc |= s
        return [acc] * n
    if op is Collective.Reduce:
        acc = _check_reducible(rule, group, states, k)
        return [acc] + [0] * (n - 1)
    if op is Collective.Broadcast:
        root = states[0]
        strict = False
        for d, s in zip(group[1:], states[1:]):
            if s & ~root:
                raise SemanticError(rule, group, f"device {d} holds data the root {group[0]} lacks")
            if s != root:
                strict = True
        if not strict:
            raise SemanticError(rule, group, "no member is less informative than the root")
        return [root] * n
    raise TypeError(op)


def apply_collective(ctx: StateContext, group: Sequence[int], op: Collective) -> StateContext:
    """One collective over ``group`` (root = ``group[0]``); other devices unchanged."""
    if len(group) < 2:
        raise ValueError("a collective group needs at least two devices")
    if len(set(group)) != len(group):
        raise ValueError(f"duplicate devices in group {list(group)}")
    new = apply_states([ctx.states[d] for d in group], ctx.k, group, op)
    return ctx.replace(dict(zip(group, new)))


def apply_step(ctx: StateContext, groups: Sequence[Sequence[int]], op: Collective) -> StateContext:
    """Apply ``op`` to disjoint groups concurrently."""
    s = list(ctx.states)
    k = ctx.k
    for g in groups:
        new = apply_states([s[d] for d in g], k, g, op)
        for d, v in zip(g, new):
            s[d] = v
    return StateContext(k, tuple(s))


def _try_group(s: list[int], k: int, g: Sequence[int], op: Collective) -> bool:
    """In-place, non-raising ``apply_states`` for one group; False when a premise fails."""
    if op is Collective.AllGather:
        seen = acc = 0
        for d in g:
            rs = row_set(s[d], k)
            if seen & rs:
                return False
            seen |= rs
            acc |= s[d]
        for d in g:
            s[d] = acc
        return True
    if op is Collective.Broadcast:
        root = s[g[0]]
        strict = False
        for d in g[1:]:
            v = s[d]
            if v & ~root:
                return False
            strict = strict or v != root
        if not strict:
            return False
        for d in g[1:]:
            s[d] = root
        return True
    rows0 = row_set(s[g[0]], k)
    acc = 0
    for d in g:
        v = s[d]
        if acc & v or row_set(v, k) != rows0:
            return False
        acc |= v
    if op is Collective.AllReduce:
        for d in g:
            s[d] = acc
    elif op is Collective.Reduce:
        s[g[0]] = acc
        for d in g[1:]:
            s[d] = 0
    else:
        rows = _row_list(rows0)
        n = len(g)
        if len(rows) % n:
            return False
        share = len(rows) // n
        for i, d in enumerate(g):
            s[d] = _keep_rows(acc, rows[i * share:(i + 1) * share], k)
    return True


def try_step(states: tuple[int, ...], k: int, groups: Sequence[Sequence[int]], op: Collective):
    """Packed states after ``apply_step``, or None where it would raise; for search loops."""
    s = list(states)
    for g in groups:
        if not _try_group(s, k, g, op):
            return None
    return tuple(s)


def reachable_oracle(
    ctx: StateContext,
    goal: StateContext,
    instruction_universe: Sequence[tuple[Sequence[Sequence[int]], Collective]],
    depth: int,
) -> bool:
    """Breadth-first check for some step sequence of length <= depth reaching ``goal``.

    ``instruction_universe`` is a list of ``(groups, op)`` steps.
    """
    if ctx == goal:
        return True
    frontier = deque([(ctx, 0)])
    seen = {ctx}
    while frontier:
        cur, d = frontier.popleft()
        if d == depth:
            continue
        for groups, op in instruction_universe:
            try:
                nxt = apply_step(cur, groups, op)
            except SemanticError:
                continue
            if nxt == goal:
                return True
            if nxt not in seen:
                seen.add(nxt)
                frontier.append((nxt, d + 1))
    return False
