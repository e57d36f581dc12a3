"""The reduction-program language.

An instruction is ``(slice, form, collective)``.  The slice picks a level of a
synthesis hierarchy and the form picks the grouping pattern:

* ``InsideGroup``: devices sharing the coordinate prefix up to the slice.
* ``Parallel(e)``: devices differing only in the digits strictly below ``e``
  down to the slice.
* ``Master(e)``: the ``Parallel(e)`` groups whose digits below the slice are
  all zero.

Text form: ``Slice(L1) Master(root) AllReduce; Slice(L1) InsideGroup Broadcast``.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .hierarchy import SynthesisHierarchy
from .semantics import Collective, SemanticError, StateContext, apply_step, initial_context

Group = tuple[int, ...]
GroupSet = tuple[Group, ...]


class FormKind(enum.Enum):
    InsideGroup = "InsideGroup"
    Parallel = "Parallel"
    Master = "Master"


@dataclass(frozen=True)
class Form:
    kind: FormKind
    level: int | None = None

    def __post_init__(self) -> None:
        if (self.kind is FormKind.InsideGroup) != (self.level is None):
            raise ValueError("InsideGroup carries no level; Parallel/Master require one")

    @classmethod
    def inside(cls) -> Form:
        return cls(FormKind.InsideGroup)

    @classmethod
    def parallel(cls, level: int) -> Form:
        return cls(FormKind.Parallel, level)

    @classmethod
    def master(cls, level: int) -> Form:
        return cls(FormKind.Master, level)


class NoOpInstruction(ValueError):
    """Every group derived by the instruction has a single member."""


@dataclass(frozen=True)
class ReductionInstruction:
    slice: int
    form: Form
    op: Collective

    def __post_init__(self) -> None:
        if self.form.level is not None and not self.form.level < self.slice:
            raise ValueError(
                f"form level {self.form.level} must be a strict ancestor of slice {self.slice}"
            )


@dataclass(frozen=True)
class Step:
    groups: GroupSet
    op: Collective

    def to_dict(self) -> dict:
        return {"op": self.op.value, "groups": [list(g) for g in self.groups]}


@dataclass(frozen=True)
class LoweredProgram:
    steps: tuple[Step, ...]

    def __post_init__(self) -> None:
        for i, st in enumerate(self.steps):
            seen: set[int] = set()
            for g in st.groups:
                if len(g) < 2:
                    raise ValueError(f"step {i}: group {g} has fewer than two devices")
                if seen & set(g):
                    raise ValueError(f"step {i}: groups are not disjoint")
                seen |= set(g)

    def summary(self) -> list[str]:
        return [f"{st.op.value} x{len(st.groups)} groups of {len(st.groups[0])}" for st in self.steps]


@lru_cache(maxsize=None)
def _groups_for(cards: tuple[int, ...], slice_: int, form: Form) -> GroupSet:
    n = len(cards)
    if not 0 <= slice_ < n:
        raise ValueError(f"slice {slice_} out of range for {n} levels")
    below = math.prod(cards[slice_ + 1:])
    if form.kind is FormKind.InsideGroup:
        outer = math.prod(cards[: slice_ + 1])
        groups = [tuple(a * below + c for c in range(below)) for a in range(outer)]
    else:
        j = form.level
        assert j is not None
        if not 0 <= j < slice_:
            raise ValueError(f"form level {j} must be a strict ancestor of slice {slice_}")
        outer = math.prod(cards[: j + 1])
        mid = math.prod(cards[j + 1: slice_ + 1])
        suffixes = range(below) if form.kind is FormKind.Parallel else range(1)
        groups = [
            tuple(a * mid * below + b * below + c for b in range(mid))
            for a in range(outer)
            for c in suffixes
        ]
    groups = [g for g in groups if len(g) > 1]
    if not groups:
        raise NoOpInstruction(f"slice {slice_} with {form} forms only single-device groups")
    return tuple(sorted(groups))


def derive_groups(hierarchy: SynthesisHierarchy, slice_: int, form: Form) -> GroupSet:
    """Device groups (in hierarchy-local indices) of a slice/form pair."""
    return _groups_for(hierarchy.cardinalities, slice_, form)


@dataclass(frozen=True)
class Program:
    instructions: tuple[ReductionInstruction, ...]
    hierarchy: SynthesisHierarchy

    def __post_init__(self) -> None:
        object.__setattr__(self, "instructions", tuple(self.instructions))
        if not self.instructions:
            raise ValueError("a program needs at least one instruction")
        n = len(self.hierarchy.levels)
        for ins in self.instructions:
            if ins.slice >= n:
                raise ValueError(f"slice {ins.slice} out of range for {n} levels")
            derive_groups(self.hierarchy, ins.slice, ins.form)

    def __len__(self) -> int:
        return len(self.instructions)

    def local_steps(self) -> tuple[Step, ...]:
        return tuple(
            Step(derive_groups(self.hierarchy, ins.slice, ins.form), ins.op) for ins in self.instructions
        )


def lower_groups(hierarchy: SynthesisHierarchy, groups: GroupSet) -> GroupSet:
    """Instantiate hierarchy-local groups once per assignment of the uncovered digits.

    Members are listed in ascending physical order, so the root of a lowered
    group is always its smallest device whatever hierarchy it came from.
    """
    l2p = hierarchy.local_to_physical
    out = [
        tuple(sorted(l2p[d] + off for d in g)) for off in hierarchy.instance_offsets for g in groups
    ]
    return tuple(sorted(out))


def lower(program: Program, matrix=None, reduction_axes=None, system=None) -> LoweredProgram:
    """Lower a program onto physical device groups.

    The matrix and reduction axes are those the program's hierarchy was built
    from; passing different ones is an error.
    """
    h = program.hierarchy
    if matrix is not None and matrix != h.matrix:
        raise ValueError("program hierarchy was built from a different matrix")
    if reduction_axes is not None and frozenset(reduction_axes) != h.reduction_axes:
        raise ValueError("program hierarchy was built for different reduction axes")
    if system is not None and math.prod(system.cardinalities) != h.layout.size:
        raise ValueError("matrix does not match the system")
    return LoweredProgram(tuple(Step(lower_groups(h, st.groups), st.op) for st in program.local_steps()))


def run_steps(steps: Sequence[Step], k: int, ctx: StateContext | None = None) -> StateContext:
    """Fold the steps over the initial context; errors carry the failing step index."""
    ctx = initial_context(k) if ctx is None else ctx
    for i, st in enumerate(steps):
        try:
            ctx = apply_step(ctx, st.groups, st.op)
        except SemanticError as exc:
            raise exc.at_step(i) from None
    return ctx


def run_program(lowered: LoweredProgram, k: int) -> StateContext:
    return run_steps(lowered.steps, k)


def _form_text(form: Form, labels: Sequence[str]) -> str:
    if form.kind is FormKind.InsideGroup:
        return "InsideGroup"
    return f"{form.kind.value}({labels[form.level]})"


def format_instruction(ins: ReductionInstruction, labels: Sequence[str]) -> str:
    return f"Slice({labels[ins.slice]}) {_form_text(ins.form, labels)} {ins.op.value}"


def pretty_print(program: Program) -> str:
    labels = program.hierarchy.labels
    return "; ".join(format_instruction(ins, labels) for ins in program.instructions)


_INSTR_RE = re.compile(
    r"^Slice\((?P<slice>[^()\s]+)\)\s+"
    r"(?:(?P<inside>InsideGroup)|(?P<kind>Parallel|Master)\((?P<level>[^()\s]+)\))\s+"
    r"(?P<op>\w+)$"
)


def parse_program(text: str, hierarchy: SynthesisHierarchy) -> Program:
    instrs = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        m = _INSTR_RE.match(chunk)
        if not m:
            raise ValueError(f"cannot parse instruction {chunk!r}")
        try:
            op = Collective(m["op"])
        except ValueError:
            raise ValueError(f"unknown collective {m['op']!r}") from None
        if m["inside"]:
            form = Form.inside()
        else:
            form = Form(FormKind(m["kind"]), hierarchy.level_index(m["level"]))
        instrs.append(ReductionInstruction(hierarchy.level_index(m["slice"]), form, op))
    return Program(tuple(instrs), hierarchy)
