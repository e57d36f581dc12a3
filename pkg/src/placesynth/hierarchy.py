"""Synthesis hierarchies derived from a parallelism matrix.

Physical layout: every device owns one digit per ``(hardware level, axis)``
pair with radix ``x[axis][level]``.  Digits are ordered level-major, then axis
ascending, and the device index is their mixed-radix value (most significant
first).  This is the column-based expansion of the hardware hierarchy, so the
hardware coordinate of a device is unchanged by the expansion.

Each synthesis-hierarchy level is built from a tuple of such ``(level, axis)``
parts; the level digit is the mixed-radix combination of its parts in order.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

from .placement import ParallelismMatrix
from .topology import SystemModel


class HierarchyKind(enum.Enum):
    System = "system"
    ColumnBased = "column-based"
    RowBased = "row-based"
    ReductionAxis = "reduction-axis"


Part = tuple[int, int]  # (hardware level, axis)


@dataclass(frozen=True)
class HierarchyLevel:
    label: str
    cardinality: int
    parts: tuple[Part, ...]

    @property
    def hardware_level(self) -> int | None:
        levels = {j for j, _ in self.parts}
        return levels.pop() if len(levels) == 1 else None

    @property
    def axis(self) -> int | None:
        axes = {i for _, i in self.parts}
        return axes.pop() if len(axes) == 1 else None

    @property
    def collapsed_axes(self) -> tuple[int, ...]:
        return tuple(i for _, i in self.parts)


class PhysicalLayout:
    """Digit positions of the column-based expansion of a matrix."""

    def __init__(self, matrix: ParallelismMatrix):
        self.matrix = matrix
        self.positions: list[Part] = [
            (j, i) for j in range(matrix.n_levels) for i in range(matrix.n_axes)
        ]
        self.radix = {(j, i): matrix.factors[i][j] for j, i in self.positions}
        self.stride: dict[Part, int] = {}
        s = 1
        for pos in reversed(self.positions):
            self.stride[pos] = s
            s *= self.radix[pos]
        self.size = s

    def digits(self, index: int) -> dict[Part, int]:
        return {p: (index // self.stride[p]) % self.radix[p] for p in self.positions}

    def index(self, digits: dict[Part, int]) -> int:
        return sum(digits.get(p, 0) * self.stride[p] for p in self.positions)


@dataclass(frozen=True, eq=False)
class SynthesisHierarchy:
    kind: HierarchyKind
    levels: tuple[HierarchyLevel, ...]
    matrix: ParallelismMatrix
    reduction_axes: frozenset[int]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SynthesisHierarchy):
            return NotImplemented
        return (self.kind, self.levels, self.matrix, self.reduction_axes) == (
            other.kind, other.levels, other.matrix, other.reduction_axes)

    def __hash__(self) -> int:
        return hash((self.kind, self.levels, self.matrix, self.reduction_axes))

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(lvl.cardinality for lvl in self.levels)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lvl.label for lvl in self.levels)

    @property
    def size(self) -> int:
        return math.prod(self.cardinalities)

    def level_index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown level label {label!r}; have {list(self.labels)}") from None

    def coordinate(self, index: int) -> tuple[int, ...]:
        out = []
        for c in reversed(self.cardinalities):
            index, d = divmod(index, c)
            out.append(d)
        return tuple(reversed(out))

    def index(self, coord: Iterable[int]) -> int:
        v = 0
        for d, c in zip(coord, self.cardinalities):
            v = v * c + d
        return v

    @cached_property
    def layout(self) -> PhysicalLayout:
        return PhysicalLayout(self.matrix)

    @cached_property
    def local_to_physical(self) -> tuple[int, ...]:
        """Physical index of each hierarchy device with all uncovered digits at zero."""
        lay = self.layout
        out = []
        for h in range(self.size):
            digits: dict[Part, int] = {}
            for lvl, d in zip(self.levels, self.coordinate(h)):
                for part in reversed(lvl.parts):
                    r = lay.radix[part]
                    d, digits[part] = divmod(d, r)
            out.append(lay.index(digits))
        return tuple(out)

    @cached_property
    def instance_offsets(self) -> tuple[int, ...]:
        """Physical offsets of every assignment of the digits the hierarchy does not cover."""
        lay = self.layout
        covered = {p for lvl in self.levels for p in lvl.parts}
        free = [p for p in lay.positions if p not in covered and lay.radix[p] > 1]
        offsets = []
        for values in itertools.product(*(range(lay.radix[p]) for p in free)):
            offsets.append(sum(v * lay.stride[p] for p, v in zip(free, values)))
        return tuple(sorted(offsets))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "labels": list(self.labels),
            "cardinalities": list(self.cardinalities),
            "parts": [[list(p) for p in lvl.parts] for lvl in self.levels],
            # levels merging reduction factors of several axes on one hardware level
            "collapsed_levels": [lvl.label for lvl in self.levels if len(lvl.parts) > 1],
        }


def _label(pos: int) -> str:
    return "root" if pos == 0 else f"L{pos}"


def _make(kind, raw_levels, matrix, reduction_axes, drop_ones=False) -> SynthesisHierarchy:
    levels = []
    for card, parts in raw_levels:
        if drop_ones and card == 1:
            continue
        levels.append((card, parts))
    if not levels or levels[0][0] != 1:
        levels.insert(0, (1, ()))
    hl = tuple(HierarchyLevel(_label(p), c, tuple(parts)) for p, (c, parts) in enumerate(levels))
    return SynthesisHierarchy(kind, hl, matrix, frozenset(reduction_axes))


def build_hierarchy(
    matrix: ParallelismMatrix,
    reduction_axes: Iterable[int],
    kind: HierarchyKind,
    collapse: bool = True,
) -> SynthesisHierarchy:
    """Build one of the four synthesis hierarchies.

    ``collapse`` only affects the reduction-axis kind: when false, reduction
    factors of the same hardware level stay separate levels (row order).
    """
    red = sorted(set(reduction_axes))
    x = matrix.factors
    n_axes, n_levels = matrix.n_axes, matrix.n_levels
    if kind is HierarchyKind.System:
        raw = [
            (math.prod(matrix.column(j)), [(j, i) for i in range(n_axes)]) for j in range(n_levels)
        ]
        return _make(kind, raw, matrix, red)
    if kind is HierarchyKind.ColumnBased:
        raw = [(x[i][j], [(j, i)]) for j in range(n_levels) for i in range(n_axes)]
        return _make(kind, raw, matrix, red)
    if kind is HierarchyKind.RowBased:
        raw = [(x[i][j], [(j, i)]) for i in range(n_axes) for j in range(n_levels)]
        return _make(kind, raw, matrix, red)
    if kind is HierarchyKind.ReductionAxis:
        if collapse:
            raw = []
            for j in range(n_levels):
                parts = [(j, i) for i in red if x[i][j] > 1]
                raw.append((math.prod(x[i][j] for i in red), parts))
        else:
            raw = [(x[i][j], [(j, i)]) for i in red for j in range(n_levels)]
        return _make(kind, raw, matrix, red, drop_ones=True)
    raise TypeError(kind)


def coordinate_of_device(matrix: ParallelismMatrix, index: int) -> tuple[int, ...]:
    """Digits of a physical device over the column-based expansion (level-major)."""
    lay = PhysicalLayout(matrix)
    if not 0 <= index < lay.size:
        raise IndexError(index)
    d = lay.digits(index)
    return tuple(d[p] for p in lay.positions)


def device_of_coordinate(matrix: ParallelismMatrix, coord: Iterable[int]) -> int:
    lay = PhysicalLayout(matrix)
    coord = tuple(coord)
    if len(coord) != len(lay.positions):
        raise ValueError("coordinate length mismatch")
    for p, v in zip(lay.positions, coord):
        if not 0 <= v < lay.radix[p]:
            raise ValueError(f"digit {v} out of range for {p}")
    return lay.index(dict(zip(lay.positions, coord)))


def reduction_group_partition(
    matrix: ParallelismMatrix, reduction_axes: Iterable[int], system: SystemModel | None = None
) -> list[tuple[int, ...]]:
    """Devices grouped by equal non-reduction digits, ordered by smallest member."""
    red = set(reduction_axes)
    lay = PhysicalLayout(matrix)
    if system is not None and math.prod(system.cardinalities) != lay.size:
        raise ValueError("matrix does not match system")
    groups: dict[tuple[int, ...], list[int]] = {}
    for dev in range(lay.size):
        d = lay.digits(dev)
        key = tuple(d[p] for p in lay.positions if p[1] not in red)
        groups.setdefault(key, []).append(dev)
    return sorted((tuple(g) for g in groups.values()), key=lambda g: g[0])
