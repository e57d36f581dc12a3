"""Parallelism matrices: factorizations of the parallelism axes over the hierarchy.

A matrix has one row per parallelism axis and one column per hardware level.
Column ``j`` multiplies to the level cardinality ``h_j``; row ``i`` multiplies
to the axis size ``p_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .topology import SystemModel, device_count


class PlacementError(ValueError):
    pass


@dataclass(frozen=True)
class ParallelismSpec:
    axes: tuple[int, ...]
    reduction_axes: frozenset[int]

    def __init__(self, axes, reduction_axes):
        object.__setattr__(self, "axes", tuple(int(a) for a in axes))
        object.__setattr__(self, "reduction_axes", frozenset(int(a) for a in reduction_axes))
        if not self.axes or any(a < 1 for a in self.axes):
            raise PlacementError(f"axis sizes must be positive: {self.axes}")
        if not self.reduction_axes:
            raise PlacementError("at least one reduction axis is required")
        bad = [a for a in self.reduction_axes if not 0 <= a < len(self.axes)]
        if bad:
            raise PlacementError(f"reduction axes out of range: {sorted(bad)}")

    @property
    def reduction_size(self) -> int:
        return math.prod(self.axes[a] for a in self.reduction_axes)


@dataclass(frozen=True)
class ParallelismMatrix:
    factors: tuple[tuple[int, ...], ...]  # factors[axis][level]

    def __post_init__(self) -> None:
        rows = tuple(tuple(int(x) for x in row) for row in self.factors)
        if not rows or len({len(r) for r in rows}) != 1:
            raise PlacementError("matrix must be a non-empty rectangular grid")
        if any(x < 1 for r in rows for x in r):
            raise PlacementError("factors must be positive")
        object.__setattr__(self, "factors", rows)

    @property
    def n_axes(self) -> int:
        return len(self.factors)

    @property
    def n_levels(self) -> int:
        return len(self.factors[0])

    def column(self, level: int) -> tuple[int, ...]:
        return tuple(row[level] for row in self.factors)

    def column_products(self) -> tuple[int, ...]:
        return tuple(math.prod(self.column(j)) for j in range(self.n_levels))

    def row_products(self) -> tuple[int, ...]:
        return tuple(math.prod(r) for r in self.factors)

    def to_list(self) -> list[list[int]]:
        return [list(r) for r in self.factors]


def axis_row(matrix: ParallelismMatrix, axis: int) -> tuple[int, ...]:
    return matrix.factors[axis]


def _divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


@lru_cache(maxsize=None)
def _ordered_factorizations(n: int, parts: int) -> tuple[tuple[int, ...], ...]:
    """All ordered tuples of ``parts`` positive ints multiplying to ``n``, lexicographic."""
    if parts == 1:
        return ((n,),)
    out = []
    for d in _divisors(n):
        for rest in _ordered_factorizations(n // d, parts - 1):
            out.append((d,) + rest)
    return tuple(out)


def enumerate_matrices(system: SystemModel, spec: ParallelismSpec) -> list[ParallelismMatrix]:
    """All matrices whose columns multiply to the cardinalities and rows to the axes.

    Backtracks over columns left to right; each column ranges over the ordered
    factorizations of the level cardinality, pruned by the remaining row budget.
    Results are sorted by their row-major factor sequence.
    """
    cards = system.cardinalities
    axes = spec.axes
    if math.prod(axes) != device_count(system):
        raise PlacementError(
            f"axes product {math.prod(axes)} does not match device count {device_count(system)}"
        )
    m = len(axes)
    found: list[tuple[tuple[int, ...], ...]] = []

    def rec(j: int, remaining: tuple[int, ...], cols: list[tuple[int, ...]]) -> None:
        if j == len(cards):
            if all(r == 1 for r in remaining):
                found.append(tuple(zip(*cols)) if cols else tuple(() for _ in range(m)))
            return
        for col in _ordered_factorizations(cards[j], m):
            if all(r % x == 0 for r, x in zip(remaining, col)):
                cols.append(col)
                rec(j + 1, tuple(r // x for r, x in zip(remaining, col)), cols)
                cols.pop()

    rec(0, tuple(axes), [])
    found.sort(key=lambda rows: tuple(x for r in rows for x in r))
    return [ParallelismMatrix(rows) for rows in found]
