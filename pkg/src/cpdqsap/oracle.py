"""Exhaustive enumeration of all assignments, for desk-scale ground truth."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .instance import INT64_MAX, Assignment, Instance
from .model import build_model

DEFAULT_CAP = 10**7
CHUNK = 1 << 18


class SearchSpaceTooLarge(ValueError):
    def __init__(self, size: int, cap: int):
        self.size, self.cap = size, cap
        super().__init__(f"search space {size} exceeds cap {cap}")


@dataclass(frozen=True)
class ObjectiveTable:
    """All assignments in lexicographic order (0-based choices) and their energies."""

    choices: np.ndarray   # (rows, n) int64
    values: np.ndarray    # (rows,) int64

    def __len__(self):
        return len(self.values)

    def rows(self) -> Iterator[tuple[Assignment, int]]:
        for c, v in zip(self.choices, self.values):
            yield Assignment(tuple(c)), int(v)


@dataclass(frozen=True)
class OracleResult:
    assignment: Assignment
    value: int
    count: int
    table: Optional[ObjectiveTable] = None


def _chunks(inst: Instance, cap: int):
    size = inst.search_space
    if size > cap:
        raise SearchSpaceTooLarge(size, cap)
    model = build_model(inst)
    bound = sum(abs(int(v)) for v in model.a_int)
    bound += sum(abs(int(v)) for b in model.blocks.values() for v in b.flat)
    if bound > INT64_MAX:
        raise OverflowError("energies too large for int64 enumeration")

    counts = model.counts
    # row-major strides: the last position varies fastest, i.e. lexicographic order
    strides = np.ones(inst.n, dtype=np.int64)
    for i in range(inst.n - 2, -1, -1):
        strides[i] = strides[i + 1] * counts[i + 1]
    unary = [model.a_int[model.offsets[i]:model.offsets[i + 1]] for i in range(inst.n)]

    for start in range(0, size, CHUNK):
        idx = np.arange(start, min(start + CHUNK, size), dtype=np.int64)
        digits = (idx[:, None] // strides[None, :]) % counts[None, :]
        vals = np.zeros(len(idx), dtype=np.int64)
        for i in range(inst.n):
            vals += unary[i][digits[:, i]]
        for (i, j), blk in model.blocks.items():
            vals += blk[digits[:, i], digits[:, j]]
        yield digits, vals


def enumerate_objectives(inst: Instance, cap: int = DEFAULT_CAP) -> ObjectiveTable:
    parts = list(_chunks(inst, cap))
    return ObjectiveTable(np.concatenate([p[0] for p in parts]),
                          np.concatenate([p[1] for p in parts]))


def brute_force(inst: Instance, cap: int = DEFAULT_CAP, keep_table: bool = False) -> OracleResult:
    """Exact minimum; ties go to the lexicographically smallest assignment."""
    if keep_table:
        table = enumerate_objectives(inst, cap)
        k = int(np.argmin(table.values))
        best = int(table.values[k])
        return OracleResult(Assignment(tuple(table.choices[k])), best,
                            int(np.count_nonzero(table.values == best)), table)

    best, best_choice, count = None, None, 0
    for digits, vals in _chunks(inst, cap):
        k = int(np.argmin(vals))
        v = int(vals[k])
        if best is None or v < best:
            best, best_choice = v, tuple(digits[k])
            count = int(np.count_nonzero(vals == v))
        elif v == best:
            count += int(np.count_nonzero(vals == v))
    return OracleResult(Assignment(best_choice), best, count)
