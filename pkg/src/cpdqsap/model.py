"""QSAP data ``(a, B)`` assembled from an instance, plus the primitives on it.

A point is a plain float64 array of length ``m`` read blockwise through
``model.offsets``: block ``i`` is ``x[offsets[i]:offsets[i + 1]]``.

``B`` is kept twice: as the one-sided list of present ``(i, j)`` blocks with
``i < j`` (exact integers, used for exact objectives and block kernels) and as
a symmetric CSR matrix for the solver's matrix-vector products. Neither is a
dense ``m x m`` array.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .instance import INT64_MAX, INT64_MIN, Assignment, Instance, check_assignment

DEFAULT_EPS = 1e-8


@dataclass(frozen=True, eq=False)
class QsapModel:
    n: int
    m: int
    counts: np.ndarray          # l_i, int64
    offsets: np.ndarray         # length n + 1, offsets[-1] == m
    position_of: np.ndarray     # global index -> block
    a: np.ndarray               # float64
    a_int: np.ndarray           # int64
    blocks: dict                # (i, j) with i < j -> int64 array (l_i, l_j)
    B: sp.csr_matrix            # symmetric float64, zero diagonal blocks
    instance: Instance

    def block(self, x: np.ndarray, i: int) -> np.ndarray:
        return x[self.offsets[i]:self.offsets[i + 1]]

    def neighbours(self, i: int):
        """Yield ``(j, B_ij)`` for present blocks touching ``i``, as ``l_i x l_j``."""
        for (p, q), blk in self.blocks.items():
            if p == i:
                yield q, blk
            elif q == i:
                yield p, blk.T


def build_model(inst: Instance) -> QsapModel:
    counts = np.asarray(inst.rotamer_counts, dtype=np.int64)
    offsets = np.zeros(inst.n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    m = int(offsets[-1])

    a_int = np.zeros(m, dtype=np.int64)
    for (i, r), e in inst.unary.items():
        a_int[offsets[i] + r] = e

    blocks: dict[tuple[int, int], np.ndarray] = {}
    rows, cols, vals = [], [], []
    for (i, r, j, s), e in inst.pairwise.items():
        blk = blocks.get((i, j))
        if blk is None:
            blk = blocks[i, j] = np.zeros((counts[i], counts[j]), dtype=np.int64)
        blk[r, s] = e
        if e != 0:
            rows.append(offsets[i] + r)
            cols.append(offsets[j] + s)
            vals.append(float(e))
    blocks = dict(sorted(blocks.items()))

    upper = sp.coo_matrix((vals, (rows, cols)), shape=(m, m), dtype=np.float64)
    B = (upper + upper.T).tocsr()
    return QsapModel(
        n=inst.n, m=m, counts=counts, offsets=offsets,
        position_of=np.repeat(np.arange(inst.n), counts),
        a=a_int.astype(np.float64), a_int=a_int, blocks=blocks, B=B,
        instance=inst,
    )


def _check_dim(model: QsapModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.m,):
        raise ValueError(f"point has shape {x.shape}, model dimension is {model.m}")
    return x


def objective(model: QsapModel, x) -> float:
    """f(x) = 1/2 x'Bx + a'x."""
    x = _check_dim(model, x)
    return float(0.5 * x @ (model.B @ x) + model.a @ x)


def objective_by_blocks(model: QsapModel, x, transpose: bool = False) -> float:
    """Same value as :func:`objective`, summed one present block pair at a time.

    With ``transpose`` each pair is evaluated through the ``(j, i)`` block.
    """
    x = _check_dim(model, x)
    total = float(model.a @ x)
    for (i, j), blk in model.blocks.items():
        xi, xj = model.block(x, i), model.block(x, j)
        if transpose:
            total += float(xj @ (blk.T.astype(np.float64) @ xi))
        else:
            total += float(xi @ (blk.astype(np.float64) @ xj))
    return total


def objective_exact(model: QsapModel, asg: Assignment) -> int:
    """Total energy of an assignment in exact integer arithmetic."""
    check_assignment(model.instance, asg)
    c = asg.choices
    total = sum(int(model.a_int[model.offsets[i] + c[i]]) for i in range(model.n))
    for (i, j), blk in model.blocks.items():
        total += int(blk[c[i], c[j]])
    if not INT64_MIN <= total <= INT64_MAX:
        raise OverflowError(f"objective {total} overflows int64")
    return total


def embed(model: QsapModel, asg: Assignment) -> np.ndarray:
    check_assignment(model.instance, asg)
    x = np.zeros(model.m)
    x[model.offsets[:-1] + np.asarray(asg.choices, dtype=np.int64)] = 1.0
    return x


def gradient(model: QsapModel, x) -> np.ndarray:
    x = _check_dim(model, x)
    return model.a + model.B @ x


def block_gradient(model: QsapModel, x, i: int) -> np.ndarray:
    """Gradient of f with respect to block ``i`` (0-based): a_i + sum_j B_ij x_j.

    Does not read block ``i`` of ``x``.
    """
    x = _check_dim(model, x)
    if not 0 <= i < model.n:
        raise IndexError(f"position {i} out of range for n={model.n}")
    g = model.a[model.offsets[i]:model.offsets[i + 1]].copy()
    for j, blk in model.neighbours(i):
        g += blk @ model.block(x, j)
    return g


@dataclass(frozen=True)
class SupportSet:
    """Positive entries and argmax profile of a point.

    ``per_block`` and ``argmax`` hold local (within-block) indices; ``gamma``
    holds global ones. Every element of ``argmax`` lists all tied maximisers.
    """

    per_block: tuple[tuple[int, ...], ...]
    gamma: tuple[int, ...]
    argmax: tuple[tuple[int, ...], ...]

    @property
    def l0(self) -> int:
        return len(self.gamma)

    @property
    def unique(self) -> bool:
        return all(len(j) == 1 for j in self.argmax)

    def representatives(self) -> tuple[int, ...]:
        """Lowest tied index per block."""
        return tuple(j[0] for j in self.argmax)


def support(model: QsapModel, x, eps: float = DEFAULT_EPS) -> SupportSet:
    """Entries above ``eps``; argmax ties are entries within ``eps`` of the block max."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    x = _check_dim(model, x)
    per_block, argmax = [], []
    for i in range(model.n):
        xi = model.block(x, i)
        per_block.append(tuple(int(p) for p in np.flatnonzero(xi > eps)))
        argmax.append(tuple(int(p) for p in np.flatnonzero(xi >= xi.max() - eps)))
    gamma = tuple(int(p) for p in np.flatnonzero(x > eps))
    return SupportSet(tuple(per_block), gamma, tuple(argmax))


def block_sums(model: QsapModel, x) -> np.ndarray:
    return np.add.reduceat(np.asarray(x, dtype=np.float64), model.offsets[:-1])


def feasibility(model: QsapModel, x) -> tuple[np.ndarray, float]:
    """Per-block residuals ``sum(x_i) - 1`` and the most negative entry (0 if none)."""
    x = _check_dim(model, x)
    return block_sums(model, x) - 1.0, float(min(x.min(), 0.0))


def uniform_point(model: QsapModel) -> np.ndarray:
    return 1.0 / model.counts[model.position_of].astype(np.float64)


def random_feasible_point(model: QsapModel, rng: np.random.Generator,
                          sparsity: Optional[float] = None) -> np.ndarray:
    """Random point with every block on its simplex.

    With ``sparsity`` each entry is dropped with that probability (at least
    one entry per block is kept) so faces of the simplex get exercised too.
    """
    x = rng.exponential(size=model.m)
    if sparsity:
        x[rng.random(model.m) < sparsity] = 0.0
        for i in range(model.n):
            blk = x[model.offsets[i]:model.offsets[i + 1]]
            if not blk.any():
                blk[rng.integers(len(blk))] = 1.0
    return x / block_sums(model, x)[model.position_of]
