"""Turn a relaxation point into a feasible rotamer assignment.

Blocks are fixed one at a time in ascending position order and the point is
updated after every block, so later choices see earlier ones.

``first-support``
    pick the lowest index with a positive entry.
``greedy-gradient``
    pick the support index with the smallest block gradient. Replacing a
    simplex block by the vertex minimising its block gradient cannot raise f
    because f is linear in each block, so on feasible input the rounded
    objective never exceeds f(x).
``greedy-gradient-full``
    like ``greedy-gradient`` but searches the whole block; usable on
    infeasible penalty iterates with empty blocks. Gradient ties prefer the
    current support, so a binary point only changes when a strictly better
    rotamer exists for some position.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .instance import Assignment
from .model import DEFAULT_EPS, QsapModel, block_gradient, objective, objective_exact


class RoundingMode(str, Enum):
    FIRST_SUPPORT = "first-support"
    GREEDY_GRADIENT = "greedy-gradient"
    GREEDY_GRADIENT_FULL = "greedy-gradient-full"


class EmptySupportError(ValueError):
    pass


def round_point(model: QsapModel, x, mode: RoundingMode | str = RoundingMode.GREEDY_GRADIENT,
                eps: float = DEFAULT_EPS) -> Assignment:
    mode = RoundingMode(mode)
    x = np.array(x, dtype=np.float64)
    if x.shape != (model.m,):
        raise ValueError(f"point has shape {x.shape}, model dimension is {model.m}")
    choices = []
    for j in range(model.n):
        lo, hi = model.offsets[j], model.offsets[j + 1]
        xj = x[lo:hi]
        cand = np.flatnonzero(xj > eps)
        if mode is RoundingMode.GREEDY_GRADIENT_FULL:
            cand = np.arange(hi - lo)
        elif cand.size == 0:
            raise EmptySupportError(f"block {j + 1} has no entry above eps={eps:g}")

        if mode is RoundingMode.FIRST_SUPPORT:
            s = int(cand[0])
        else:
            g = block_gradient(model, x, j)[cand]
            best = cand[g == g.min()]
            # ties: lowest index, preferring the current support in full mode
            on_support = best[xj[best] > eps]
            s = int(on_support[0] if on_support.size else best[0])
        x[lo:hi] = 0.0
        x[lo + s] = 1.0
        choices.append(s)
    return Assignment(tuple(choices))


@dataclass(frozen=True)
class RoundingReport:
    assignment: Assignment
    objective: int
    relaxation: float
    non_increase: bool


def round_report(model: QsapModel, x, mode: RoundingMode | str = RoundingMode.GREEDY_GRADIENT,
                 eps: float = DEFAULT_EPS) -> RoundingReport:
    asg = round_point(model, x, mode, eps)
    value = objective_exact(model, asg)
    fx = objective(model, x)
    scale = max(1.0, abs(fx))
    return RoundingReport(asg, value, fx, value <= fx + 1e-9 * scale)
