"""Quadratic penalty method for the relaxed QSAP.

Outer loop: minimise ``f(x) + sigma/2 * sum_i (sum_r x_ir - 1)^2`` over
``x >= 0`` starting from the previous iterate, then grow ``sigma`` by ``rho``.
The loop stops once the per-block argmax profile has been identical (and
tie-free) for ``stable_T`` consecutive outer iterations; only the support
matters for the final rounding, so sigma never has to go to infinity.

Inner solver: two-metric projected descent with an Armijo test along the
projection arc. Variables pinned at zero with a positive gradient get a
diagonal step; the remaining (free) variables are scaled by the inverse of
``c*I + sigma*E`` where ``E`` is the all-ones matrix inside each block. That
matrix is the penalty Hessian with ``B`` replaced by ``c*I``, so block-sum
directions always get an exact Newton step while ``c`` acts as the curvature
guess for within-block directions (along which f is linear). ``c`` starts at
a Gershgorin bound on ``||B||``, doubles on every rejected trial and halves
after a step accepted at first try. Each block inverse is closed form
(Sherman-Morrison), keeping the cost of an iteration at one product with B.
"""
from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from .instance import Assignment
from .model import (DEFAULT_EPS, QsapModel, SupportSet, block_sums, objective,
                    objective_exact, support, uniform_point)
from .rounding import EmptySupportError, RoundingMode, round_point

log = logging.getLogger(__name__)

ARMIJO_C = 1e-4
SIGMA0_FACTOR = 5.0
MAX_BACKTRACKS = 60

CONTINUE = "continue"
SUPPORT_STABLE = "support-stable"
SIGMA_CAP = "sigma-cap"
ITER_CAP = "iter-cap"


class NumericalFailure(ArithmeticError):
    """A non-finite penalty value showed up; the energies need rescaling."""


@dataclass
class PenaltyParams:
    sigma0: Optional[float] = None       # None: SIGMA0_FACTOR * (||B||_gersh + max|a|), >= 1
    rho: float = 10.0
    sigma_cap: Optional[float] = None    # None: 1e12 * sigma0
    inner_max_iters: int = 500
    outer_max_iters: int = 200
    inner_tol: float = 1e-6              # relative: ||pg||_inf <= inner_tol * (1 + |P(x)|)
    stable_T: int = 10
    eps_support: float = DEFAULT_EPS
    seed: int = 0
    tie_perturbation: float = 0.0        # relative jitter on x0; 0 disables

    def __post_init__(self):
        if self.sigma0 is not None and not self.sigma0 > 0:
            raise ValueError("sigma0 must be > 0")
        if not self.rho > 1:
            raise ValueError("rho must be > 1")
        if self.sigma_cap is not None and not self.sigma_cap > 0:
            raise ValueError("sigma_cap must be > 0")
        if self.stable_T < 1:
            raise ValueError("stable_T must be >= 1")
        if self.inner_max_iters < 1 or self.outer_max_iters < 1:
            raise ValueError("iteration budgets must be >= 1")
        if not self.inner_tol > 0:
            raise ValueError("inner_tol must be > 0")
        if self.eps_support < 0:
            raise ValueError("eps_support must be >= 0")
        if self.tie_perturbation < 0:
            raise ValueError("tie_perturbation must be >= 0")

    def initial_sigma(self, model: QsapModel) -> float:
        if self.sigma0 is not None:
            return float(self.sigma0)
        return max(1.0, SIGMA0_FACTOR * gradient_scale(model))

    def cap(self, model: QsapModel) -> float:
        if self.sigma_cap is not None:
            return float(self.sigma_cap)
        return 1e12 * self.initial_sigma(model)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PenaltyParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass(frozen=True)
class TraceEntry:
    k: int
    sigma: float
    objective: float
    penalty: float
    infeasibility: float
    l0: int
    inner_iters: int
    inner_converged: bool


@dataclass
class SolverState:
    k: int
    x: np.ndarray
    sigma: float
    history: deque
    trace: list = field(default_factory=list)


@dataclass
class SolveReport:
    z: np.ndarray
    assignment: Assignment
    objective: int
    relaxation: float
    outer_iters: int
    inner_iters: int
    time_ms: float
    reason: str
    trace: list
    sigma: float
    final_l0: int
    final_infeasibility: float
    unique_argmax: bool
    rounding_mode: str


def penalty_objective(model: QsapModel, x, sigma: float) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.m,):
        raise ValueError(f"point has shape {x.shape}, model dimension is {model.m}")
    r = block_sums(model, x) - 1.0
    return float(0.5 * x @ (model.B @ x) + model.a @ x + 0.5 * sigma * (r @ r))


def penalty_gradient(model: QsapModel, x, sigma: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.m,):
        raise ValueError(f"point has shape {x.shape}, model dimension is {model.m}")
    r = block_sums(model, x) - 1.0
    return model.a + model.B @ x + sigma * r[model.position_of]


def _value_and_grad(model, x, sigma):
    # overflow surfaces as a non-finite value, which the caller checks
    with np.errstate(over="ignore", invalid="ignore"):
        Bx = model.B @ x
        r = np.add.reduceat(x, model.offsets[:-1]) - 1.0
        val = 0.5 * (x @ Bx) + model.a @ x + 0.5 * sigma * (r @ r)
        return float(val), model.a + Bx + sigma * r[model.position_of]


def projected_gradient(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    return np.where(x > 0, g, np.minimum(g, 0.0))


def curvature_scale(model: QsapModel) -> float:
    """Gershgorin bound on ||B||, floored so separable models still get a finite step."""
    if model.B.nnz:
        c = float(np.max(np.abs(model.B).sum(axis=1)))
        if c > 0:
            return c
    return 1e-3 * max(1.0, float(np.max(np.abs(model.a))) if model.m else 1.0)


def gradient_scale(model: QsapModel) -> float:
    """Upper bound on |grad f| over the product of simplices."""
    bound = float(np.max(np.abs(model.a))) if model.m else 0.0
    if model.B.nnz:
        bound += float(np.max(np.abs(model.B).sum(axis=1)))
    return bound


@dataclass(frozen=True)
class InnerResult:
    x: np.ndarray
    iters: int
    converged: bool
    value: float


def minimize_penalty(model: QsapModel, x_start, sigma: float, params: PenaltyParams,
                     frozen: Optional[np.ndarray] = None,
                     callback: Optional[Callable[[np.ndarray, float], None]] = None
                     ) -> InnerResult:
    """Inner solver with statistics.

    ``frozen`` marks entries that never move; ``callback(x, value)`` sees the
    start point and every accepted iterate.
    """
    x = np.maximum(np.array(x_start, dtype=np.float64), 0.0)
    if x.shape != (model.m,):
        raise ValueError(f"point has shape {x.shape}, model dimension is {model.m}")
    if frozen is None:
        frozen = np.zeros(model.m, dtype=bool)
    c = curvature_scale(model)
    ck, c_floor = c, 1e-12 * c
    starts = model.offsets[:-1]
    pos = model.position_of

    val, g = _value_and_grad(model, x, sigma)
    if not np.isfinite(val):
        raise NumericalFailure(f"non-finite penalty value at sigma={sigma:g}")
    if callback is not None:
        callback(x, val)
    it = 0
    converged = False
    while True:
        pg = projected_gradient(x, g)
        pg[frozen] = 0.0
        if np.max(np.abs(pg), initial=0.0) <= params.inner_tol * (1.0 + abs(val)):
            converged = True
            break
        if it >= params.inner_max_iters:
            break
        it += 1

        # Bertsekas' epsilon-active set: near-bound variables pushed outwards
        w = float(np.max(np.abs(x - np.maximum(x - g / (c + sigma), 0.0))))
        eps_act = min(1e-6, w)
        active = ((x <= eps_act) & (g > 0)) | frozen
        free = ~active
        k_free = np.add.reduceat(free.astype(np.float64), starts)
        g_free_sum = np.add.reduceat(np.where(free, g, 0.0), starts)

        first_try = True
        for _ in range(MAX_BACKTRACKS):
            shift = sigma * g_free_sum / (ck + sigma * k_free)
            d = np.where(free, -(g - shift[pos]) / ck, -g / (ck + sigma))
            d[frozen] = 0.0
            xt = np.maximum(x + d, 0.0)
            decrease = g @ (xt - x)
            if decrease < 0:
                vt, gt = _value_and_grad(model, xt, sigma)
                if vt <= val + ARMIJO_C * decrease:
                    break
            ck *= 2.0
            first_try = False
        else:
            # no representable decrease left at this sigma
            break
        if first_try:
            ck = max(0.5 * ck, c_floor)
        if not np.isfinite(vt):
            raise NumericalFailure(f"non-finite penalty value at sigma={sigma:g}")
        x, val, g = xt, vt, gt
        if callback is not None:
            callback(x, val)
    return InnerResult(x, it, converged, val)


def solve_subproblem(model: QsapModel, x_start, sigma: float,
                     params: Optional[PenaltyParams] = None) -> np.ndarray:
    """Approximately minimise the penalty function over ``x >= 0`` from ``x_start``."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    return minimize_penalty(model, x_start, sigma, params or PenaltyParams()).x


def check_termination(state: SolverState, params: PenaltyParams,
                      sigma_cap: Optional[float] = None) -> str:
    """Return ``"continue"`` or the stop reason for the state after an outer step."""
    hist = state.history
    if len(hist) >= params.stable_T:
        last = list(hist)[-params.stable_T:]
        if all(h == last[-1] for h in last) and all(len(j) == 1 for j in last[-1]):
            return SUPPORT_STABLE
    cap = params.sigma_cap if sigma_cap is None else sigma_cap
    if cap is not None and state.sigma * params.rho > cap:
        return SIGMA_CAP
    if state.k >= params.outer_max_iters:
        return ITER_CAP
    return CONTINUE


def _round(model, x, mode, eps):
    mode = RoundingMode(mode)
    try:
        return round_point(model, x, mode, eps), mode
    except EmptySupportError:
        log.info("empty block support at eps=%g; rounding over whole blocks", eps)
        mode = RoundingMode.GREEDY_GRADIENT_FULL
        return round_point(model, x, mode, eps), mode


def _report(model, x, asg, mode, *, k, inner, t0, reason, trace, sigma, eps):
    sup = support(model, x, eps)
    r = block_sums(model, x) - 1.0
    return SolveReport(
        z=x, assignment=asg, objective=objective_exact(model, asg),
        relaxation=objective(model, x), outer_iters=k, inner_iters=inner,
        time_ms=(time.perf_counter() - t0) * 1e3, reason=reason, trace=trace,
        sigma=sigma, final_l0=sup.l0, final_infeasibility=float(np.max(np.abs(r))),
        unique_argmax=sup.unique, rounding_mode=mode.value,
    )


def solve(model: QsapModel, params: Optional[PenaltyParams] = None, x0=None,
          mode: RoundingMode | str = RoundingMode.GREEDY_GRADIENT) -> SolveReport:
    """Run the penalty method, round the final iterate and report."""
    params = params or PenaltyParams()
    t0 = time.perf_counter()
    eps = params.eps_support

    if x0 is None:
        x = uniform_point(model)
    else:
        x = np.array(x0, dtype=np.float64)
        if x.shape != (model.m,):
            raise ValueError(f"x0 has shape {x.shape}, model dimension is {model.m}")
        if np.any(x < 0):
            raise ValueError("x0 must be non-negative")
    if params.tie_perturbation > 0:
        rng = np.random.default_rng(params.seed)
        x = x * (1.0 + params.tie_perturbation * rng.uniform(-1.0, 1.0, size=model.m))

    frozen = (model.counts == 1)[model.position_of]
    x[frozen] = 1.0
    sigma = params.initial_sigma(model)

    if model.n == 1:
        s = int(np.argmin(model.a))
        x = np.zeros(model.m)
        x[s] = 1.0
        asg = Assignment((s,))
        return _report(model, x, asg, RoundingMode(mode), k=0, inner=0, t0=t0,
                       reason=SUPPORT_STABLE, trace=[], sigma=sigma, eps=eps)

    cap = params.cap(model)
    state = SolverState(k=0, x=x, sigma=sigma, history=deque(maxlen=params.stable_T))
    inner_total = 0
    while True:
        res = minimize_penalty(model, state.x, state.sigma, params, frozen)
        state.k += 1
        inner_total += res.iters
        state.x = res.x
        sup: SupportSet = support(model, res.x, eps)
        state.history.append(sup.argmax)
        r = block_sums(model, res.x) - 1.0
        state.trace.append(TraceEntry(
            k=state.k, sigma=state.sigma, objective=objective(model, res.x),
            penalty=res.value, infeasibility=float(np.max(np.abs(r))), l0=sup.l0,
            inner_iters=res.iters, inner_converged=res.converged))
        reason = check_termination(state, params, cap)
        if reason != CONTINUE:
            break
        state.sigma *= params.rho

    asg, used = _round(model, state.x, mode, eps)
    return _report(model, state.x, asg, used, k=state.k, inner=inner_total, t0=t0,
                   reason=reason, trace=state.trace, sigma=state.sigma, eps=eps)
