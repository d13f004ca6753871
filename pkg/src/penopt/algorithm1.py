"""Single-loop accelerated stochastic gradient method over penalty surrogates.

One pass of an accelerated stochastic gradient scheme is applied to the
sequence of quadratic penalty problems ``min F(x) + (rho_k/2)||[c(x)]_+||^2``
while ``rho_k`` follows a published schedule.  Each iteration draws exactly one
objective sample; the penalty part of the gradient is deterministic and always
exact.  The output iterate is the last ``x_K``, not an average.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import NumericalError, StochasticProblem
from .record import RunRecord, checkpoints
from .schedules import Alg1Params, alg1_constant, alg1_dynamic

__all__ = ["Alg1State", "alg1_step", "make_alg1_schedule", "run_algorithm1"]


@dataclass
class Alg1State:
    """Mutable per-run state; owned by exactly one run."""

    x: np.ndarray
    z: np.ndarray
    k: int
    grad_evals: int
    rng: np.random.Generator


def alg1_step(state: Alg1State, problem: StochasticProblem, params: Alg1Params) -> Alg1State:
    """Advance one iteration.

    ``y = (1 - 1/beta) x + (1/beta) z`` is the query point; a single sampled
    objective gradient plus the exact penalty gradient drives a prox step on
    ``z``, and ``x`` is recombined with the new ``z``.  Convex combinations
    with ``beta >= 1`` and the prox keep every point inside the box.
    """
    if params.beta < 1.0:
        raise ValueError("combination weight beta must be >= 1")
    w = 1.0 / params.beta
    y = (1.0 - w) * state.x + w * state.z
    g = problem.objective.sample_gradient(y, state.rng)
    g = g + problem.constraints.penalty_gradient(y, params.rho)
    if not np.all(np.isfinite(g)):
        raise NumericalError(f"non-finite gradient at iteration {state.k}")
    z_next = problem.regularizer.prox(state.z - params.gamma * g, params.gamma)
    x_next = (1.0 - w) * state.x + w * z_next
    return Alg1State(
        x=x_next, z=z_next, k=state.k + 1, grad_evals=state.grad_evals + 1, rng=state.rng
    )


def make_alg1_schedule(
    kind: str, problem: StochasticProblem, K: int | None = None
) -> Callable[[int], Alg1Params]:
    """Bind a named schedule to the instance constants.

    Returns a callable ``k -> Alg1Params`` valid for ``k = 1..K`` (the final
    index is only ever used to report ``rho``).
    """
    L_f = problem.constants.L_grad_f
    L_c2 = problem.constants.L_grad_c2
    if kind == "constant":
        if K is None:
            raise ValueError("the constant schedule needs the horizon K")
        return lambda k: alg1_constant(k, K, L_f, L_c2)
    if kind == "dynamic":
        return lambda k: alg1_dynamic(k, L_f, L_c2)
    raise ValueError(f"unknown schedule {kind!r}; expected 'constant' or 'dynamic'")


def run_algorithm1(
    problem: StochasticProblem,
    K: int,
    *,
    schedule: str | Callable[[int], Alg1Params] = "dynamic",
    x1: np.ndarray | None = None,
    seed: int = 0,
    record_every: int | str = 1,
) -> tuple[np.ndarray, RunRecord]:
    """Run iterations ``k = 1..K-1`` and return ``(x_K, trajectory)``.

    ``x1`` defaults to a uniform draw from the box using the run's own RNG, so
    a seed fully determines the trajectory.  Recorded objective values are
    Monte-Carlo estimates over the problem's fixed evaluation set; they are
    measurement only and never feed back into the iterates.
    """
    if K < 2:
        raise ValueError("need a horizon K >= 2")
    if problem.evaluation is None:
        raise ValueError("attach an evaluation set before running (objective reporting)")
    params_at = schedule if callable(schedule) else make_alg1_schedule(schedule, problem, K)

    rng = np.random.default_rng(seed)
    dim = problem.constraints.A.shape[1] if hasattr(problem.constraints, "A") else None
    if x1 is None:
        if dim is None:
            raise ValueError("pass x1 explicitly for non-affine constraint maps")
        x1 = problem.regularizer.sample_uniform(dim, rng)
    x1 = np.asarray(x1, dtype=float)
    if not problem.regularizer.in_domain(x1):
        raise ValueError("x1 must lie in the box domain")

    marks = set(checkpoints(K, record_every))
    state = Alg1State(x=x1.copy(), z=x1.copy(), k=1, grad_evals=0, rng=rng)
    rows_k, rows_evals, rows_obj, rows_viol, rows_rho = [], [], [], [], []

    def record(st: Alg1State) -> None:
        rows_k.append(st.k)
        rows_evals.append(st.grad_evals)
        rows_obj.append(problem.objective_value(st.x))
        rows_viol.append(problem.constraints.violation(st.x))
        rows_rho.append(params_at(st.k).rho)

    t0 = time.perf_counter()
    if 1 in marks:
        record(state)
    for k in range(1, K):
        state = alg1_step(state, problem, params_at(k))
        if state.k in marks:
            record(state)

    meta = {
        "algorithm": "alg1",
        "schedule": schedule if isinstance(schedule, str) else "custom",
        "K": K,
        "seed": seed,
        "grad_evals_total": state.grad_evals,
        "wall_time_s": time.perf_counter() - t0,
    }
    rec = RunRecord(rows_k, rows_evals, rows_obj, rows_viol, rows_rho, meta=meta)
    return state.x, rec
