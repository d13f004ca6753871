"""Variance-reduced accelerated method for constrained finite-sum problems.

A single pass of a modified variance-reduced accelerated gradient scheme runs
over the penalty surrogates ``min fbar(x) + psi(x) + (rho_k/2)||[c(x)]_+||^2``.
The mean-objective gradient is estimated by an importance-sampled SVRG
correction around an outer reference point whose full gradient is recomputed
exactly every outer iteration; the penalty gradient is never sampled.  The
outer iterate is a theta-weighted average of the inner iterates.

Gradient accounting: ``s`` component evaluations per outer full-gradient pass
plus two per inner step (the sampled component at the query point and at the
reference point).  Constraint-gradient work is not counted; the experiment
regime keeps the number of constraint rows small and fixed.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import FiniteSumProblem, NumericalError
from .record import RunRecord, checkpoints
from .schedules import (
    Alg2Params,
    alg2_dynamic,
    alg2_fixed,
    alg2_horizon_threshold,
    guarantee_start,
    sampling_distribution,
)

__all__ = ["AliasSampler", "Alg2State", "svrg_gradient", "alg2_inner_step",
           "make_alg2_schedule", "run_algorithm2"]


class AliasSampler:
    """O(1) categorical sampler over a fixed distribution (Vose's method).

    Built once per instance; a draw consumes one integer and one uniform from
    the supplied generator, so trajectories do not depend on recording.
    """

    def __init__(self, q):
        q = np.asarray(q, dtype=float)
        n = len(q)
        if n == 0 or abs(q.sum() - 1.0) > 1e-9 or np.any(q < 0):
            raise ValueError("need a probability vector")
        self.n = n
        scaled = q * n
        self.prob = np.ones(n)
        self.alias = np.arange(n)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            self.prob[s] = scaled[s]
            self.alias[s] = l
            scaled[l] = (scaled[l] + scaled[s]) - 1.0
            (small if scaled[l] < 1.0 else large).append(l)
        for i in large + small:
            self.prob[i] = 1.0

    def draw(self, rng: np.random.Generator) -> int:
        i = int(rng.integers(self.n))
        return i if rng.random() < self.prob[i] else int(self.alias[i])


@dataclass
class Alg2State:
    """Mutable inner-loop state of one run."""

    x: np.ndarray        # inner iterate x_t
    z: np.ndarray        # inner prox iterate z_t
    x_ref: np.ndarray    # outer reference point
    g_ref: np.ndarray    # exact full gradient at the reference point
    k: int
    t: int
    grad_evals: int


def svrg_gradient(objective, constraints, y, x_ref, g_ref, i, q, rho):
    """Importance-sampled estimator of the penalized gradient at ``y``.

    ``(grad f_i(y) - grad f_i(x_ref)) / (q_i s) + g_ref`` estimates the mean
    gradient without bias; the penalty gradient is added exactly.
    """
    qi = q[i]
    if qi <= 0.0:
        raise ValueError(f"component {i} has zero sampling probability")
    s = objective.n_components
    corr = (objective.component_grad(i, y) - objective.component_grad(i, x_ref)) / (qi * s)
    return corr + g_ref + constraints.penalty_gradient(y, rho)


def alg2_inner_step(
    state: Alg2State,
    problem: FiniteSumProblem,
    params: Alg2Params,
    q: np.ndarray,
    sampler: AliasSampler,
    rng: np.random.Generator,
) -> Alg2State:
    """One inner iteration: sample, extrapolate, prox, recombine.

    ``alpha + p <= 1`` keeps ``y`` and the new ``x`` convex combinations of
    box points.  Costs two component-gradient evaluations.
    """
    a, p = params.alpha, params.p
    if a + p > 1.0 + 1e-12:
        raise ValueError("alpha + p must not exceed 1")
    base = 1.0 - a - p
    y = base * state.x + a * state.z + p * state.x_ref
    i = sampler.draw(rng)
    g = svrg_gradient(problem.objective, problem.constraints, y, state.x_ref,
                      state.g_ref, i, q, params.rho)
    if not np.all(np.isfinite(g)):
        raise NumericalError(f"non-finite gradient at outer {state.k}, inner {state.t}")
    z_next = problem.regularizer.prox(state.z - params.gamma * g, params.gamma)
    x_next = base * state.x + a * z_next + p * state.x_ref
    return Alg2State(
        x=x_next, z=z_next, x_ref=state.x_ref, g_ref=state.g_ref,
        k=state.k, t=state.t + 1, grad_evals=state.grad_evals + 2,
    )


def make_alg2_schedule(
    kind: str,
    variant: str,
    problem: FiniteSumProblem,
    K: int | None = None,
) -> Callable[[int], Alg2Params]:
    """Bind a named schedule and variant to the instance constants.

    The fixed schedules require a horizon; when it falls below the guarantee
    threshold the run proceeds anyway after a warning.
    """
    L = problem.objective.lipschitz
    s = problem.objective.n_components
    L_c2 = problem.constants.L_grad_c2
    if kind == "constant":
        if K is None:
            raise ValueError("the constant-penalty schedules need the horizon K")
        threshold = alg2_horizon_threshold(s)
        if K < threshold:
            warnings.warn(
                f"horizon K={K} below the guarantee threshold {threshold} for s={s}; "
                "running without the published guarantees",
                stacklevel=2,
            )
        return lambda k: alg2_fixed(k, K, s, L, L_c2, variant, strict=False)
    if kind == "dynamic":
        return lambda k: alg2_dynamic(k, s, L, L_c2, variant)
    raise ValueError(f"unknown schedule {kind!r}; expected 'constant' or 'dynamic'")


def run_algorithm2(
    problem: FiniteSumProblem,
    K: int,
    *,
    schedule: str | Callable[[int], Alg2Params] = "dynamic",
    variant: str = "sfso",
    x0: np.ndarray | None = None,
    seed: int = 0,
    record_every: int | str = 1,
    inner_trace: list | None = None,
) -> tuple[np.ndarray, RunRecord]:
    """Run outer iterations ``k = 1..K-1`` and return the averaged iterate.

    Returns ``(x_tilde_K, trajectory)`` with one trajectory row per recorded
    outer iterate carrying the exact objective, the deterministic violation,
    and the penalty parameter.  ``K = 1`` returns ``x0`` unchanged.  Passing a
    list as ``inner_trace`` collects ``(k, [x_t...])`` per outer iteration for
    diagnostics.
    """
    if K < 1:
        raise ValueError("need a horizon K >= 1")
    params_at = schedule if callable(schedule) else make_alg2_schedule(schedule, problem, K)
    q = sampling_distribution(problem.objective.lipschitz)
    sampler = AliasSampler(q)
    s = problem.objective.n_components

    rng = np.random.default_rng(seed)
    dim = problem.constraints.A.shape[1] if hasattr(problem.constraints, "A") else None
    if x0 is None:
        if dim is None:
            raise ValueError("pass x0 explicitly for non-affine constraint maps")
        x0 = problem.regularizer.sample_uniform(dim, rng)
    x0 = np.asarray(x0, dtype=float)
    if not problem.regularizer.in_domain(x0):
        raise ValueError("x0 must lie in the box domain")

    marks = set(checkpoints(K, record_every))
    x_tilde = x0.copy()
    z_tilde = x0.copy()
    grad_evals = 0
    rows_k, rows_evals, rows_obj, rows_viol, rows_rho = [], [], [], [], []

    def record(k: int, point: np.ndarray) -> None:
        rows_k.append(k)
        rows_evals.append(grad_evals)
        rows_obj.append(problem.objective_value(point))
        rows_viol.append(problem.constraints.violation(point))
        rows_rho.append(params_at(k).rho)

    t0 = time.perf_counter()
    if 1 in marks:
        record(1, x_tilde)
    for k in range(1, K):
        params = params_at(k)
        g_ref = problem.objective.gradient(x_tilde)
        grad_evals += s
        state = Alg2State(x=x_tilde.copy(), z=z_tilde.copy(), x_ref=x_tilde,
                          g_ref=g_ref, k=k, t=0, grad_evals=grad_evals)
        T = params.inner_steps
        w_mid = (params.gamma / params.alpha) * (params.alpha + params.p)
        w_last = params.gamma / params.alpha
        acc = np.zeros_like(x_tilde)
        xs = [] if inner_trace is not None else None
        for t in range(1, T + 1):
            state = alg2_inner_step(state, problem, params, q, sampler, rng)
            acc += (w_last if t == T else w_mid) * state.x
            if xs is not None:
                xs.append(state.x.copy())
        grad_evals = state.grad_evals
        z_tilde = state.z
        x_tilde = acc / (w_mid * (T - 1) + w_last)
        if xs is not None:
            inner_trace.append((k, xs))
        if (k + 1) in marks:
            record(k + 1, x_tilde)

    meta = {
        "algorithm": "alg2",
        "schedule": schedule if isinstance(schedule, str) else "custom",
        "variant": variant if not callable(schedule) else None,
        "K": K,
        "seed": seed,
        "grad_evals_total": grad_evals,
        "wall_time_s": time.perf_counter() - t0,
    }
    if schedule == "dynamic":
        meta["guarantee_from"] = guarantee_start(s, variant)
    elif schedule == "constant":
        meta["horizon_threshold"] = alg2_horizon_threshold(s)
    rec = RunRecord(rows_k, rows_evals, rows_obj, rows_viol, rows_rho, meta=meta)
    return x_tilde, rec
