"""Sample average approximation driver for expectation-constrained problems.

The expectation objective is replaced by the mean over ``s`` i.i.d. sampled
realizations, with ``s`` chosen by a Hoeffding argument so that the sampling
error stays within half the target tolerance; the variance-reduced solver then
takes the surrogate the rest of the way.  Two plans map onto its two dynamic
schedules: an in-expectation feasibility target and a deterministic one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algorithm2 import run_algorithm2
from .core import (
    CallableComponents,
    FiniteSumProblem,
    InstanceConstants,
    StochasticProblem,
)
from .record import RunRecord

__all__ = ["SaaPlan", "sample_size", "build_saa_instance", "solve_saa"]

APPROACH_VARIANTS = {
    "efso_approach1": "efso",
    "sfso_approach2": "sfso",
}


def sample_size(V: float, epsilon: float) -> int:
    """Hoeffding sample size ``ceil(8 pi V^2 / eps^2)``."""
    if V <= 0 or epsilon <= 0:
        raise ValueError("value spread and tolerance must be positive")
    return math.ceil(8.0 * math.pi * V * V / (epsilon * epsilon))


@dataclass(frozen=True)
class SaaPlan:
    """Target tolerance, value-spread bound, and the solve approach.

    ``approach`` is ``"efso_approach1"`` (in-expectation feasibility, linear
    penalty growth) or ``"sfso_approach2"`` (deterministic feasibility, faster
    penalty growth).  The sample size is derived, never user-set.
    """

    epsilon: float
    value_spread: float
    approach: str = "efso_approach1"
    s: int = field(init=False)

    def __post_init__(self):
        if self.approach not in APPROACH_VARIANTS:
            raise ValueError(
                f"unknown approach {self.approach!r}; expected one of {sorted(APPROACH_VARIANTS)}"
            )
        object.__setattr__(self, "s", sample_size(self.value_spread, self.epsilon))

    @property
    def variant(self) -> str:
        return APPROACH_VARIANTS[self.approach]


def build_saa_instance(
    problem: StochasticProblem, s: int, seed: int | np.random.Generator = 0
) -> FiniteSumProblem:
    """Draw ``s`` i.i.d. realizations and assemble the sample average problem.

    Each realization becomes one component with its own smoothness bound; the
    regularizer and constraints carry over unchanged.  The surrogate's mean
    smoothness is the average of the sampled bounds.
    """
    if s < 1:
        raise ValueError("sample size must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    components = [problem.objective.draw(rng) for _ in range(s)]
    objective = CallableComponents(components)
    constants = InstanceConstants(
        L_grad_f=objective.mean_lipschitz,
        L_grad_c2=problem.constants.L_grad_c2,
        diameter=problem.constants.diameter,
        value_bound=problem.constants.value_bound,
        multiplier_norm=problem.constants.multiplier_norm,
    )
    return FiniteSumProblem(objective, problem.regularizer, problem.constraints, constants)


def solve_saa(
    problem: StochasticProblem,
    plan: SaaPlan,
    K: int,
    seed: int = 0,
    *,
    record_every: int | str = 1,
) -> tuple[np.ndarray, RunRecord]:
    """Build the surrogate for ``plan`` and solve it with the matching schedule.

    The seed splits into independent streams for sampling and solving, so the
    pair ``(seed, plan)`` fully determines the sample set and the trajectory.
    The returned violation column is the deterministic ``||[c(x)]_+||`` of the
    averaged iterates.
    """
    sample_seq, solve_seq = np.random.SeedSequence(seed).spawn(2)
    surrogate = build_saa_instance(problem, plan.s, np.random.default_rng(sample_seq))
    solver_seed = int(solve_seq.generate_state(1)[0])
    x, rec = run_algorithm2(
        surrogate,
        K,
        schedule="dynamic",
        variant=plan.variant,
        seed=solver_seed,
        record_every=record_every,
    )
    rec.meta.update({
        "saa_epsilon": plan.epsilon,
        "saa_value_spread": plan.value_spread,
        "saa_sample_size": plan.s,
        "saa_approach": plan.approach,
        "seed": seed,
    })
    return x, rec
