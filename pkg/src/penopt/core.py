"""Problem definitions and the quadratic-penalty machinery shared by all solvers.

A problem is ``minimize  F(x) = f(x) + psi(x)  subject to  c(x) <= 0`` where
``f`` is either the exact mean of finitely many smooth convex components or the
expectation of a sampled smooth convex function, ``psi`` is an l1 term plus a
box indicator (the proximable regularizer), and ``c`` is a smooth deterministic
convex constraint map.  The solvers never touch ``c`` directly: they work on
the penalty surrogate ``F(x) + (rho/2) * ||[c(x)]_+||^2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DomainError",
    "NumericalError",
    "ComponentOracle",
    "FiniteSumObjective",
    "CallableComponents",
    "StochasticObjective",
    "Regularizer",
    "ConstraintMap",
    "AffineConstraints",
    "SmoothConstraints",
    "InstanceConstants",
    "FiniteSumProblem",
    "StochasticProblem",
    "positive_part",
    "constraint_violation",
    "penalty_value",
    "penalty_gradient_full",
    "prox_composite",
    "prox_linearized_step",
    "constraint_curvature_constant",
    "penalty_smoothness",
    "as_single_component",
    "as_single_atom",
]


class DomainError(ValueError):
    """A point lies outside the regularizer's box domain."""


class NumericalError(RuntimeError):
    """A solver produced a non-finite quantity; the message carries the iteration."""


def positive_part(v):
    """Componentwise projection onto the nonnegative orthant, ``max(v, 0)``."""
    return np.maximum(np.asarray(v, dtype=float), 0.0)


# ---------------------------------------------------------------------------
# objectives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComponentOracle:
    """One smooth convex term: value, gradient, and a gradient-Lipschitz bound."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    lipschitz: float


class FiniteSumObjective:
    """Mean of ``s`` smooth convex components with per-component smoothness bounds.

    Subclasses back the component oracles by whatever storage is convenient
    (callables, data rows, ...) and may override :meth:`value` and
    :meth:`gradient` with vectorized implementations.  The defaults average
    the per-component oracles, so the mean-of-components identity holds by
    construction for any subclass that does not override them.
    """

    lipschitz: np.ndarray  # shape (s,), entries L_i >= 0

    @property
    def n_components(self) -> int:
        return int(self.lipschitz.shape[0])

    @property
    def mean_lipschitz(self) -> float:
        """Smoothness bound for the mean: the average of the component bounds."""
        return float(np.mean(self.lipschitz))

    def component_value(self, i: int, x: np.ndarray) -> float:
        raise NotImplementedError

    def component_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def value(self, x: np.ndarray) -> float:
        s = self.n_components
        return sum(self.component_value(i, x) for i in range(s)) / s

    def gradient(self, x: np.ndarray) -> np.ndarray:
        s = self.n_components
        g = np.zeros_like(np.asarray(x, dtype=float))
        for i in range(s):
            g += self.component_grad(i, x)
        return g / s


class CallableComponents(FiniteSumObjective):
    """Finite-sum objective backed by explicit per-component oracles."""

    def __init__(self, components: Sequence[ComponentOracle]):
        if len(components) < 1:
            raise ValueError("a finite sum needs at least one component")
        self.components = tuple(components)
        self.lipschitz = np.array([c.lipschitz for c in components], dtype=float)
        if np.any(self.lipschitz < 0):
            raise ValueError("component smoothness bounds must be nonnegative")

    def component_value(self, i, x):
        return float(self.components[i].value(x))

    def component_grad(self, i, x):
        return np.asarray(self.components[i].grad(x), dtype=float)


class StochasticObjective:
    """Objective given as a stream of sampled smooth convex functions.

    ``draw(rng)`` returns one realization as a :class:`ComponentOracle`.  When
    the sample space is finite, pass ``support`` as ``(probabilities,
    oracles)`` so that expectations can be enumerated exactly in tests and in
    :func:`penalty_gradient_full`; ``draw`` is then derived from it.
    """

    def __init__(
        self,
        draw: Callable[[np.random.Generator], ComponentOracle] | None = None,
        *,
        mean_lipschitz: float,
        gradient_bound: float | None = None,
        variance_bound: float | None = None,
        value_spread: float | None = None,
        support: tuple[np.ndarray, Sequence[ComponentOracle]] | None = None,
    ):
        if draw is None and support is None:
            raise ValueError("need either a draw function or a finite support")
        self.mean_lipschitz = float(mean_lipschitz)
        self.gradient_bound = gradient_bound
        self.variance_bound = variance_bound
        self.value_spread = value_spread
        if support is not None:
            probs = np.asarray(support[0], dtype=float)
            oracles = tuple(support[1])
            if probs.shape != (len(oracles),) or abs(probs.sum() - 1.0) > 1e-12:
                raise ValueError("support probabilities must match the oracles and sum to 1")
            self.support = (probs, oracles)
            cdf = np.cumsum(probs)
            if draw is None:
                def draw(rng, _cdf=cdf, _oracles=oracles):
                    return _oracles[int(np.searchsorted(_cdf, rng.random(), side="right"))]
        else:
            self.support = None
        self.draw = draw

    def sample_gradient(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Gradient of one freshly sampled realization at ``x``."""
        return np.asarray(self.draw(rng).grad(x), dtype=float)

    def mean_gradient(self, x: np.ndarray) -> np.ndarray:
        """Exact mean gradient; only available for a finite support."""
        if self.support is None:
            raise ValueError("mean gradient requires a finite-support sampler")
        probs, oracles = self.support
        g = np.zeros_like(np.asarray(x, dtype=float))
        for p, oracle in zip(probs, oracles):
            g += p * np.asarray(oracle.grad(x), dtype=float)
        return g

    def mean_value(self, x: np.ndarray) -> float:
        if self.support is None:
            raise ValueError("mean value requires a finite-support sampler")
        probs, oracles = self.support
        return float(sum(p * oracle.value(x) for p, oracle in zip(probs, oracles)))


# ---------------------------------------------------------------------------
# regularizer
# ---------------------------------------------------------------------------


class Regularizer:
    """Weighted l1 term plus a box indicator, with an exact proximal operator.

    ``l1_weight`` may be a scalar or a per-coordinate vector (the experiments
    penalize the weights but not the intercept).  Bounds may be ``+-inf``
    per coordinate.
    """

    def __init__(self, l1_weight=0.0, lower=-np.inf, upper=np.inf):
        self.l1_weight = np.asarray(l1_weight, dtype=float)
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if np.any(self.l1_weight < 0):
            raise ValueError("l1 weight must be nonnegative")
        if np.any(self.lower > self.upper):
            raise ValueError("box lower bounds must not exceed upper bounds")

    def value(self, x) -> float:
        """The l1 part only; the box indicator is handled via :meth:`in_domain`."""
        return float(np.sum(self.l1_weight * np.abs(x)))

    def in_domain(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def project(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def prox(self, v, gamma: float) -> np.ndarray:
        """``argmin_x  psi(x) + ||x - v||^2 / (2 gamma)``.

        Soft-threshold then clip; both parts are separable so the composition
        is exact.
        """
        if gamma <= 0:
            raise ValueError("prox step size must be positive")
        v = np.asarray(v, dtype=float)
        t = gamma * self.l1_weight
        shrunk = np.sign(v) * np.maximum(np.abs(v) - t, 0.0)
        return np.clip(shrunk, self.lower, self.upper)

    def sample_uniform(self, dim: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform draw from the box; requires finite bounds."""
        lo = np.broadcast_to(self.lower, (dim,))
        hi = np.broadcast_to(self.upper, (dim,))
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("uniform initialization needs a bounded box")
        return rng.uniform(lo, hi)

    def box_diameter(self, dim: int) -> float:
        lo = np.broadcast_to(self.lower, (dim,))
        hi = np.broadcast_to(self.upper, (dim,))
        return float(np.linalg.norm(hi - lo))


def prox_composite(reg: Regularizer, v, gamma: float) -> np.ndarray:
    """Proximal step on the composite regularizer; see :meth:`Regularizer.prox`."""
    return reg.prox(v, gamma)


def prox_linearized_step(reg: Regularizer, g, z_prev, gamma: float) -> np.ndarray:
    """``argmin_{x in box}  gamma (<g, x> + psi(x)) + ||x - z_prev||^2 / 2``.

    Completing the square reduces this to ``prox(z_prev - gamma * g, gamma)``.
    """
    return reg.prox(np.asarray(z_prev, dtype=float) - gamma * np.asarray(g, dtype=float), gamma)


# ---------------------------------------------------------------------------
# constraints
# ---------------------------------------------------------------------------


class ConstraintMap:
    """``m`` smooth convex rows ``c_i(x) <= 0`` with per-row constants.

    ``lipschitz`` bounds each row's Lipschitz constant, ``grad_lipschitz`` each
    row's gradient-Lipschitz constant, and ``value_bound`` bounds ``|c_i|`` on
    the domain.  Together they determine the smoothness of the squared-hinge
    penalty via :attr:`curvature_constant`.
    """

    lipschitz: np.ndarray
    grad_lipschitz: np.ndarray
    value_bound: np.ndarray

    @property
    def n_rows(self) -> int:
        return int(self.lipschitz.shape[0])

    def value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian_t_apply(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Apply the transposed Jacobian of ``c`` at ``x`` to ``v``."""
        raise NotImplementedError

    @property
    def curvature_constant(self) -> float:
        """Smoothness constant of ``||[c(.)]_+||^2 / 2``.

        Each row contributes ``L_c^2 + C * L_gc``; rows with a flat gradient
        contribute their Lipschitz term only, even when ``C`` is infinite.
        """
        total = 0.0
        for lc, lgc, cb in zip(self.lipschitz, self.grad_lipschitz, self.value_bound):
            total += lc * lc
            if lgc > 0:
                if not np.isfinite(cb):
                    raise ValueError("curved constraint rows need a finite value bound")
                total += cb * lgc
        return float(total)

    def violation(self, x) -> float:
        """Euclidean norm of the clipped constraint values, ``||[c(x)]_+||``."""
        if self.n_rows == 0:
            return 0.0
        return float(np.linalg.norm(positive_part(self.value(np.asarray(x, dtype=float)))))

    def penalty_term(self, x, rho: float) -> float:
        """``(rho/2) * ||[c(x)]_+||^2``."""
        v = self.violation(x)
        return 0.5 * rho * v * v

    def penalty_gradient(self, x, rho: float) -> np.ndarray:
        """``rho * grad c(x) [c(x)]_+``, the gradient of :meth:`penalty_term`."""
        x = np.asarray(x, dtype=float)
        if self.n_rows == 0:
            return np.zeros_like(x)
        return rho * self.jacobian_t_apply(x, positive_part(self.value(x)))


class AffineConstraints(ConstraintMap):
    """Affine rows ``c_i(x) = <a_i, x> + b_i``.

    Row constants are exact: ``L_{c_i} = ||a_i||``, ``L_{grad c_i} = 0``.  The
    value bound over a box is ``|b_i| + sum_j |A_ij| max(|lo_j|, |hi_j|)``,
    attained at a corner; without a box it is left infinite, which is harmless
    because affine rows contribute no curvature term.
    """

    def __init__(self, A, b, *, box_lower=None, box_upper=None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("row count of A must match the length of b")
        self.lipschitz = np.linalg.norm(self.A, axis=1) if self.A.size else np.zeros(self.A.shape[0])
        self.grad_lipschitz = np.zeros(self.A.shape[0])
        if box_lower is not None and box_upper is not None:
            corner = np.maximum(
                np.abs(np.broadcast_to(np.asarray(box_lower, dtype=float), (self.A.shape[1],))),
                np.abs(np.broadcast_to(np.asarray(box_upper, dtype=float), (self.A.shape[1],))),
            )
            self.value_bound = np.abs(self.b) + np.abs(self.A) @ corner
        else:
            self.value_bound = np.full(self.A.shape[0], np.inf)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.A.shape[1]:
            raise ValueError(
                f"constraint map expects dimension {self.A.shape[1]}, got {x.shape[0]}"
            )
        return self.A @ x + self.b

    def jacobian_t_apply(self, x, v):
        return self.A.T @ np.asarray(v, dtype=float)

    @classmethod
    def empty(cls, dim: int) -> "AffineConstraints":
        return cls(np.zeros((0, dim)), np.zeros(0))


class SmoothConstraints(ConstraintMap):
    """Generic smooth convex constraint hook: caller supplies value and J^T-apply."""

    def __init__(self, value_fn, jacobian_t_fn, *, lipschitz, grad_lipschitz, value_bound):
        self._value = value_fn
        self._jac_t = jacobian_t_fn
        self.lipschitz = np.asarray(lipschitz, dtype=float)
        self.grad_lipschitz = np.asarray(grad_lipschitz, dtype=float)
        self.value_bound = np.asarray(value_bound, dtype=float)
        if not (self.lipschitz.shape == self.grad_lipschitz.shape == self.value_bound.shape):
            raise ValueError("per-row constant arrays must have matching shapes")

    def value(self, x):
        return np.asarray(self._value(np.asarray(x, dtype=float)), dtype=float)

    def jacobian_t_apply(self, x, v):
        return np.asarray(self._jac_t(np.asarray(x, dtype=float), np.asarray(v, dtype=float)), dtype=float)


def constraint_violation(constraints: ConstraintMap, x) -> float:
    """``||[c(x)]_+||``; zero exactly on the feasible set."""
    return constraints.violation(x)


def constraint_curvature_constant(constraints: ConstraintMap) -> float:
    """Smoothness constant of the squared-hinge penalty, summed over rows."""
    return constraints.curvature_constant


def penalty_smoothness(L_grad_f: float, L_grad_c2: float, rho: float) -> float:
    """Smoothness of the penalized smooth part, ``L_grad_f + rho * L_grad_c2``."""
    if L_grad_f < 0 or L_grad_c2 < 0 or rho < 0:
        raise ValueError("smoothness inputs must be nonnegative")
    return L_grad_f + rho * L_grad_c2


# ---------------------------------------------------------------------------
# assembled problems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InstanceConstants:
    """Known constants of one problem instance.

    ``L_grad_f`` is the smoothness bound of the (mean) smooth objective,
    ``L_grad_c2`` the curvature constant of the squared-hinge penalty,
    ``diameter`` the box diameter.  The rest are optional and used only for
    reporting or certificates: ``sigma`` (gradient noise), ``grad_bound``
    (max sampled gradient norm), ``value_spread`` (objective range),
    ``value_bound`` (sampled-value range for SAA), ``multiplier_norm``
    (minimal optimal multiplier norm, when an oracle supplies it).
    """

    L_grad_f: float
    L_grad_c2: float
    diameter: float
    sigma: float | None = None
    grad_bound: float | None = None
    value_spread: float | None = None
    value_bound: float | None = None
    multiplier_norm: float | None = None

    def __post_init__(self):
        for name in ("L_grad_f", "L_grad_c2", "diameter", "sigma", "grad_bound",
                     "value_spread", "value_bound", "multiplier_norm"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class FiniteSumProblem:
    """Constrained finite-sum problem with exact component oracles."""

    objective: FiniteSumObjective
    regularizer: Regularizer
    constraints: ConstraintMap
    constants: InstanceConstants

    def objective_value(self, x) -> float:
        """Exact ``F(x) = fbar(x) + psi(x)`` (box membership not checked)."""
        return self.objective.value(x) + self.regularizer.value(x)


@dataclass(frozen=True)
class StochasticProblem:
    """Constrained expectation problem with a sampling oracle.

    ``evaluation`` is a fixed finite-sum stand-in used only to report
    objective values along a trajectory; it never feeds back into iterates.
    """

    objective: StochasticObjective
    regularizer: Regularizer
    constraints: ConstraintMap
    constants: InstanceConstants
    evaluation: FiniteSumObjective | None = None

    def objective_value(self, x) -> float:
        """Monte-Carlo ``F(x)`` over the fixed evaluation set."""
        if self.evaluation is None:
            raise ValueError("no evaluation set attached to this stochastic problem")
        return self.evaluation.value(x) + self.regularizer.value(x)


def penalty_value(problem, x, rho: float) -> float:
    """``F(x) + (rho/2) ||[c(x)]_+||^2``; exact for finite sums.

    Raises :class:`DomainError` outside the box, where ``psi`` is infinite.
    """
    x = np.asarray(x, dtype=float)
    if not problem.regularizer.in_domain(x):
        raise DomainError("point lies outside the box domain")
    return problem.objective_value(x) + problem.constraints.penalty_term(x, rho)


def penalty_gradient_full(problem, x, rho: float) -> np.ndarray:
    """Exact gradient of the smooth penalized part at ``x``.

    For a finite sum this is the full mean gradient plus the penalty gradient;
    for a stochastic objective it enumerates a finite support.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(problem.objective, StochasticObjective):
        g = problem.objective.mean_gradient(x)
    else:
        g = problem.objective.gradient(x)
    return g + problem.constraints.penalty_gradient(x, rho)


# ---------------------------------------------------------------------------
# wrappers used by the deterministic reference paths
# ---------------------------------------------------------------------------


def as_single_component(problem: FiniteSumProblem) -> FiniteSumProblem:
    """Collapse the finite sum into one exact component.

    The variance-reduced solver run on the result is a deterministic
    accelerated proximal-gradient method (the estimator noise vanishes).
    """
    obj = problem.objective
    wrapped = CallableComponents([
        ComponentOracle(value=obj.value, grad=obj.gradient, lipschitz=obj.mean_lipschitz)
    ])
    return FiniteSumProblem(wrapped, problem.regularizer, problem.constraints, problem.constants)


def as_single_atom(problem: FiniteSumProblem) -> StochasticProblem:
    """View a finite-sum problem as a single-atom stochastic problem.

    The sampler always returns the exact mean oracle, so stochastic solvers
    behave deterministically on the result; useful for certificates and tests.
    """
    obj = problem.objective
    atom = ComponentOracle(value=obj.value, grad=obj.gradient, lipschitz=obj.mean_lipschitz)
    stoch = StochasticObjective(
        mean_lipschitz=obj.mean_lipschitz,
        variance_bound=0.0,
        support=(np.array([1.0]), [atom]),
    )
    constants = InstanceConstants(
        L_grad_f=problem.constants.L_grad_f,
        L_grad_c2=problem.constants.L_grad_c2,
        diameter=problem.constants.diameter,
        sigma=0.0,
        grad_bound=problem.constants.grad_bound,
        value_spread=problem.constants.value_spread,
        value_bound=problem.constants.value_bound,
        multiplier_norm=problem.constants.multiplier_norm,
    )
    evaluation = CallableComponents([atom])
    return StochasticProblem(stoch, problem.regularizer, problem.constraints, constants, evaluation)
