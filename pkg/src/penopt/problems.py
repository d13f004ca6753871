"""Benchmark problem construction.

Two logistic-regression families and a small box QP:

* a synthetic constrained stochastic model whose samples come from a planted
  logistic generative model, with margin constraints on the pool points
  nearest the planted decision boundary;
* a constrained finite-sum model over a LIBSVM-format dataset, with margin
  constraints on the samples nearest a reference decision boundary obtained
  by solving the unconstrained problem first;
* a strongly convex box QP with orthonormal affine constraints whose optimum,
  multipliers, and penalty optima are known in closed form (the certificate
  workhorse).

In both logistic families the constraint labels are reset by the sign rule so
the constructed problem is feasible by construction: the (boxed) reference
pair satisfies every margin constraint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algorithm2 import run_algorithm2
from .core import (
    AffineConstraints,
    CallableComponents,
    ComponentOracle,
    FiniteSumObjective,
    FiniteSumProblem,
    InstanceConstants,
    Regularizer,
    StochasticObjective,
    StochasticProblem,
    as_single_component,
)

__all__ = [
    "LabeledDataset",
    "CoreSampleSet",
    "LogisticFiniteSum",
    "logistic_component",
    "component_lipschitz",
    "generate_synthetic_stochastic",
    "load_libsvm",
    "build_finitesum_constrained",
    "box_qp",
    "QpInfo",
]


def _expit(t):
    # stable logistic sigmoid; avoids overflow for large |t|
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


def _sgn(v):
    # sign with the 0 -> +1 convention used for label resets
    return np.where(np.asarray(v) >= 0, 1.0, -1.0)


# ---------------------------------------------------------------------------
# logistic machinery
# ---------------------------------------------------------------------------


def component_lipschitz(x_i) -> float:
    """Smoothness bound of one logistic term: ``(||x_i||^2 + 1) / 4``.

    The +1 accounts for the intercept coordinate; the 1/4 is the curvature
    bound of the sigmoid.
    """
    x_i = np.asarray(x_i, dtype=float)
    return float(x_i @ x_i + 1.0) / 4.0


def logistic_component(x_i, y_i) -> ComponentOracle:
    """Negative log-likelihood of one sample as a function of ``(w, b)``.

    Value ``log(1 + exp(-y (w.x + b)))`` via ``logaddexp`` and gradient
    ``-y sigma(-y (w.x + b)) (x; 1)``; both stay finite for any margin a box
    domain can produce.
    """
    if y_i not in (-1, 1):
        raise ValueError("labels must be -1 or +1")
    x_i = np.asarray(x_i, dtype=float)
    y = float(y_i)
    ext = np.append(x_i, 1.0)

    def value(v):
        margin = float(x_i @ v[:-1] + v[-1])
        return float(np.logaddexp(0.0, -y * margin))

    def grad(v):
        margin = float(x_i @ v[:-1] + v[-1])
        return (-y * _expit(-y * margin)) * ext

    return ComponentOracle(value=value, grad=grad, lipschitz=component_lipschitz(x_i))


class LogisticFiniteSum(FiniteSumObjective):
    """Mean logistic loss over a dataset, vectorized over samples.

    The decision variable is ``(w, b)`` with the intercept last.
    """

    def __init__(self, features, labels):
        self.features = np.asarray(features, dtype=float)
        self.labels = np.asarray(labels, dtype=float)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("feature and label counts differ")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        self.lipschitz = (np.einsum("ij,ij->i", self.features, self.features) + 1.0) / 4.0

    def _margins(self, v):
        return self.features @ v[:-1] + v[-1]

    def value(self, v):
        v = np.asarray(v, dtype=float)
        return float(np.mean(np.logaddexp(0.0, -self.labels * self._margins(v))))

    def gradient(self, v):
        v = np.asarray(v, dtype=float)
        r = -self.labels * _expit(-self.labels * self._margins(v)) / self.labels.shape[0]
        return np.append(self.features.T @ r, r.sum())

    def component_value(self, i, v):
        v = np.asarray(v, dtype=float)
        margin = self.features[i] @ v[:-1] + v[-1]
        return float(np.logaddexp(0.0, -self.labels[i] * margin))

    def component_grad(self, i, v):
        v = np.asarray(v, dtype=float)
        margin = self.features[i] @ v[:-1] + v[-1]
        coef = -self.labels[i] * _expit(-self.labels[i] * margin)
        return coef * np.append(self.features[i], 1.0)


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabeledDataset:
    """Binary-labeled feature vectors of uniform dimension."""

    features: np.ndarray  # (count, n)
    labels: np.ndarray    # (count,), entries in {-1, +1}

    def __post_init__(self):
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("feature and label counts differ")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")

    @property
    def count(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    def subset(self, count: int) -> "LabeledDataset":
        return LabeledDataset(self.features[:count], self.labels[:count])


@dataclass(frozen=True)
class CoreSampleSet:
    """Feature/label pairs whose margins become the deterministic constraints."""

    features: np.ndarray  # (m, n)
    labels: np.ndarray    # (m,)
    indices: np.ndarray   # positions in the source pool/dataset

    @property
    def count(self) -> int:
        return int(self.labels.shape[0])


def load_libsvm(path, n_features: int | None = None) -> LabeledDataset:
    """Read a LIBSVM sparse text file: ``label idx:val idx:val ...`` per line.

    Indices are 1-based; the dimension defaults to the largest index seen.
    Labels must map to {-1, +1}.  Malformed input raises ``ValueError`` with
    the offending line number.
    """
    rows: list[dict[int, float]] = []
    labels: list[float] = []
    max_idx = 0
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            try:
                raw = float(tokens[0])
            except ValueError:
                raise ValueError(f"line {lineno}: bad label {tokens[0]!r}") from None
            if raw not in (-1.0, 1.0):
                raise ValueError(f"line {lineno}: label {tokens[0]!r} is not +-1")
            entries: dict[int, float] = {}
            for tok in tokens[1:]:
                try:
                    idx_str, val_str = tok.split(":", 1)
                    idx = int(idx_str)
                    val = float(val_str)
                except ValueError:
                    raise ValueError(f"line {lineno}: bad feature token {tok!r}") from None
                if idx < 1:
                    raise ValueError(f"line {lineno}: feature index {idx} must be >= 1")
                entries[idx] = val
                max_idx = max(max_idx, idx)
            rows.append(entries)
            labels.append(raw)
    n = n_features if n_features is not None else max_idx
    if max_idx > n:
        raise ValueError(f"feature index {max_idx} exceeds declared dimension {n}")
    X = np.zeros((len(rows), n))
    for i, entries in enumerate(rows):
        for idx, val in entries.items():
            X[i, idx - 1] = val
    return LabeledDataset(X, np.asarray(labels))


# ---------------------------------------------------------------------------
# constrained instances
# ---------------------------------------------------------------------------


def _margin_constraints(core: CoreSampleSet, dim: int) -> AffineConstraints:
    # rows c_i(w, b) = -y_i (x_i . w + b) <= 0
    if core.count == 0:
        return AffineConstraints.empty(dim)
    A = -core.labels[:, None] * np.hstack([core.features, np.ones((core.count, 1))])
    return AffineConstraints(A, np.zeros(core.count), box_lower=-1.0, box_upper=1.0)


def _select_core(features, margins, m, labels_from_sign=True) -> CoreSampleSet:
    # smallest |margin| first, ties broken by sample index (stable sort)
    order = np.argsort(np.abs(margins), kind="stable")[:m]
    labels = _sgn(margins[order])
    return CoreSampleSet(features=features[order], labels=labels, indices=order)


def _l1_box_regularizer(lam: float, dim: int) -> Regularizer:
    # the intercept coordinate is not penalized
    weights = np.full(dim, lam)
    weights[-1] = 0.0
    return Regularizer(weights, -1.0, 1.0)


def generate_synthetic_stochastic(
    n: int = 100,
    m: int = 50,
    pool: int = 10_000,
    seed: int = 0,
    lam: float = 0.1,
    sigma_probes: int = 8,
) -> tuple[StochasticProblem, dict]:
    """Constrained stochastic logistic regression from a planted model.

    Draws a ground-truth pair uniformly from the box, a pool of standard
    normal feature vectors with labels from the logistic model, and uses the
    ``m`` pool points nearest the planted boundary (smallest ``|margin|/||w||``;
    the normalization does not change the selection) as margin constraints,
    with labels reset by the sign rule.  The pool doubles as the fixed
    Monte-Carlo evaluation set.

    Reported constants: mean smoothness ``(n+1)/4`` (exact for standard normal
    features), a pool-based sampled-gradient bound, a probe-grid variance
    estimate inflated twofold, and a pool-based value-spread bound.  Only the
    smoothness constants enter the schedules.
    """
    if not 0 <= m <= pool:
        raise ValueError("need 0 <= m <= pool")
    rng = np.random.default_rng(seed)
    dim = n + 1
    w_ref = rng.uniform(-1.0, 1.0, dim)
    pool_X = rng.standard_normal((pool, n))
    margins = pool_X @ w_ref[:-1] + w_ref[-1]
    pool_y = np.where(rng.random(pool) < _expit(margins), 1.0, -1.0)

    core = _select_core(pool_X, margins, m)
    constraints = _margin_constraints(core, dim)
    if constraints.violation(w_ref) > 0:
        raise AssertionError("label reset failed to make the planted pair feasible")
    reg = _l1_box_regularizer(lam, dim)
    evaluation = LogisticFiniteSum(pool_X, pool_y)

    def draw(rng_: np.random.Generator) -> ComponentOracle:
        x = rng_.standard_normal(n)
        y = 1.0 if rng_.random() < _expit(x @ w_ref[:-1] + w_ref[-1]) else -1.0
        return logistic_component(x, y)

    ext_norms_sq = np.einsum("ij,ij->i", pool_X, pool_X) + 1.0
    grad_bound = float(np.sqrt(ext_norms_sq.max()))
    probe_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    sigma_sq = 0.0
    for _ in range(sigma_probes):
        v = reg.sample_uniform(dim, probe_rng)
        coef = -pool_y * _expit(-pool_y * (pool_X @ v[:-1] + v[-1]))
        grads = coef[:, None] * np.hstack([pool_X, np.ones((pool, 1))])
        sigma_sq = max(sigma_sq, float(np.mean(np.sum((grads - grads.mean(axis=0)) ** 2, axis=1))))
    max_margin = float((np.abs(pool_X).sum(axis=1) + 1.0).max())
    value_spread_bound = float(np.logaddexp(0.0, max_margin))

    objective = StochasticObjective(
        draw,
        mean_lipschitz=(n + 1) / 4.0,
        gradient_bound=grad_bound,
        variance_bound=2.0 * sigma_sq,
        value_spread=value_spread_bound,
    )
    constants = InstanceConstants(
        L_grad_f=(n + 1) / 4.0,
        L_grad_c2=constraints.curvature_constant,
        diameter=2.0 * np.sqrt(dim),
        sigma=float(np.sqrt(2.0 * sigma_sq)),
        grad_bound=grad_bound,
        value_bound=value_spread_bound,
    )
    problem = StochasticProblem(objective, reg, constraints, constants, evaluation)
    info = {
        "reference_pair": w_ref,
        "core": core,
        "pool": LabeledDataset(pool_X, pool_y),
    }
    return problem, info


def build_finitesum_constrained(
    dataset: LabeledDataset,
    lam: float = 0.03,
    m: int = 50,
    budget: int = 2000,
    seed: int = 0,
) -> tuple[FiniteSumProblem, dict]:
    """Constrained finite-sum logistic regression over a dataset.

    First solves the unconstrained smooth problem (no l1 term, no margin
    constraints, box kept) with the deterministic accelerated path under a
    ``budget`` measured in full-gradient passes, then constrains the ``m``
    samples nearest the reference boundary with sign-rule labels.  The
    objective keeps the original dataset labels.
    """
    if m > dataset.count:
        raise ValueError("cannot constrain more samples than the dataset holds")
    dim = dataset.n_features + 1
    objective = LogisticFiniteSum(dataset.features, dataset.labels)

    plain_box = Regularizer(0.0, -1.0, 1.0)
    unconstrained = FiniteSumProblem(
        objective,
        plain_box,
        AffineConstraints.empty(dim),
        InstanceConstants(
            L_grad_f=objective.mean_lipschitz, L_grad_c2=0.0, diameter=2.0 * np.sqrt(dim)
        ),
    )
    # the deterministic path costs three full-gradient passes per outer step
    K_ref = max(2, budget // 3)
    w_ref, _ = run_algorithm2(
        as_single_component(unconstrained),
        K_ref,
        schedule="constant",
        variant="efso",
        x0=np.zeros(dim),
        seed=0,
        record_every=max(1, K_ref),
    )

    margins = dataset.features @ w_ref[:-1] + w_ref[-1]
    core = _select_core(dataset.features, margins, m)
    constraints = _margin_constraints(core, dim)
    boxed_ref = plain_box.project(w_ref)
    if constraints.violation(boxed_ref) > 0:
        raise AssertionError("label reset failed to make the reference pair feasible")

    reg = _l1_box_regularizer(lam, dim)
    constants = InstanceConstants(
        L_grad_f=objective.mean_lipschitz,
        L_grad_c2=constraints.curvature_constant,
        diameter=2.0 * np.sqrt(dim),
    )
    problem = FiniteSumProblem(objective, reg, constraints, constants)
    info = {"reference_pair": w_ref, "core": core, "reference_budget": budget}
    return problem, info


# ---------------------------------------------------------------------------
# box QP with closed-form certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QpInfo:
    """Closed-form optimum data for :func:`box_qp` instances."""

    x_star: np.ndarray
    f_star: float
    multiplier_norm: float
    target: np.ndarray
    directions: np.ndarray
    offsets: np.ndarray

    def penalty_optimum(self, rho: float) -> float:
        """Optimal value of the squared-hinge penalty problem at ``rho``."""
        return rho / (rho + 2.0) * self.f_star


def box_qp(
    dim: int = 5,
    n_constraints: int = 2,
    *,
    seed: int = 0,
    box: float = 2.0,
    target=None,
    directions=None,
    offsets=None,
) -> tuple[FiniteSumProblem, QpInfo]:
    """``min ||x - target||^2`` over a box with active orthonormal constraints.

    Constraints are ``<a_i, x> <= <a_i, target> - d_i`` with orthonormal
    ``a_i`` and offsets ``d_i > 0``, so every constraint is active at the
    optimum ``x* = target - sum d_i a_i`` with multipliers ``2 d_i``, and the
    penalty problem at any ``rho`` has optimal value ``rho/(rho+2)`` times the
    optimal gap.  Defaults draw a well-conditioned random instance; explicit
    ``target``/``directions``/``offsets`` give hand-built cases.
    """
    rng = np.random.default_rng(seed)
    if target is None:
        target = rng.uniform(-box / 4, box / 4, dim)
    target = np.asarray(target, dtype=float)
    if directions is None:
        raw = rng.standard_normal((dim, max(n_constraints, 1)))
        q, _ = np.linalg.qr(raw)
        directions = q[:, :n_constraints].T
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    if offsets is None:
        offsets = rng.uniform(0.3, 0.7, directions.shape[0])
    offsets = np.asarray(offsets, dtype=float).reshape(-1)
    if np.any(offsets <= 0):
        raise ValueError("constraint offsets must be positive so all rows are active")
    gram = directions @ directions.T
    if directions.shape[0] and not np.allclose(gram, np.eye(directions.shape[0]), atol=1e-10):
        raise ValueError("constraint directions must be orthonormal")

    x_star = target - directions.T @ offsets
    if np.any(np.abs(x_star) > box) or np.any(np.abs(target) > box):
        raise ValueError("instance leaves the box; shrink the offsets or grow the box")

    A = directions
    b = -(A @ target - offsets)
    constraints = AffineConstraints(A, b, box_lower=-box, box_upper=box)
    reg = Regularizer(0.0, -box, box)

    def value(x):
        d = np.asarray(x, dtype=float) - target
        return float(d @ d)

    def grad(x):
        return 2.0 * (np.asarray(x, dtype=float) - target)

    objective = CallableComponents([ComponentOracle(value=value, grad=grad, lipschitz=2.0)])
    corner_gap = np.maximum(np.abs(-box - target), np.abs(box - target))
    constants = InstanceConstants(
        L_grad_f=2.0,
        L_grad_c2=constraints.curvature_constant,
        diameter=2.0 * box * np.sqrt(dim),
        sigma=0.0,
        grad_bound=2.0 * float(np.linalg.norm(corner_gap)),
        multiplier_norm=2.0 * float(np.linalg.norm(offsets)),
    )
    problem = FiniteSumProblem(objective, reg, constraints, constants)
    info = QpInfo(
        x_star=x_star,
        f_star=float(offsets @ offsets),
        multiplier_norm=2.0 * float(np.linalg.norm(offsets)),
        target=target,
        directions=directions,
        offsets=offsets,
    )
    return problem, info
