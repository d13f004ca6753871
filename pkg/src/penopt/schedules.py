"""Published parameter schedules for both penalty solvers.

Each schedule is a pure function of the iteration index and the instance
constants, so horizonless dynamic runs are possible and every formula is
unit-testable in isolation.  Iteration indices are 1-based.

Integer quantities that come from floors/ceilings of base-2 logarithms are
computed in exact integer arithmetic; an off-by-one in the switch-over index
``k0`` would silently change every later parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import penalty_smoothness

__all__ = [
    "Alg1Params",
    "Alg2Params",
    "alg1_constant",
    "alg1_dynamic",
    "alg2_fixed",
    "alg2_constant_rho",
    "alg2_dynamic",
    "alg2_horizon_threshold",
    "guarantee_start",
    "sampling_distribution",
    "lk_rk",
]


@dataclass(frozen=True)
class Alg1Params:
    """Per-iteration parameters of the accelerated stochastic penalty loop."""

    rho: float
    beta: float   # combination weight, >= 1
    gamma: float  # prox step size


@dataclass(frozen=True)
class Alg2Params:
    """Per-outer-iteration parameters of the variance-reduced penalty loop."""

    rho: float
    alpha: float
    p: float
    gamma: float
    inner_steps: int  # T_k
    k0: int

    def theta(self) -> np.ndarray:
        """Averaging weights over the inner iterates.

        All inner points share the weight ``(gamma/alpha)(alpha + p)`` except
        the last, which gets ``gamma/alpha``.
        """
        w = np.full(self.inner_steps, (self.gamma / self.alpha) * (self.alpha + self.p))
        w[-1] = self.gamma / self.alpha
        return w


# ---------------------------------------------------------------------------
# stochastic solver schedules
# ---------------------------------------------------------------------------


def alg1_constant(k: int, K: int, L_grad_f: float, L_grad_c2: float) -> Alg1Params:
    """Constant-penalty setting: ``rho = K^(3/2)`` for a fixed horizon ``K``."""
    if K < 2:
        raise ValueError("the constant-penalty setting needs a horizon K >= 2")
    if not 1 <= k <= K:
        raise ValueError(f"iteration index {k} outside 1..{K}")
    rho = float(K) ** 1.5
    beta = (k + 1) / 2.0
    gamma = (k + 1) / (4.0 * penalty_smoothness(L_grad_f, L_grad_c2, rho))
    return Alg1Params(rho=rho, beta=beta, gamma=gamma)


def alg1_dynamic(k: int, L_grad_f: float, L_grad_c2: float) -> Alg1Params:
    """Dynamic-penalty setting: ``rho_k = (k+4)^(3/2)``, no horizon needed."""
    if k < 1:
        raise ValueError("iteration index must be >= 1")
    rho = float(k + 4) ** 1.5
    beta = (k + 4) / 5.0
    gamma = (k + 4) / (10.0 * penalty_smoothness(L_grad_f, L_grad_c2, rho))
    return Alg1Params(rho=rho, beta=beta, gamma=gamma)


# ---------------------------------------------------------------------------
# variance-reduced solver schedules
# ---------------------------------------------------------------------------


def _k0_fixed(s: int) -> int:
    # floor(log2 s) + 1, exact for all integers s >= 1
    return s.bit_length()


def _k0_dynamic_sfso(s: int) -> int:
    # floor((4/3) log2 s) + 1 = floor(floor(log2 s^4) / 3) + 1, exact
    return ((s ** 4).bit_length() - 1) // 3 + 1


def _ceil_pow2_3q(k: int) -> int:
    # ceil(2^(3(k-1)/4)), exact: smallest T with T^4 >= 2^(3(k-1))
    n = 1 << (3 * (k - 1))
    t = math.isqrt(math.isqrt(n))
    return t if t ** 4 >= n else t + 1


def alg2_horizon_threshold(s: int) -> int:
    """Smallest horizon the constant-penalty guarantees ask for."""
    k0 = _k0_fixed(s)
    return max(k0 + 1, 2 * (k0 - 3))


def alg2_constant_rho(
    k: int, s: int, rho: float, L_per_component, L_grad_c2: float
) -> Alg2Params:
    """Constant-penalty parameter family for a caller-chosen ``rho``.

    Doubling inner loops up to ``k0 = floor(log2 s) + 1``, then a fixed inner
    length with decaying ``alpha``.
    """
    if k < 1:
        raise ValueError("outer iteration index must be >= 1")
    if rho <= 0:
        raise ValueError("penalty parameter must be positive")
    k0 = _k0_fixed(s)
    alpha = 0.5 if k <= k0 else 2.0 / (k - k0 + 4)
    T = 2 ** (k - 1) if k <= k0 else 2 ** (k0 - 1)
    L_bar = float(np.mean(np.asarray(L_per_component, dtype=float)))
    gamma = 1.0 / (3.0 * penalty_smoothness(L_bar, L_grad_c2, rho) * alpha)
    return Alg2Params(rho=rho, alpha=alpha, p=0.5, gamma=gamma, inner_steps=T, k0=k0)


def alg2_fixed(
    k: int,
    K: int,
    s: int,
    L_per_component,
    L_grad_c2: float,
    variant: str,
    *,
    strict: bool = True,
) -> Alg2Params:
    """Constant-penalty setting with the published ``rho`` choices.

    ``variant="sfso"`` picks ``rho = s^(2/3) K^(4/3)`` (deterministic
    feasibility target); ``variant="efso"`` picks ``rho = sqrt(s) K``
    (in-expectation feasibility target).  With ``strict`` the horizon must
    meet the guarantee threshold; the runner relaxes this after warning.
    """
    threshold = alg2_horizon_threshold(s)
    if strict and K < threshold:
        raise ValueError(
            f"horizon K={K} below the guarantee threshold {threshold} for s={s}"
        )
    if variant == "sfso":
        rho = float(s) ** (2.0 / 3.0) * float(K) ** (4.0 / 3.0)
    elif variant == "efso":
        rho = math.sqrt(s) * float(K)
    else:
        raise ValueError(f"unknown variant {variant!r}; expected 'sfso' or 'efso'")
    return alg2_constant_rho(k, s, rho, L_per_component, L_grad_c2)


def alg2_dynamic(
    k: int, s: int, L_per_component, L_grad_c2: float, variant: str
) -> Alg2Params:
    """Dynamic-penalty setting: geometric ``rho`` warmup, then polynomial growth.

    ``variant="sfso"``: switch-over ``k0 = floor((4/3) log2 s) + 1``, inner
    length ``ceil(2^(3(k-1)/4))`` capped at its ``k0`` value, and
    ``rho_k = 3 s^(2/3) (k - k0 + 7)^(4/3) / 32`` after the warmup.
    ``variant="efso"``: ``k0 = floor(log2 s) + 1``, doubling inner length
    capped at ``2^(k0-1)``, and ``rho_k = 3 sqrt(s) (k - k0 + 7) / 16``.
    """
    if k < 1:
        raise ValueError("outer iteration index must be >= 1")
    if variant == "sfso":
        k0 = _k0_dynamic_sfso(s)
        T = _ceil_pow2_3q(min(k, k0))
        if k <= k0:
            rho = 2.0 ** (k / 2.0)
        else:
            rho = 3.0 * float(s) ** (2.0 / 3.0) * float(k - k0 + 7) ** (4.0 / 3.0) / 32.0
    elif variant == "efso":
        k0 = _k0_fixed(s)
        T = 2 ** (min(k, k0) - 1)
        if k <= k0:
            rho = 2.0 ** (k / 2.0)
        else:
            rho = 3.0 * math.sqrt(s) * (k - k0 + 7) / 16.0
    else:
        raise ValueError(f"unknown variant {variant!r}; expected 'sfso' or 'efso'")
    alpha = 6.0 / 7.0 if k <= k0 else 6.0 / (k - k0 + 7)
    L_bar = float(np.mean(np.asarray(L_per_component, dtype=float)))
    gamma = 1.0 / (8.0 * penalty_smoothness(L_bar, L_grad_c2, rho) * alpha)
    return Alg2Params(rho=rho, alpha=alpha, p=1.0 / 7.0, gamma=gamma, inner_steps=T, k0=k0)


def guarantee_start(s: int, variant_kind: str) -> int:
    """First outer index covered by the dynamic-penalty guarantees.

    Earlier iterates are still produced; runs flag this threshold in their
    metadata instead of refusing to start.
    """
    if variant_kind == "sfso":
        k0 = _k0_dynamic_sfso(s)
    elif variant_kind == "efso":
        k0 = _k0_fixed(s)
    else:
        raise ValueError(f"unknown variant {variant_kind!r}")
    return max(k0 + 1, 2 * (k0 - 7))


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def sampling_distribution(L_per_component) -> np.ndarray:
    """Importance weights ``q_i = L_i / sum_j L_j`` for component sampling."""
    L = np.asarray(L_per_component, dtype=float)
    if np.any(L < 0):
        raise ValueError("component smoothness bounds must be nonnegative")
    total = L.sum()
    if total <= 0:
        raise ValueError("at least one component smoothness bound must be positive")
    return L / total


def lk_rk(params: Alg2Params) -> tuple[float, float]:
    """Total and carried averaging mass of one outer iteration.

    The pair drives the telescoping argument behind the dynamic-penalty
    guarantees; their difference always equals ``gamma * T``.
    """
    base = params.gamma / params.alpha
    lk = base + (params.inner_steps - 1) * base * (params.alpha + params.p)
    rk = base * (1.0 - params.alpha) + (params.inner_steps - 1) * params.gamma * params.p / params.alpha
    return lk, rk
