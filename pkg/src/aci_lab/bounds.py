"""Closed-form limits for the screening/verification tradeoff.

All gains are in bits per window.  ``p`` in :class:`InfoParams` is the
marginal prevalence ``P(T = 1)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

LN2 = math.log(2.0)
#: Largest admissible square-root constant, ``sqrt(ln 2 / 2)``.
C_MAX = math.sqrt(LN2 / 2.0)


@dataclass(frozen=True)
class Budgets:
    """Screening budget ``K`` and verification budget ``B``.

    ``B`` is an integer unless built with :meth:`continuous`, which the
    budget-planning round trip needs.
    """

    K: int
    B: int
    integral: bool = field(default=True, repr=False)

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K!r}")
        if not (0 <= self.B <= self.K):
            raise ValueError(f"B must lie in [0, K={self.K}], got {self.B!r}")
        if self.integral:
            if int(self.B) != self.B:
                raise ValueError(f"B must be an integer in [0, K={self.K}], got {self.B!r}")
            object.__setattr__(self, "B", int(self.B))
        else:
            object.__setattr__(self, "B", float(self.B))
        object.__setattr__(self, "K", int(self.K))

    @classmethod
    def continuous(cls, K: int, B: float) -> "Budgets":
        return cls(K, B, integral=False)

    def alpha(self) -> float:
        return self.B / self.K


@dataclass(frozen=True)
class InfoParams:
    """``p``: prevalence; ``J = I(T;Z)``; ``I_ver = I(Theta;V | T=1)``;
    ``H_theta``: entropy of one claim."""

    p: float
    J: float
    I_ver: float
    H_theta: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ValueError(f"p must be a probability, got {self.p!r}")
        for name in ("J", "I_ver", "H_theta"):
            if not getattr(self, name) >= 0.0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if self.I_ver > self.H_theta * (1 + 1e-12):
            raise ValueError("I_ver cannot exceed H_theta")


@dataclass(frozen=True)
class BoundReport:
    gain_converse: float
    gain_achievable: float
    gain_random: float
    gain_oracle_ceiling: float
    required_B: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)


def enrichment_bound(p: float, J: float, alpha: float) -> float:
    """Upper bound on ``P(T=1 | selected)`` for any selection of rate ``alpha``."""
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    if J < 0:
        raise ValueError(f"J must be >= 0, got {J!r}")
    return min(1.0, p + math.sqrt(LN2 * J / (2.0 * alpha)))


def converse_gain(params: InfoParams, budgets: Budgets) -> float:
    """``I_ver (B p + sqrt(ln2/2 * J K B))``, with no ceiling applied."""
    K, B = budgets.K, budgets.B
    return params.I_ver * (B * params.p + math.sqrt(LN2 / 2.0 * params.J * K * B))


def required_budget(params: InfoParams, K: int, delta_gain: float) -> float:
    """Smallest real B for which the converse admits a gain of ``delta_gain``."""
    if not delta_gain > 0:
        raise ValueError(f"delta_gain must be > 0, got {delta_gain!r}")
    if params.I_ver == 0:
        raise ValueError("target unreachable: I_ver = 0")
    if params.p <= 0:
        raise ValueError("required_budget needs p > 0")
    a = LN2 / 2.0 * params.J * K
    d = 4.0 * params.p * delta_gain / params.I_ver
    # (sqrt(a + d) - sqrt(a))^2 written without cancellation.
    root_gap = d / (math.sqrt(a + d) + math.sqrt(a))
    return root_gap**2 / (4.0 * params.p**2)


def achievability_constant(p: float, alpha: float, m_g_alpha: float) -> float:
    """``c_G(p, alpha) = sqrt(2 ln2 p (1-p) alpha) * m_G(alpha)``."""
    return math.sqrt(2.0 * LN2 * p * (1.0 - p) * alpha) * m_g_alpha


def achievable_gain_weak(
    params: InfoParams,
    budgets: Budgets,
    m_g_alpha: float,
    h_theta_total: Optional[float] = None,
) -> float:
    """Weak-screening prediction ``I_ver (B p + c_G sqrt(J K B))`` for top-B.

    ``h_theta_total`` caps the gain at the entropy of the whole latent state
    (global-claim reporting); leave it ``None`` for decoupled claims.
    """
    K, B = budgets.K, budgets.B
    c = achievability_constant(params.p, budgets.alpha(), m_g_alpha)
    gain = params.I_ver * (B * params.p + c * math.sqrt(params.J * K * B))
    if h_theta_total is not None:
        gain = min(h_theta_total, gain)
    return gain


def expected_min_binomial(K: int, p: float, B: int) -> float:
    """``E[min(B, Binomial(K, p))] = sum_{k<B} P(X > k)``."""
    if B >= K:
        return K * p
    if B <= 0:
        return 0.0
    return float(stats.binom.sf(np.arange(B), K, p).sum())


def oracle_ceiling(params: InfoParams, budgets: Budgets, expected_informative: float) -> float:
    """Gain of a policy that verifies informative records first."""
    return params.I_ver * expected_informative


def random_gain(params: InfoParams, budgets: Budgets) -> float:
    return params.I_ver * budgets.B * params.p


def jakob_curve(params: InfoParams, K: int, B_grid: Sequence[int], c: float) -> np.ndarray:
    """``min(I_ver B, I_ver B (p + c sqrt(J K / B)))`` on ``B_grid``."""
    if not (0.0 < c <= C_MAX * (1 + 1e-12)):
        raise ValueError(f"c must lie in (0, sqrt(ln2/2)], got {c!r}")
    B = np.asarray(B_grid, dtype=float)
    if np.any(B < 0):
        raise ValueError("budgets must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = params.p + c * np.sqrt(params.J * K / B)
    rate = np.where(B > 0, np.minimum(rate, 1.0), 0.0)
    return params.I_ver * B * rate


def jakob_breakpoint(params: InfoParams, K: int, c: float) -> float:
    """Budget ``B*`` where ``p + c sqrt(J K / B)`` reaches 1."""
    if params.p >= 1.0:
        return math.inf
    return (c * math.sqrt(params.J * K) / (1.0 - params.p)) ** 2


def bound_report(
    params: InfoParams,
    budgets: Budgets,
    m_g_alpha: float,
    target_gain: Optional[float] = None,
) -> BoundReport:
    required = None
    if target_gain is not None:
        required = required_budget(params, budgets.K, target_gain)
    return BoundReport(
        gain_converse=converse_gain(params, budgets),
        gain_achievable=achievable_gain_weak(params, budgets, m_g_alpha),
        gain_random=random_gain(params, budgets),
        gain_oracle_ceiling=oracle_ceiling(
            params, budgets, expected_min_binomial(budgets.K, params.p, budgets.B)
        ),
        required_B=required,
    )
