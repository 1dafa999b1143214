"""Upper-tail means ``m_G(alpha) = E[G 1{G >= q_alpha}] / alpha``.

Empirical (mean of the top B samples), exact closed forms and leading-order
asymptotics for Gaussian and standardized-Pareto scores.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .models import GDistribution, StandardizedPareto, StandardNormal


@dataclass(frozen=True)
class TailQuery:
    alpha: float
    dist: GDistribution

    def __post_init__(self):
        _check_alpha(self.alpha)

    def exact(self) -> float:
        if isinstance(self.dist, StandardNormal):
            return tail_mean_gaussian_exact(self.alpha)
        if isinstance(self.dist, StandardizedPareto):
            return tail_mean_pareto_exact(self.dist.nu, self.alpha)
        raise TypeError(f"no closed form for {self.dist!r}")


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")


def _top_b(samples, B: int) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("samples must be non-empty")
    if int(B) != B or not (1 <= B <= x.size):
        raise ValueError(f"B must be an integer in [1, {x.size}], got {B!r}")
    B = int(B)
    return np.partition(x, x.size - B)[x.size - B :]


def tail_mean_empirical(samples, B: int) -> float:
    """Mean of the B largest values (duplicates kept as a multiset)."""
    return float(_top_b(samples, B).mean())


def tail_mean_empirical_se(samples, B: int) -> float:
    """Standard error from the spread of the selected top set."""
    top = _top_b(samples, B)
    if top.size < 2:
        return float("inf")
    return float(top.std(ddof=1) / math.sqrt(top.size))


def quantile(dist: GDistribution, u: float) -> float:
    """``inf{q : P(G <= q) >= u}``."""
    if not (0.0 < u < 1.0):
        raise ValueError(f"u must lie in (0, 1), got {u!r}")
    # The upper branch keeps precision for u close to 1.
    return float(dist.quantile(u) if u <= 0.5 else dist.isf(1.0 - u))


def gaussian_threshold(alpha: float) -> float:
    """``q_alpha = Phi^{-1}(1 - alpha)``."""
    _check_alpha(alpha)
    return float(-special.ndtri(alpha))


def tail_mean_gaussian_exact(alpha: float) -> float:
    """Truncated-normal mean ``phi(q_alpha) / alpha``."""
    q = gaussian_threshold(alpha)
    return math.exp(-0.5 * q * q) / math.sqrt(2.0 * math.pi) / alpha


def tail_mean_gaussian_asymptotic(alpha: float) -> float:
    """``sqrt(2 ln(1/alpha))``; natural log, as the Gaussian tail forces."""
    _check_alpha(alpha)
    return math.sqrt(2.0 * math.log(1.0 / alpha))


def tail_mean_pareto_exact(nu: float, alpha: float) -> float:
    """``(nu/(nu-1) * alpha**(-1/nu) - mu) / sigma`` for the standardized Pareto."""
    dist = StandardizedPareto(nu)
    _check_alpha(alpha)
    return (dist.mu * alpha ** (-1.0 / nu) - dist.mu) / dist.sigma


def tail_mean_pareto_asymptotic(nu: float, alpha: float) -> float:
    """Leading term ``nu/(nu-1) / sigma * alpha**(-1/nu)``."""
    dist = StandardizedPareto(nu)
    _check_alpha(alpha)
    return dist.mu / dist.sigma * alpha ** (-1.0 / nu)


def tail_mean_exact(dist: GDistribution, alpha: float) -> float:
    return TailQuery(alpha, dist).exact()
