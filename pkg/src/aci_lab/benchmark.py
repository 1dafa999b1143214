"""The decoupled-claims benchmark: exact finite-(K, B) boundary and its
single-letter limit.

The best achievable expected number of informative verifications is
``E[sum of the B largest eta]``, attained by top-B selection.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy import integrate

from .models import DEFAULT_QUAD, QuadConfig, QuadratureError, ScreeningModel, eta_from_g, sample_g
from .seeding import SeedLike, derive_seed
from .simulator import VerificationChannel


@dataclass(frozen=True)
class BenchmarkBoundary:
    K: int
    B: int
    expected_top_sum: float
    expected_top_sum_se: float
    risk_bits: float
    gain_bits: float

    @property
    def risk_se(self) -> float:
        return 0.0 if self.B == 0 else self.gain_se / self.B

    @property
    def gain_se(self) -> float:
        # gain = I_ver * top_sum, so the ratio recovers I_ver.
        if self.expected_top_sum == 0:
            return 0.0
        return self.expected_top_sum_se * self.gain_bits / self.expected_top_sum


def expected_top_b_sums(
    model: ScreeningModel,
    K: int,
    B_grid: Sequence[int],
    replications: int,
    seed: SeedLike,
    threads: int = 1,
) -> List[Tuple[float, float]]:
    """Monte Carlo ``(mean, se)`` of the top-B eta sum for every B in ``B_grid``.

    Windows are shared across the grid; replication ``r`` uses the same
    score stream as the simulator's replication ``r`` under the same seed.
    """
    if replications < 2:
        raise ValueError("replications must be at least 2")
    B_grid = [int(B) for B in B_grid]
    if any(not (0 <= B <= K) for B in B_grid):
        raise ValueError(f"budgets must lie in [0, K={K}]")
    if model.epsilon == 0.0:
        return [(B * model.p, 0.0) for B in B_grid]

    def work(r):
        eta = eta_from_g(model, sample_g(model, K, derive_seed(seed, r)))
        eta = np.sort(eta)[::-1] if len(B_grid) > 1 else eta
        out = np.empty(len(B_grid))
        for j, B in enumerate(B_grid):
            if len(B_grid) > 1:
                out[j] = eta[:B].sum()
            else:
                out[j] = np.partition(eta, K - B)[K - B :].sum() if B else 0.0
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, range(replications)))
    else:
        rows = [work(r) for r in range(replications)]
    S = np.stack(rows)
    mean = S.mean(axis=0)
    se = S.std(axis=0, ddof=1) / math.sqrt(replications)
    return [(float(m), float(s)) for m, s in zip(mean, se)]


def expected_top_b_sum(
    model: ScreeningModel, K: int, B: int, replications: int, seed: SeedLike, threads: int = 1
) -> Tuple[float, float]:
    return expected_top_b_sums(model, K, [B], replications, seed, threads)[0]


def boundary_from_top_sum(
    K: int, B: int, top_sum: float, top_sum_se: float, channel: VerificationChannel
) -> BenchmarkBoundary:
    risk = channel.H_theta - (channel.I_ver / B) * top_sum if B else channel.H_theta
    return BenchmarkBoundary(
        K=K,
        B=B,
        expected_top_sum=top_sum,
        expected_top_sum_se=top_sum_se,
        risk_bits=risk,
        gain_bits=channel.I_ver * top_sum,
    )


def benchmark_risk(
    model: ScreeningModel,
    K: int,
    B: int,
    channel: VerificationChannel,
    replications: int,
    seed: SeedLike,
    threads: int = 1,
) -> BenchmarkBoundary:
    """Minimum average log-loss over the B verified records, and the total gain."""
    mean, se = expected_top_b_sum(model, K, B, replications, seed, threads)
    return boundary_from_top_sum(K, B, mean, se, channel)


def single_letter_top_fraction(
    model: ScreeningModel, alpha: float, quad: QuadConfig = DEFAULT_QUAD
) -> float:
    """``int_{1-alpha}^{1} Q_eta(u) du`` with ``Q_eta = eta o Q_G``.

    Integrated in ``v`` with ``u = 1 - alpha v`` so the right-endpoint tail is
    resolved.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    if model.epsilon == 0.0:
        return alpha * model.p
    dist = model.g_dist

    def integrand(v):
        s = alpha * v
        g = dist.isf(s) if s <= 0.5 else dist.quantile(1.0 - s)
        return float(eta_from_g(model, g))

    points = [0.5 / alpha] if alpha > 0.5 else None
    value, err = integrate.quad(
        integrand, 0.0, 1.0, epsabs=quad.abs_tol, epsrel=1e-12,
        limit=quad.quad_limit, points=points,
    )
    if not err <= max(quad.abs_tol, 1e-12 * abs(value)):
        raise QuadratureError("single-letter tail integral", err, quad.abs_tol)
    return alpha * value


def brute_force_selection_check(etas: Sequence[float], B: int) -> bool:
    """Exhaustively confirm that no size-B subset beats the top-B sum."""
    etas = [float(e) for e in etas]
    K = len(etas)
    if K > 12:
        raise ValueError("brute force is limited to K <= 12")
    if not (0 <= B <= K):
        raise ValueError(f"B must lie in [0, {K}]")
    top = math.fsum(sorted(etas, reverse=True)[:B])
    best = max(math.fsum(etas[i] for i in c) for c in itertools.combinations(range(K), B))
    return best <= top
