"""Monte Carlo engine for verification policies under decoupled claims.

Each replication is one window: K records are screened, a policy picks B of
them, and every verified informative record yields ``I_ver`` bits in
expectation.  Replication ``r`` draws all of its randomness from streams
addressed by ``(master_seed, r, ...)``, so results are independent of the
worker count.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from .bounds import Budgets
from .models import ScreeningModel, WindowSample, binary_entropy, sample_window
from .seeding import STREAM_CHANNEL, STREAM_SELECT, STREAM_THETA, SeedLike, derive_seed, generator


class Policy(enum.Enum):
    TOP_B = "top"
    RANDOM_B = "random"
    ORACLE_B = "oracle"

    @classmethod
    def parse(cls, value: Union[str, "Policy"]) -> "Policy":
        if isinstance(value, Policy):
            return value
        key = str(value).lower().replace("-", "_")
        for member in cls:
            if key in (member.value, member.name.lower(), member.value + "b", member.value + "_b"):
                return member
        raise ValueError(f"unknown policy {value!r}")


@dataclass(frozen=True)
class VerificationChannel:
    """Binary symmetric verification of a uniform binary claim."""

    rho: float = 0.1

    def __post_init__(self):
        if not (0.0 <= self.rho < 0.5):
            raise ValueError(f"crossover rho must lie in [0, 0.5), got {self.rho!r}")

    @property
    def I_ver(self) -> float:
        return 1.0 - binary_entropy(self.rho)

    @property
    def H_theta(self) -> float:
        return 1.0

    def record_gains(self, t: np.ndarray, rng_theta, rng_flip) -> np.ndarray:
        """Realized log-loss reduction ``H(Theta) + log2 q(Theta)`` per record.

        Uninformative records keep the prior (loss 1 bit, gain 0).
        """
        K = len(t)
        theta = rng_theta.integers(0, 2, size=K)
        flip = rng_flip.random(K) < self.rho
        v = theta ^ flip
        match = v == theta
        if self.rho == 0.0:
            loss = np.zeros(K)
        else:
            loss = np.where(match, -math.log2(1.0 - self.rho), -math.log2(self.rho))
        return np.where(t, self.H_theta - loss, 0.0)


@dataclass(frozen=True, eq=False)
class SimResult:
    policy: Policy
    K: int
    B: int
    replications: int
    mean_hits: float
    se_hits: float
    mean_gain_bits: float
    se_gain_bits: float
    mean_selected_hit_rate: float
    hits: np.ndarray
    gains: np.ndarray

    @property
    def se_selected_hit_rate(self) -> float:
        return self.se_hits / self.B if self.B else 0.0


def _top_indices(eta: np.ndarray, B: int) -> np.ndarray:
    K = len(eta)
    if B == 0:
        return np.empty(0, dtype=np.intp)
    if B == K:
        return np.arange(K)
    kth = np.partition(eta, K - B)[K - B]
    above = np.flatnonzero(eta > kth)
    tied = np.flatnonzero(eta == kth)[: B - len(above)]
    return np.sort(np.concatenate([above, tied]))


def select(policy: Union[Policy, str], sample: WindowSample, B: int, seed: SeedLike = 0) -> np.ndarray:
    """Indices of the verified records, in increasing order.

    Top-B breaks ties by lowest index; Oracle-B takes informative records in
    index order and pads with uninformative ones when there are fewer than B.
    """
    policy = Policy.parse(policy)
    K = sample.K
    if int(B) != B or not (0 <= B <= K):
        raise ValueError(f"B must be an integer in [0, {K}], got {B!r}")
    B = int(B)
    if policy is Policy.TOP_B:
        return _top_indices(sample.eta, B)
    if policy is Policy.RANDOM_B:
        rng = generator(seed, STREAM_SELECT, B)
        return np.sort(rng.choice(K, size=B, replace=False))
    informative = np.flatnonzero(sample.t)
    if len(informative) >= B:
        return informative[:B]
    pad = np.flatnonzero(~sample.t)[: B - len(informative)]
    return np.sort(np.concatenate([informative, pad]))


def _replicate(model, policy, K, B_grid, channel, master_seed, r, logloss):
    seed = derive_seed(master_seed, r)
    sample = sample_window(model, K, seed)
    if logloss:
        per_record = channel.record_gains(
            sample.t, generator(seed, STREAM_THETA), generator(seed, STREAM_CHANNEL)
        )
    hits = np.empty(len(B_grid))
    gains = np.empty(len(B_grid))
    for j, B in enumerate(B_grid):
        idx = select(policy, sample, B, seed)
        hits[j] = np.count_nonzero(sample.t[idx])
        gains[j] = per_record[idx].sum() if logloss else channel.I_ver * hits[j]
    return hits, gains


def _mean_se(x: np.ndarray) -> Tuple[float, float]:
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(len(x)))


def run_sweep(
    model: ScreeningModel,
    policy: Union[Policy, str],
    K: int,
    B_grid: Sequence[int],
    channel: VerificationChannel,
    replications: int,
    master_seed: SeedLike,
    threads: int = 1,
    logloss: bool = False,
) -> List[SimResult]:
    """Run one set of windows and evaluate every budget in ``B_grid`` on it."""
    policy = Policy.parse(policy)
    if replications < 2:
        raise ValueError("replications must be at least 2")
    B_grid = [Budgets(K, B).B for B in B_grid]

    def work(r):
        return _replicate(model, policy, K, B_grid, channel, master_seed, r, logloss)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(work, range(replications)))
    else:
        outs = [work(r) for r in range(replications)]
    H = np.stack([o[0] for o in outs])
    G = np.stack([o[1] for o in outs])

    results = []
    for j, B in enumerate(B_grid):
        hits = H[:, j].copy()
        gains = G[:, j].copy()
        hits.setflags(write=False)
        gains.setflags(write=False)
        mh, sh = _mean_se(hits)
        mg, sg = _mean_se(gains)
        results.append(
            SimResult(
                policy=policy,
                K=K,
                B=B,
                replications=replications,
                mean_hits=mh,
                se_hits=sh,
                mean_gain_bits=mg,
                se_gain_bits=sg,
                mean_selected_hit_rate=mh / B if B else 0.0,
                hits=hits,
                gains=gains,
            )
        )
    return results


def run_experiment(
    model: ScreeningModel,
    policy: Union[Policy, str],
    budgets: Budgets,
    channel: VerificationChannel,
    replications: int,
    master_seed: SeedLike,
    threads: int = 1,
) -> SimResult:
    """Mean hits and gain via the identity ``gain = I_ver * hits``."""
    return run_sweep(
        model, policy, budgets.K, [budgets.B], channel, replications, master_seed, threads
    )[0]


def empirical_logloss_gain(
    model: ScreeningModel,
    policy: Union[Policy, str],
    budgets: Budgets,
    channel: VerificationChannel,
    replications: int,
    master_seed: SeedLike,
    threads: int = 1,
) -> SimResult:
    """Gain measured from Bayes posterior log-loss on simulated claims.

    Uses the same windows as :func:`run_experiment` for equal seeds.
    """
    return run_sweep(
        model, policy, budgets.K, [budgets.B], channel, replications, master_seed,
        threads, logloss=True,
    )[0]


def selected_hit_rate(result: Union[SimResult, Tuple[Iterable[float], int]]) -> float:
    """Total hits over total selections across replications."""
    if isinstance(result, SimResult):
        hits, B = result.hits, result.B
    else:
        hits, B = result
    hits = np.asarray(list(hits) if not isinstance(hits, np.ndarray) else hits, dtype=float)
    if hits.size == 0:
        raise ValueError("need at least one replication")
    return float(hits.sum() / (hits.size * B))
