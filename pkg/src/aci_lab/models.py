"""Screening models: the law of the standardized score G, the logit-local
posterior score eta, window sampling, and the model's information quantities.

A record's screening statistic is identified with its standardized score G;
the Bayes score is ``eta(g) = logistic(logit(p) + epsilon * g)``.  Entropies
and mutual informations are in bits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Union

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import integrate, optimize, special

from .seeding import STREAM_G, STREAM_T, SeedLike, derive_seed

LN2 = math.log(2.0)


class QuadratureError(RuntimeError):
    """Raised when a quadrature cannot reach the requested tolerance."""

    def __init__(self, message: str, achieved_tol: float, requested_tol: float):
        super().__init__(
            f"{message}: achieved error estimate {achieved_tol:.3g} "
            f"exceeds requested tolerance {requested_tol:.3g}"
        )
        self.achieved_tol = achieved_tol
        self.requested_tol = requested_tol


@dataclass(frozen=True)
class QuadConfig:
    """Quadrature settings shared by every integral over the law of G.

    ``hermite_nodes`` is used for the standard normal; the Pareto family is
    integrated adaptively in the uniform variable ``u = F_G(g)``.  The AUC
    uses a midpoint grid of ``auc_grid`` cells on ``u``.
    """

    hermite_nodes: int = 128
    abs_tol: float = 1e-10
    quad_limit: int = 400
    auc_grid: int = 2**20
    auc_tol: float = 1e-6

    def __post_init__(self):
        if self.hermite_nodes < 2:
            raise ValueError("hermite_nodes must be at least 2")
        if not (self.abs_tol > 0 and self.auc_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.auc_grid < 16:
            raise ValueError("auc_grid must be at least 16")


DEFAULT_QUAD = QuadConfig()


# --------------------------------------------------------------------------
# Score distributions
# --------------------------------------------------------------------------


class GDistribution:
    """A continuous law for G with mean 0 and variance 1."""

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def quantile(self, u):
        """Inverse CDF ``F^{-1}(u)``."""
        raise NotImplementedError

    def isf(self, s):
        """Upper quantile ``F^{-1}(1 - s)``, accurate for small ``s``."""
        raise NotImplementedError

    def to_config(self) -> Union[str, dict]:
        raise NotImplementedError


@dataclass(frozen=True)
class StandardNormal(GDistribution):
    def sample(self, rng, size):
        return rng.standard_normal(size)

    def quantile(self, u):
        return special.ndtri(u)

    def isf(self, s):
        return -special.ndtri(s)

    def to_config(self):
        return "normal"


@dataclass(frozen=True)
class StandardizedPareto(GDistribution):
    """``G = (X - mu) / sigma`` for ``P(X >= x) = x**-nu`` on ``x >= 1``.

    ``nu > 3`` is required so that ``E|G|^3`` is finite.
    """

    nu: float

    def __post_init__(self):
        if not (np.isfinite(self.nu) and self.nu > 3):
            raise ValueError(f"Pareto exponent must satisfy nu > 3, got {self.nu!r}")

    @property
    def mu(self) -> float:
        return self.nu / (self.nu - 1.0)

    @property
    def sigma(self) -> float:
        nu = self.nu
        return math.sqrt(nu / ((nu - 1.0) ** 2 * (nu - 2.0)))

    def standardize(self, x):
        return (x - self.mu) / self.sigma

    def sample(self, rng, size):
        # 1 - U lies in (0, 1], so X is finite.
        x = (1.0 - rng.random(size)) ** (-1.0 / self.nu)
        return self.standardize(x)

    def quantile(self, u):
        return self.isf(1.0 - np.asarray(u, dtype=float))

    def isf(self, s):
        s = np.asarray(s, dtype=float)
        return self.standardize(s ** (-1.0 / self.nu))

    def to_config(self):
        return {"pareto": float(self.nu)}


def g_dist_from_config(spec: Union[str, Mapping[str, Any], GDistribution]) -> GDistribution:
    """Parse ``"normal"`` or ``{"pareto": nu}``."""
    if isinstance(spec, GDistribution):
        return spec
    if isinstance(spec, str):
        if spec.lower() in ("normal", "gaussian", "standard_normal"):
            return StandardNormal()
        raise ValueError(f"unknown g_dist {spec!r}")
    if isinstance(spec, Mapping) and set(spec) == {"pareto"}:
        return StandardizedPareto(float(spec["pareto"]))
    raise ValueError(f"g_dist must be 'normal' or {{'pareto': nu}}, got {spec!r}")


# --------------------------------------------------------------------------
# Screening model and windows
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ScreeningModel:
    """Logit-local screening: ``logit(eta) = logit(p) + epsilon * G``."""

    p: float
    epsilon: float
    g_dist: GDistribution = field(default_factory=StandardNormal)

    def __post_init__(self):
        if not (0.0 < self.p < 1.0):
            raise ValueError(f"base rate p must lie in (0, 1), got {self.p!r}")
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0.0):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon!r}")
        if not isinstance(self.g_dist, GDistribution):
            object.__setattr__(self, "g_dist", g_dist_from_config(self.g_dist))

    @property
    def log_odds(self) -> float:
        return math.log(self.p) - math.log1p(-self.p)

    def to_config(self) -> dict:
        return {"p": self.p, "epsilon": self.epsilon, "g_dist": self.g_dist.to_config()}

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any]) -> "ScreeningModel":
        return cls(
            p=float(cfg["p"]),
            epsilon=float(cfg["epsilon"]),
            g_dist=g_dist_from_config(cfg.get("g_dist", "normal")),
        )


def eta_from_g(model: ScreeningModel, g):
    """Posterior probability that a record with score ``g`` is informative."""
    out = special.expit(model.log_odds + model.epsilon * np.asarray(g, dtype=float))
    return out if np.ndim(out) else float(out)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WindowSample:
    """One screened window: scores ``g``, posteriors ``eta`` and latent types ``t``."""

    g: np.ndarray
    eta: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        if not (self.g.ndim == self.eta.ndim == self.t.ndim == 1):
            raise ValueError("window vectors must be one-dimensional")
        if not (len(self.g) == len(self.eta) == len(self.t) >= 1):
            raise ValueError("window vectors must share a length K >= 1")

    @property
    def K(self) -> int:
        return len(self.g)


def sample_g(model: ScreeningModel, K: int, seed: SeedLike) -> np.ndarray:
    """Scores of one window; the stream is shared with :func:`sample_window`."""
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, STREAM_G)))
    return model.g_dist.sample(rng, K)


def sample_window(model: ScreeningModel, K: int, seed: SeedLike) -> WindowSample:
    """Draw K i.i.d. records.

    Scores and types come from two separate streams under ``seed``; the
    Bernoulli stream is consumed in index order.
    """
    if int(K) != K or K < 1:
        raise ValueError(f"K must be a positive integer, got {K!r}")
    K = int(K)
    g = sample_g(model, K, seed)
    eta = eta_from_g(model, g)
    rng_t = np.random.Generator(np.random.PCG64(derive_seed(seed, STREAM_T)))
    t = rng_t.random(K) < eta
    return WindowSample(g=_frozen(g), eta=_frozen(np.asarray(eta)), t=_frozen(t))


# --------------------------------------------------------------------------
# Expectations over the law of G
# --------------------------------------------------------------------------


def _hermite_rule(n: int):
    x, w = hermegauss(n)
    return x, w / w.sum()


def expectation(
    dist: GDistribution,
    fn: Callable[[np.ndarray], np.ndarray],
    quad: QuadConfig = DEFAULT_QUAD,
) -> float:
    """``E[fn(G)]`` for a bounded, vectorized ``fn``.

    Raises :class:`QuadratureError` if the error estimate exceeds
    ``quad.abs_tol``.
    """
    if isinstance(dist, StandardNormal):
        x, w = _hermite_rule(quad.hermite_nodes)
        value = float(np.dot(w, fn(x)))
        xh, wh = _hermite_rule(max(2, quad.hermite_nodes // 2))
        if abs(value - float(np.dot(wh, fn(xh)))) <= quad.abs_tol:
            return value
        # Sharp integrands (large epsilon) fall through to the adaptive rule.

    # Adaptive quadrature in u on (0, 1/2] and in s = 1 - u on (0, 1/2].
    def lower(u):
        return float(fn(np.atleast_1d(dist.quantile(u)))[0])

    def upper(s):
        return float(fn(np.atleast_1d(dist.isf(s)))[0])

    total, err = 0.0, 0.0
    for f in (lower, upper):
        v, e = integrate.quad(
            f, 0.0, 0.5, epsabs=quad.abs_tol / 4, epsrel=0.0, limit=quad.quad_limit
        )
        total += v
        err += e
    if not err <= quad.abs_tol:
        raise QuadratureError("adaptive expectation", err, quad.abs_tol)
    return total


def prevalence(model: ScreeningModel, quad: QuadConfig = DEFAULT_QUAD) -> float:
    """Marginal ``P(T = 1) = E[eta(G)]``.

    Equals ``p`` only when ``epsilon == 0``; the logistic link makes it
    slightly larger than ``p`` for small base rates.
    """
    if model.epsilon == 0.0:
        return model.p
    return expectation(model.g_dist, lambda g: eta_from_g(model, g), quad)


def binary_entropy(q):
    """``h2(q)`` in bits, vectorized, with ``h2(0) = h2(1) = 0``."""
    q = np.asarray(q, dtype=float)
    out = -(special.xlogy(q, q) + special.xlogy(1.0 - q, 1.0 - q)) / LN2
    return out if out.ndim else float(out)


def binary_kl(a, b):
    """``KL(Bern(a) || Bern(b))`` in bits."""
    a = np.asarray(a, dtype=float)
    out = (special.xlogy(a, a / b) + special.xlogy(1.0 - a, (1.0 - a) / (1.0 - b))) / LN2
    return out if out.ndim else float(out)


def screening_information(model: ScreeningModel, quad: QuadConfig = DEFAULT_QUAD) -> float:
    """``J = I(T; G)`` in bits.

    Computed as ``E[KL(Bern(eta) || Bern(pbar))]`` with ``pbar = E[eta]``,
    which equals ``h2(pbar) - E[h2(eta)]`` without the cancellation.
    """
    if model.epsilon == 0.0:
        return 0.0
    pbar = prevalence(model, quad)
    value = expectation(model.g_dist, lambda g: binary_kl(eta_from_g(model, g), pbar), quad)
    return max(value, 0.0)


def screening_information_weak(model: ScreeningModel) -> float:
    """Small-epsilon approximation ``p (1 - p) epsilon^2 / (2 ln 2)``."""
    return model.p * (1.0 - model.p) * model.epsilon**2 / (2.0 * LN2)


def _auc_on_grid(model: ScreeningModel, n: int) -> float:
    u = (np.arange(n) + 0.5) / n
    g = np.where(u < 0.5, model.g_dist.quantile(u), model.g_dist.isf(1.0 - u))
    eta = eta_from_g(model, g)
    # Discretized conditional laws of the cell index given T=1 and T=0.
    pos = eta / eta.sum()
    neg = (1.0 - eta) / (1.0 - eta).sum()
    below = np.cumsum(neg) - neg
    return float(np.dot(pos, below + 0.5 * neg))


def auc(model: ScreeningModel, quad: QuadConfig = DEFAULT_QUAD) -> float:
    """``P(eta(G+) > eta(G-)) + P(tie) / 2`` with ``G+ ~ G | T=1``, ``G- ~ G | T=0``."""
    if model.epsilon == 0.0:
        return 0.5
    n = quad.auc_grid
    fine = _auc_on_grid(model, n)
    err = abs(fine - _auc_on_grid(model, n // 2))
    if err > quad.auc_tol:
        raise QuadratureError("AUC grid", err, quad.auc_tol)
    return fine


def epsilon_for_auc(
    p: float,
    target_auc: float,
    g_dist: GDistribution = StandardNormal(),
    quad: QuadConfig = DEFAULT_QUAD,
    eps_max: float = 50.0,
) -> float:
    """Smallest screening strength whose AUC equals ``target_auc``."""
    if not (0.5 <= target_auc < 1.0):
        raise ValueError(f"target AUC must lie in [0.5, 1), got {target_auc!r}")
    if target_auc == 0.5:
        return 0.0

    def gap(eps):
        return auc(ScreeningModel(p, eps, g_dist), quad) - target_auc

    if gap(eps_max) < 0:
        raise ValueError(f"AUC {target_auc} not reachable with epsilon <= {eps_max}")
    return float(optimize.brentq(gap, 0.0, eps_max, xtol=1e-12, rtol=1e-12))
