import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aci_lab.models import StandardizedPareto, StandardNormal
from aci_lab.tails import (
    TailQuery,
    quantile,
    tail_mean_empirical,
    tail_mean_empirical_se,
    tail_mean_gaussian_asymptotic,
    tail_mean_gaussian_exact,
    tail_mean_pareto_asymptotic,
    tail_mean_pareto_exact,
)

import oracle_values as ov


def test_empirical_small_cases():
    assert tail_mean_empirical([3, 1, 2], 3) == 2
    assert tail_mean_empirical([3, 1, 2], 1) == 3
    assert tail_mean_empirical([5, 5, 1, 5], 2) == 5


@pytest.mark.parametrize("B", [0, 4, 1.5])
def test_empirical_bad_budget(B):
    with pytest.raises(ValueError):
        tail_mean_empirical([3, 1, 2], B)


def test_empirical_empty():
    with pytest.raises(ValueError):
        tail_mean_empirical([], 1)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60), st.data())
def test_empirical_matches_full_sort(xs, data):
    B = data.draw(st.integers(1, len(xs)))
    expected = np.mean(sorted(xs, reverse=True)[:B])
    assert tail_mean_empirical(xs, B) == pytest.approx(expected, rel=1e-12, abs=1e-6)


def test_empirical_normal_against_exact():
    rng = np.random.default_rng(12)
    x = rng.standard_normal(1_000_000)
    emp, se = tail_mean_empirical(x, 100_000), tail_mean_empirical_se(x, 100_000)
    assert abs(emp - tail_mean_gaussian_exact(0.1)) <= 4 * se


def test_empirical_convergence():
    rng = np.random.default_rng(13)
    exact = tail_mean_gaussian_exact(0.1)
    gaps, ses = [], []
    for K in (10**3, 10**4, 10**5, 10**6):
        # average over replications to expose the trend
        reps = [tail_mean_empirical(rng.standard_normal(K), K // 10) for _ in range(max(4, 10**7 // K // 10))]
        gaps.append(abs(np.mean(reps) - exact))
        ses.append(np.std(reps, ddof=1) / math.sqrt(len(reps)))
    assert gaps[-1] <= 4 * ses[-1]
    assert gaps[-1] < gaps[0]


class TestQuantile:
    def test_normal(self):
        assert quantile(StandardNormal(), 0.5) == 0.0
        assert quantile(StandardNormal(), 0.9) == pytest.approx(ov.PHI_INV_09, rel=1e-14)
        u = 1 - 1e-12
        mp.mp.dps = 40
        ref = float(mp.sqrt(2) * mp.erfinv(2 * mp.mpf(u) - 1))
        assert quantile(StandardNormal(), u) == pytest.approx(ref, rel=1e-9)

    def test_pareto(self):
        assert quantile(StandardizedPareto(4.0), 0.99) == pytest.approx(ov.PARETO4_Q099, rel=1e-13)
        d = StandardizedPareto(4.0)
        assert d.mu == pytest.approx(4 / 3) and d.sigma == pytest.approx(math.sqrt(2) / 3)

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.2, 1.1])
    def test_out_of_range(self, u):
        with pytest.raises(ValueError):
            quantile(StandardNormal(), u)


class TestGaussian:
    def test_whole_population(self):
        assert tail_mean_gaussian_exact(0.999999) == pytest.approx(0.0, abs=1e-4)

    def test_half(self):
        assert tail_mean_gaussian_exact(0.5) == pytest.approx(2 / math.sqrt(2 * math.pi), rel=1e-14)

    def test_tenth(self):
        assert tail_mean_gaussian_exact(0.1) == pytest.approx(ov.GAUSS_TAIL_MEAN_01, rel=1e-12)

    def test_asymptotic(self):
        assert tail_mean_gaussian_asymptotic(math.exp(-2)) == pytest.approx(2.0, rel=1e-15)
        assert tail_mean_gaussian_asymptotic(1e-3) == pytest.approx(math.sqrt(2 * math.log(1000)))
        ratio = tail_mean_gaussian_exact(1e-6) / tail_mean_gaussian_asymptotic(1e-6)
        assert 0.9 <= ratio <= 1.1

    @pytest.mark.parametrize("alpha", [0.0, 1.0, 2.0])
    def test_bad_alpha(self, alpha):
        with pytest.raises(ValueError):
            tail_mean_gaussian_exact(alpha)


class TestPareto:
    def test_whole_population(self):
        assert tail_mean_pareto_exact(4.0, 1 - 1e-12) == pytest.approx(0.0, abs=1e-9)

    def test_closed_form(self):
        expected = (4 / 3 * 0.01 ** -0.25 - 4 / 3) / (math.sqrt(2) / 3)
        assert tail_mean_pareto_exact(4.0, 0.01) == pytest.approx(expected, rel=1e-14)
        assert tail_mean_pareto_exact(4.0, 0.01) == pytest.approx(ov.PARETO4_TAIL_MEAN_001, rel=1e-12)

    def test_gap_to_asymptotic_is_constant(self):
        d = StandardizedPareto(4.0)
        for a in (0.3, 0.01, 1e-5):
            gap = tail_mean_pareto_asymptotic(4.0, a) - tail_mean_pareto_exact(4.0, a)
            assert gap == pytest.approx(d.mu / d.sigma, rel=1e-10)
        rel = 1 - tail_mean_pareto_exact(4.0, 1e-8) / tail_mean_pareto_asymptotic(4.0, 1e-8)
        # relative gap is exactly alpha**(1/nu)
        assert rel == pytest.approx(1e-8 ** 0.25, rel=1e-9)

    def test_asymptotic_monotone(self):
        vals = [tail_mean_pareto_asymptotic(3.5, a) for a in (1e-2, 1e-4, 1e-6)]
        assert all(v > 0 for v in vals) and vals == sorted(vals)

    def test_rejects_light_exponent(self):
        with pytest.raises(ValueError):
            tail_mean_pareto_exact(3.0, 0.1)
        with pytest.raises(ValueError):
            tail_mean_pareto_asymptotic(2.0, 0.1)

    @pytest.mark.slow
    def test_empirical_heavy_tail(self):
        rng = np.random.default_rng(14)
        x = StandardizedPareto(5.0).sample(rng, 10_000_000)
        emp, se = tail_mean_empirical(x, 1000), tail_mean_empirical_se(x, 1000)
        assert abs(emp - tail_mean_pareto_exact(5.0, 1e-4)) <= 4 * se


ALPHAS = np.logspace(-6, -0.01, 40)


@pytest.mark.parametrize("dist", [StandardNormal(), StandardizedPareto(3.5), StandardizedPareto(6.0)])
def test_nonincreasing_in_alpha(dist):
    vals = [TailQuery(a, dist).exact() for a in ALPHAS]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("dist", [StandardNormal(), StandardizedPareto(4.0)])
def test_tail_mass_below_absolute_mean(dist):
    # For mean-zero G: 0 <= E[G 1{G >= q}] <= E|G| / 2.
    abs_mean = math.sqrt(2 / math.pi) if isinstance(dist, StandardNormal) else None
    if abs_mean is None:
        rng = np.random.default_rng(1)
        abs_mean = np.abs(dist.sample(rng, 2_000_000)).mean()
    for a in ALPHAS:
        mass = a * TailQuery(a, dist).exact()
        assert 0 <= mass <= abs_mean / 2 * (1 + 1e-3)


def test_pareto_over_gaussian_ratio_increasing():
    ratios = [tail_mean_pareto_exact(4.0, 1 / r) / tail_mean_gaussian_exact(1 / r) for r in np.logspace(1, 5, 30)]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
