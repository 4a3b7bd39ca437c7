import doctest

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.signal import lfilter

from msmbayes import GompertzIMParams, MarkovParams, WeibullSMParams, diagnostics
from msmbayes.ctmc import build_rate_matrix
from msmbayes.diagnostics import (
    effective_sample_size,
    posterior_summary,
    predictive_death_distribution,
)

P_ID = np.array([[0.0, 0.8, 0.2], [0.3, 0.0, 0.7], [0.0, 0.0, 0.0]])


def test_doctests():
    assert doctest.testmod(diagnostics).failed == 0


class TestSummary:
    def test_constant(self):
        (row,) = posterior_summary(np.full(50, 2.5), ["c"])
        assert (row.mean, row.sd, row.q025, row.q975) == (2.5, 0.0, 2.5, 2.5)
        assert row.parameter == "c"

    def test_one_to_hundred(self):
        (row,) = posterior_summary(np.arange(1.0, 101.0))
        assert row.q025 == pytest.approx(3.475, abs=1e-12)
        assert row.q975 == pytest.approx(97.525, abs=1e-12)

    def test_standard_normal(self, rng):
        n = 1_000_000
        (row,) = posterior_summary(rng.standard_normal(n))
        assert abs(row.mean) < 3 / np.sqrt(n)
        assert abs(row.sd - 1) < 3 * np.sqrt(0.5 / n)
        # SE of a quantile: sqrt(p(1-p)/n) / phi(q)
        se_q = np.sqrt(0.025 * 0.975 / n) / 0.05844
        assert abs(row.q025 + 1.959964) < 3 * se_q
        assert abs(row.q975 - 1.959964) < 3 * se_q

    def test_sd_single_draw_and_empty(self):
        (row,) = posterior_summary(np.array([[4.0]]))
        assert row.sd == 0.0
        with pytest.raises(ValueError):
            posterior_summary(np.empty((0, 2)))

    def test_many_columns(self, rng):
        x = rng.normal(size=(200, 3))
        rows = posterior_summary(x, ["a", "b", "c"])
        assert [r.parameter for r in rows] == ["a", "b", "c"]
        assert rows[1].sd == pytest.approx(x[:, 1].std(ddof=1))


class TestESS:
    def test_iid(self, rng):
        n = 10_000
        ess = effective_sample_size(rng.standard_normal(n))
        assert 0.8 <= ess / n <= 1.2

    def test_constant_floor(self):
        assert effective_sample_size(np.ones(500)) == 1.0

    def test_ar1(self, rng):
        n, rho = 100_000, 0.9
        x = lfilter([1.0], [1.0, -rho], rng.standard_normal(n))
        ratio = effective_sample_size(x) / n
        target = (1 - rho) / (1 + rho)
        assert target / 1.5 < ratio < target * 1.5

    def test_too_few(self):
        with pytest.raises(ValueError):
            effective_sample_size(np.arange(99.0))

    def test_antithetic_not_below_one(self, rng):
        x = np.tile([1.0, -1.0], 200) + 1e-3 * rng.standard_normal(400)
        assert effective_sample_size(x) >= 1.0


class TestPredictive:
    grid = np.linspace(0, 30, 20)

    def test_markov_point_mass_matches_expm(self, rng):
        th = MarkovParams(P_ID, [0.3, 0.14, 0.0])
        curve = predictive_death_distribution([th], 0, self.grid, rng, n_simulations=100_000)
        G = build_rate_matrix(P_ID, [0.3, 0.14, 0.0]).matrix
        exact = np.array([expm(G * t)[0, 2] for t in self.grid])
        se = np.sqrt(exact * (1 - exact) / curve.n_simulated)
        assert np.all(np.abs(curve.cdf - exact) <= 3 * se + 1e-15)

    @pytest.mark.parametrize("theta", [
        WeibullSMParams(P_ID, [1.4, 0.7, 1.0], [0.3, 0.14, 0.0]),
        GompertzIMParams(P_ID, [-0.69, -2.3, 0.0], [0.2, 0.2, 0.0]),
    ])
    def test_cdf_shape(self, rng, theta):
        curve = predictive_death_distribution([theta, theta], 0, self.grid, rng,
                                              n_simulations=20_000)
        assert curve.cdf[0] == 0.0
        assert np.all(np.diff(curve.cdf) >= 0) and curve.cdf[-1] <= 1.0
        assert np.all(curve.density >= 0)
        mass = np.sum(curve.density * np.diff(curve.bin_edges))
        assert mass == pytest.approx(curve.n_absorbed / curve.n_simulated, abs=1e-12)

    def test_bin_width(self, rng):
        th = MarkovParams(P_ID, [0.3, 0.14, 0.0])
        curve = predictive_death_distribution([th], 0, self.grid, rng, 1000, bin_width=7.0)
        np.testing.assert_allclose(curve.bin_edges, [0, 7, 14, 21, 28, 30])

    def test_errors(self, rng):
        th = MarkovParams(P_ID, [0.3, 0.14, 0.0])
        with pytest.raises(ValueError):
            predictive_death_distribution([], 0, self.grid, rng)
        with pytest.raises(ValueError):
            predictive_death_distribution([th], 0, [0.0], rng)
        recurrent = MarkovParams([[0, 1.0], [1.0, 0]], [1.0, 1.0])
        with pytest.raises(ValueError):
            predictive_death_distribution([recurrent], 0, self.grid, rng)
