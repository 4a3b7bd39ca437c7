import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats
from scipy.linalg import expm

from msmbayes import (
    GompertzIMParams,
    MarkovParams,
    PanelSeries,
    Trajectory,
    WeibullSMParams,
    log_density,
    simulate_forward,
)
from msmbayes.models import (
    log_density_inhom_gompertz,
    log_density_markov,
    log_density_semimarkov_weibull,
)

P_ID = np.array([[0.0, 0.8, 0.2], [0.3, 0.0, 0.7], [0.0, 0.0, 0.0]])


@st.composite
def trajectories(draw, absorbing=2):
    """Random valid paths on the 3-state illness-death chain with recovery."""
    n = draw(st.integers(0, 8))
    gaps = draw(st.lists(st.floats(0.01, 3.0), min_size=n + 1, max_size=n + 1))
    states = [0]
    for _ in range(n):
        cur = states[-1]
        choices = [s for s in range(3) if s != cur and P_ID[cur, s] > 0]
        states.append(draw(st.sampled_from(choices)))
        if states[-1] == absorbing:
            break
    times = np.cumsum(gaps)[: len(states) - 1]
    if states[-1] == absorbing:
        return Trajectory(0, times, states[1:], times[-1], "absorbed_exact")
    return Trajectory(0, times, states[1:], float(np.sum(gaps[: len(states)])), "censored")


params_st = st.tuples(st.floats(0.05, 3.0), st.floats(0.05, 3.0),
                      st.floats(0.3, 3.0), st.floats(0.3, 3.0))


class TestTrajectory:
    def test_validation(self):
        Trajectory(0, [1.0, 2.0], [1, 2], 2.0, "absorbed_exact").validate({2})
        with pytest.raises(ValueError):
            Trajectory(0, [2.0, 1.0], [1, 0], 3.0).validate()
        with pytest.raises(ValueError):
            Trajectory(0, [1.0, 2.0], [1, 1], 3.0).validate()
        with pytest.raises(ValueError):
            Trajectory(0, [1.0], [1], 0.5).validate()
        with pytest.raises(ValueError):
            Trajectory(0, [1.0], [1], 2.0, "absorbed_exact").validate({2})
        with pytest.raises(ValueError):
            Trajectory(0, [1.0], [2], 2.0, "absorbed_exact").validate({2})
        with pytest.raises(ValueError):
            Trajectory(0, [], [], 1.0, "open")

    def test_accessors(self):
        y = Trajectory(0, [1.0, 2.5], [1, 0], 4.0)
        assert y.state_at(0.5) == 0 and y.state_at(1.0) == 1 and y.state_at(3) == 0
        np.testing.assert_allclose(y.sojourns(), [1.0, 1.5])
        assert y.final_state == 0 and y.n_jumps == 2
        with pytest.raises(ValueError):
            y.jump_times[0] = 0.3


class TestPanelSeries:
    def test_validation(self):
        PanelSeries([0, 3], [0, 1])
        for times, states in (([0], [0]), ([1, 2], [0, 0]), ([0, 2, 2], [0, 0, 0])):
            with pytest.raises(ValueError):
                PanelSeries(times, states)
        with pytest.raises(ValueError):
            PanelSeries([0, 1], [0, 1], "dead")


class TestParams:
    def test_weibull_eta(self):
        th = WeibullSMParams(P_ID, [2.0, 0.5, 1.0], [0.5, 2.0, 0.0])
        np.testing.assert_allclose(th.eta[:2], [0.25, 2.0 ** 0.5])
        with pytest.raises(ValueError):
            WeibullSMParams(P_ID, [2.0, 0.5, 1.0], [0.5, 2.0, 0.0], eta=[0.3, 1.0, 0.0])
        again = WeibullSMParams.from_eta(P_ID, th.alpha, th.eta)
        np.testing.assert_allclose(again.gamma, th.gamma, rtol=1e-14)

    def test_positivity(self):
        with pytest.raises(ValueError):
            WeibullSMParams(P_ID, [0.0, 1.0, 1.0], [1.0, 1.0, 0.0])
        with pytest.raises(ValueError):
            MarkovParams(P_ID, [-1.0, 1.0, 0.0])
        with pytest.raises(ValueError):
            GompertzIMParams(P_ID, [0.0, np.nan, 0.0], [0.0, 0.0, 0.0])


class TestMarkovDensity:
    def test_censored_single_sojourn(self):
        th = MarkovParams([[0, 1], [1, 0]], [0.5, 1.0])
        assert log_density_markov(Trajectory(0, [], [], 2.0), th) == pytest.approx(-1.0, abs=1e-15)

    def test_absorbed_single_jump(self):
        th = MarkovParams([[0, 1], [0, 0]], [1.0, 0.0])
        y = Trajectory(0, [1.0], [1], 1.0, "absorbed_exact")
        assert log_density_markov(y, th) == pytest.approx(-1.0, abs=1e-15)

    def test_zero_probability_transition(self):
        th = MarkovParams([[0, 1.0, 0.0], [0.5, 0, 0.5], [0, 0, 0]], [1.0, 1.0, 0.0])
        y = Trajectory(0, [1.0], [2], 1.0, "absorbed_exact")
        assert log_density_markov(y, th) == -np.inf

    def test_type_check(self):
        th = MarkovParams([[0, 1], [1, 0]], [0.5, 1.0])
        with pytest.raises(TypeError):
            log_density_semimarkov_weibull(Trajectory(0, [], [], 1.0), th)

    def test_forward_sojourns_exponential(self, rng):
        th = MarkovParams([[0, 1], [0, 0]], [0.7, 0.0])
        w = np.array([simulate_forward(th, 0, 1e6, rng).jump_times[0] for _ in range(10_000)])
        assert stats.kstest(w, "expon", args=(0, 1 / 0.7)).pvalue > 0.01
        assert abs(w.mean() - 1 / 0.7) < 3 * (1 / 0.7) / np.sqrt(w.size)


class TestWeibullDensity:
    def test_censored_survivor_only(self):
        # cumulative hazard eta * T**alpha with eta = 0.5, alpha = 2, T = 2
        th = WeibullSMParams.from_eta([[0, 1], [1, 0]], [2.0, 1.0], [0.5, 1.0])
        y = Trajectory(0, [], [], 2.0)
        assert log_density_semimarkov_weibull(y, th) == pytest.approx(-2.0, abs=1e-14)
        # on the rate scale the same path gives -(gamma T) ** alpha
        th2 = WeibullSMParams([[0, 1], [1, 0]], [2.0, 1.0], [0.5, 1.0])
        assert log_density(y, th2) == pytest.approx(-1.0, abs=1e-14)

    @given(trajectories(), params_st)
    @settings(max_examples=200, deadline=None)
    def test_unit_shape_is_markov(self, y, p):
        g1, g2 = p[0], p[1]
        sm = WeibullSMParams(P_ID, [1.0, 1.0, 1.0], [g1, g2, 0.0])
        mk = MarkovParams(P_ID, [g1, g2, 0.0])
        assert abs(log_density(y, sm) - log_density(y, mk)) < 1e-10

    @given(trajectories(), params_st)
    @settings(max_examples=60, deadline=None)
    def test_quadrature(self, y, p):
        g = np.array([p[0], p[1], 0.0])
        a = np.array([p[2], p[3], 1.0])
        th = WeibullSMParams(P_ID, a, g)
        eta = th.eta
        lp = 0.0
        prev, cur = 0.0, y.initial_state
        for z, s in zip(y.jump_times, y.jump_states):
            w = z - prev
            haz = a[cur] * eta[cur] * w ** (a[cur] - 1)
            H = integrate.quad(lambda u: a[cur] * eta[cur] * u ** (a[cur] - 1), 0, w)[0]
            lp += np.log(P_ID[cur, s]) + np.log(haz) - H
            prev, cur = z, s
        if y.censored:
            lp -= integrate.quad(lambda u: a[cur] * eta[cur] * u ** (a[cur] - 1), 0,
                                 y.end_time - prev)[0]
        assert log_density(y, th) == pytest.approx(lp, abs=1e-8)

    def test_forward_sojourn_law(self, rng):
        th = WeibullSMParams([[0, 1], [0, 0]], [1.4, 1.0], [0.3, 0.0])
        w = np.array([simulate_forward(th, 0, 1e6, rng).jump_times[0] for _ in range(10_000)])
        assert stats.kstest(w, "weibull_min", args=(1.4, 0, 1 / 0.3)).pvalue > 0.01


class TestGompertzDensity:
    def test_censored_formula(self):
        th = GompertzIMParams([[0, 1], [1, 0]], [0.0, 0.0], [1.0, 1.0])
        y = Trajectory(0, [], [], 1.0)
        assert log_density_inhom_gompertz(y, th) == pytest.approx(-(np.e - 1), abs=1e-14)

    @given(trajectories(), st.floats(-2, 1), st.floats(-2, 1))
    @settings(max_examples=100, deadline=None)
    def test_homogeneous_limit(self, y, b01, b02):
        gz = GompertzIMParams(P_ID, [b01, b02, 0.0], [0.0, 0.0, 0.0])
        mk = MarkovParams(P_ID, [np.exp(b01), np.exp(b02), 0.0])
        assert log_density(y, gz) == pytest.approx(log_density(y, mk), abs=1e-10)

    def test_continuity_near_zero_slope(self):
        y = Trajectory(0, [1.0, 2.5], [1, 0], 4.0)
        vals = [log_density(y, GompertzIMParams(P_ID, [-0.5, -1.0, 0], [b, b, 0]))
                for b in (-1e-7, -1e-9, 0.0, 1e-9, 1e-7)]
        assert np.ptp(vals) < 1e-6

    @given(trajectories(), st.floats(-2, 0.5), st.floats(-0.3, 0.3),
           st.floats(-2, 0.5), st.floats(-0.3, 0.3))
    @settings(max_examples=60, deadline=None)
    def test_quadrature(self, y, b0a, b1a, b0b, b1b):
        b0 = np.array([b0a, b0b, 0.0])
        b1 = np.array([b1a, b1b, 0.0])
        th = GompertzIMParams(P_ID, b0, b1)
        rate = lambda r: (lambda t: np.exp(b0[r] + b1[r] * t))  # noqa: E731
        lp = 0.0
        prev, cur = 0.0, y.initial_state
        for z, s in zip(y.jump_times, y.jump_states):
            lp += np.log(P_ID[cur, s]) + b0[cur] + b1[cur] * z
            lp -= integrate.quad(rate(cur), prev, z, epsabs=1e-13)[0]
            prev, cur = z, s
        if y.censored:
            lp -= integrate.quad(rate(cur), prev, y.end_time, epsabs=1e-13)[0]
        assert log_density(y, th) == pytest.approx(lp, abs=1e-8)

    def test_forward_inversion_cdf(self, rng):
        b0, b1 = -0.69, 0.2
        th = GompertzIMParams([[0, 1], [0, 0]], [b0, 0.0], [b1, 0.0])
        w = np.array([simulate_forward(th, 0, 1e3, rng).jump_times[0] for _ in range(10_000)])
        cdf = lambda u: 1 - np.exp(-(np.exp(b0) / b1) * np.expm1(b1 * u))  # noqa: E731
        assert stats.kstest(w, cdf).pvalue > 0.01

    def test_negative_slope_can_escape(self, rng):
        # with beta1 < 0 the total hazard is finite, so some paths never jump
        th = GompertzIMParams([[0, 1], [0, 0]], [-1.0, 0.0], [-1.0, 0.0])
        ys = [simulate_forward(th, 0, 1e3, rng) for _ in range(2000)]
        frac = np.mean([y.n_jumps == 0 for y in ys])
        assert abs(frac - np.exp(-np.exp(-1.0))) < 0.04


class TestSimulateForward:
    def test_absorbing_start_rejected(self, rng):
        with pytest.raises(ValueError):
            simulate_forward(MarkovParams(P_ID, [1, 1, 0]), 2, 5.0, rng)

    def test_end_kinds(self, rng):
        th = MarkovParams(P_ID, [1.0, 1.0, 0.0])
        for _ in range(200):
            y = simulate_forward(th, 0, 3.0, rng)
            y.validate({2})
            if y.censored:
                assert y.end_time == 3.0
            else:
                assert y.end_time == y.jump_times[-1] and y.final_state == 2

    def test_panel_transition_frequencies(self, rng):
        th = MarkovParams(P_ID, [0.6, 0.4, 0.0])
        G = th.rate_matrix().matrix
        dt = 1.5
        ends = np.array([simulate_forward(th, 0, dt, rng).state_at(dt) for _ in range(100_000)])
        freq = np.bincount(ends, minlength=3) / ends.size
        assert 0.5 * np.abs(freq - expm(G * dt)[0]).sum() < 0.02
