import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msmbayes import (
    GompertzIMParams,
    MarkovParams,
    PanelSeries,
    Trajectory,
    WeibullSMParams,
    log_density,
    sample_full_proposal,
    simulate_forward,
    uniformize,
)
from msmbayes.ctmc import build_rate_matrix
from msmbayes.gibbs import build_proposal_rate_matrix
from msmbayes.mh import MarkovProposal, TrajectoryState, log_accept_ratio, mh_update
from oracles import total_variation, weibull_panel_rejection

P_ID = np.array([[0.0, 0.8, 0.2], [0.3, 0.0, 0.7], [0.0, 0.0, 0.0]])
P_TRUTH = np.array([[0.0, 0.25 / 0.30, 0.05 / 0.30], [0.04 / 0.14, 0.0, 0.1 / 0.14], [0, 0, 0]])


def run_chain(panel, theta, G, n, rng, thin=1):
    y = sample_full_proposal(G, panel, rng)
    state = TrajectoryState(y, log_density(y, theta) - log_density(y, MarkovParams(
        theta.P, -np.diag(G.matrix if hasattr(G, "matrix") else G))))
    out, acc = [], 0
    for i in range(n * thin):
        state, a = mh_update(panel, state, theta, G, rng)
        acc += a
        if i % thin == 0:
            out.append(state.current)
    return out, acc / (n * thin), state


class TestLogAcceptRatio:
    def test_identity(self, rng):
        th = WeibullSMParams(P_ID, [1.3, 0.8, 1.0], [0.5, 0.4, 0.0])
        y = simulate_forward(th, 0, 5.0, rng)
        prop = MarkovParams(P_ID, th.gamma)
        assert log_accept_ratio(y, y, th, prop) == 0.0

    def test_unit_shape_gives_zero(self, rng):
        th = WeibullSMParams(P_ID, [1.0, 1.0, 1.0], [0.5, 0.4, 0.0])
        prop = MarkovParams(P_ID, th.gamma)
        for _ in range(200):
            a, b = simulate_forward(th, 0, 5.0, rng), simulate_forward(th, 0, 5.0, rng)
            assert abs(log_accept_ratio(a, b, th, prop)) < 1e-12

    def test_hand_computed_weibull(self):
        # two states, 1 -> 2 absorbing; shapes (2, 1); single jump at z
        P = np.array([[0.0, 1.0], [0.0, 0.0]])
        g, a = 0.7, 2.0
        th = WeibullSMParams(P, [a, 1.0], [g, 0.0])
        prop = MarkovParams(P, [g, 0.0])
        z, zp = 1.3, 0.4
        cur = Trajectory(0, [z], [1], z, "absorbed_exact")
        new = Trajectory(0, [zp], [1], zp, "absorbed_exact")
        eta = g ** a
        lsm = lambda w: np.log(a * eta * w ** (a - 1)) - eta * w ** a  # noqa: E731
        lm = lambda w: np.log(g) - g * w  # noqa: E731
        expected = (lsm(zp) - lm(zp)) - (lsm(z) - lm(z))
        assert log_accept_ratio(cur, new, th, prop) == pytest.approx(expected, abs=1e-10)

    def test_forbidden_proposal_and_invalid_current(self):
        P = np.array([[0, 1.0, 0.0], [0.5, 0.0, 0.5], [0, 0, 0]])
        th = MarkovParams(P, [1.0, 1.0, 0.0])
        prop = MarkovParams(P_ID, [1.0, 1.0, 0.0])
        ok = Trajectory(0, [1.0], [1], 2.0)
        bad = Trajectory(0, [1.0], [2], 1.0, "absorbed_exact")
        assert log_accept_ratio(ok, bad, th, prop) == -np.inf
        with pytest.raises(ValueError):
            log_accept_ratio(bad, ok, th, prop)


class TestMHUpdate:
    def test_markov_nesting_accepts_everything(self, rng):
        th = WeibullSMParams(P_ID, [1.0, 1.0, 1.0], [0.4, 0.3, 0.0])
        G = build_proposal_rate_matrix(th)
        panel = PanelSeries([0, 2, 5, 9], [0, 1, 1, 2], "death_interval")
        _, rate, _ = run_chain(panel, th, G, 1000, rng)
        assert rate == 1.0

    def test_cache_coherent(self, rng):
        th = WeibullSMParams(P_ID, [1.5, 0.7, 1.0], [0.4, 0.3, 0.0])
        G = build_proposal_rate_matrix(th)
        prop = MarkovParams(P_ID, th.gamma)
        panel = PanelSeries([0, 2, 5, 9], [0, 1, 0, 2], "death_exact")
        state = TrajectoryState(sample_full_proposal(G, panel, rng), np.nan)
        for _ in range(300):
            state, _ = mh_update(panel, state, th, G, rng)
            y = state.current
            fresh = log_density(y, th) - log_density(y, prop)
            assert state.log_target_minus_proposal == pytest.approx(fresh, abs=1e-9)

    def test_deterministic_given_seed(self):
        th = WeibullSMParams(P_ID, [1.5, 0.7, 1.0], [0.4, 0.3, 0.0])
        G = build_proposal_rate_matrix(th)
        panel = PanelSeries([0, 3, 6], [0, 1, 1])
        runs = []
        for _ in range(2):
            rng = np.random.default_rng(99)
            state = sample_full_proposal(G, panel, rng)
            flags = []
            for _ in range(200):
                state, a = mh_update(panel, state, th, G, rng)
                flags.append(a)
            runs.append((flags, state.current.jump_times.tolist()))
        assert runs[0] == runs[1]

    @given(st.integers(0, 2**31))
    @settings(max_examples=25, deadline=None)
    def test_paths_pass_through_observations(self, seed):
        rng = np.random.default_rng(seed)
        th = WeibullSMParams(P_ID, [1.5, 0.7, 1.0], [0.4, 0.3, 0.0])
        G = build_proposal_rate_matrix(th)
        panel = PanelSeries([0, 1.5, 4, 6.5], [0, 1, 0, 2], "death_interval")
        state = sample_full_proposal(G, panel, rng)
        for _ in range(20):
            state, _ = mh_update(panel, state, th, G, rng)
            y = state.current
            y.validate({2})
            assert [y.state_at(t) for t in panel.times[:-1]] == [0, 1, 0]
            assert panel.times[-2] < y.jump_times[-1] < panel.end_time

    def test_multiple_attempts_count(self, rng):
        th = WeibullSMParams(P_ID, [1.0, 1.0, 1.0], [0.4, 0.3, 0.0])
        G = build_proposal_rate_matrix(th)
        panel = PanelSeries([0, 2, 5], [0, 1, 1])
        _, acc = mh_update(panel, sample_full_proposal(G, panel, rng), th, G, rng, attempts=5)
        assert acc == 5

    def test_current_outside_proposal_support_is_an_error(self, rng):
        th = MarkovParams(P_ID, [0.4, 0.3, 0.0])
        G = build_rate_matrix(P_ID, [0.4, 0.0, 0.0])  # state 2 frozen under G
        y = Trajectory(0, [0.5, 1.5], [1, 0], 2.0)
        with pytest.raises(ValueError):
            mh_update(PanelSeries([0, 1, 2], [0, 1, 0]), y, th, G, rng)


def jump_tv(chain_paths, ref_counts):
    return total_variation([y.n_jumps for y in chain_paths], ref_counts.tolist())


class TestStationaryLaw:
    def test_weibull_matches_rejection(self, rng):
        alpha = np.array([1.4, 0.7, 1.0])
        gamma = np.array([0.30, 0.14, 0.0])
        th = WeibullSMParams(P_TRUTH, alpha, gamma)
        panel = PanelSeries([0.0, 12.0], [0, 1])
        G = build_proposal_rate_matrix(th)
        n = 100_000
        paths, _, _ = run_chain(panel, th, G, n, rng)
        ref = weibull_panel_rejection(P_TRUTH, alpha, th.eta, panel.times, panel.states, n, rng)
        assert jump_tv(paths, ref) < 0.05

    @pytest.mark.parametrize("piecewise", [False, True])
    def test_gompertz_matches_rejection(self, rng, piecewise):
        th = GompertzIMParams(P_ID, [-0.69, -1.5, 0.0], [0.3, 0.2, 0.0])
        panel = PanelSeries([0.0, 2.0, 5.0], [0, 1, 1])
        if piecewise:
            mids = (panel.times[1:] + panel.times[:-1]) / 2
            chains = tuple(uniformize(build_rate_matrix(th.P, th.exit_rates(t))) for t in mids)
            G = MarkovProposal(chains, np.arange(len(mids)))
        else:
            G = build_proposal_rate_matrix(th, "midpoint", panel.end_time)
        n = 50_000
        y = sample_full_proposal(G.chains[0].generator if piecewise else G, panel, rng)
        paths = []
        state = y
        for _ in range(n):
            state, _ = mh_update(panel, state, th, G, rng)
            paths.append(state.current)
        ref = []
        while len(ref) < n:
            z = simulate_forward(th, 0, panel.end_time, rng)
            if z.censored and z.state_at(2.0) == 1 and z.state_at(5.0) == 1:
                ref.append(z.n_jumps)
        assert jump_tv(paths, np.array(ref)) < 0.05
