"""Endpoint-conditioned simulation of homogeneous Markov paths by uniformization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .ctmc import ConvergenceError, RateMatrix, UniformizedChain, uniformize
from .models import PanelSeries, Trajectory

__all__ = [
    "PathSegment",
    "UnreachableError",
    "sample_conditioned_segment",
    "sample_full_proposal",
    "sample_jump_count",
    "sample_segment_to_absorption",
]


class UnreachableError(ValueError):
    """The conditioning endpoints have zero probability under the generator."""


@dataclass(frozen=True)
class PathSegment:
    start_time: float
    end_time: float
    start_state: int
    jump_times: np.ndarray
    jump_states: np.ndarray

    @property
    def end_state(self):
        return int(self.jump_states[-1]) if len(self.jump_states) else self.start_state

    def state_at(self, t):
        k = np.searchsorted(self.jump_times, t, side="right")
        return self.start_state if k == 0 else int(self.jump_states[k - 1])


def _raise_for(status, what, lam=None, n=None):
    if status == K.UNREACHABLE:
        raise UnreachableError(f"{what}: endpoints are not mutually reachable")
    if status == K.CAP_REACHED:
        raise ConvergenceError(f"{what}: series cap reached",
                               K.poisson_tail_bound(lam, n))


def _chain(chain):
    if isinstance(chain, UniformizedChain):
        return chain
    return uniformize(chain)


def sample_jump_count(chain: UniformizedChain, dt: float, r: int, s: int, rng) -> int:
    """Number of uniformized jumps (real and virtual) on an interval of length dt.

    ``P(N = n) = Pois(n; mu dt) R^n[r, s] / p_rs(dt)``, inverted by a running
    cumulative sum.
    """
    chain = _chain(chain)
    powers = chain.powers_for(dt)
    n, status = K.draw_jump_count(powers, chain.mu * dt, int(r), int(s), rng)
    _raise_for(status, "jump count", chain.mu * dt, powers.shape[0])
    return n


def sample_conditioned_segment(chain, G, u, v, r, s, rng) -> PathSegment:
    """Path on [u, v] with ``Y(u) = r`` and ``Y(v) = s``.

    ``G`` is accepted for symmetry with :func:`sample_segment_to_absorption`
    but the chain already carries its generator.
    """
    chain = _chain(chain if chain is not None else G)
    if not v > u:
        raise ValueError("need u < v")
    dt = v - u
    powers = chain.powers_for(dt)
    t, st, status = K.bridge(powers, chain.mu * dt, float(u), float(v), int(r), int(s), rng)
    _raise_for(status, "conditioned segment", chain.mu * dt, powers.shape[0])
    return PathSegment(float(u), float(v), int(r), t, st)


def sample_segment_to_absorption(chain, G, u, v, r, absorbing_state, rng) -> PathSegment:
    """Path on [u, v] from r that enters ``absorbing_state`` exactly at v.

    The state occupied just before v is drawn with weights
    ``p_{r a}(v - u) * G[a, absorbing_state]``.
    """
    chain = _chain(chain if chain is not None else G)
    Gm = (G if G is not None else chain.generator)
    Gm = Gm.matrix if isinstance(Gm, RateMatrix) else np.asarray(Gm, float)
    if Gm[absorbing_state].any():
        raise ValueError("target state is not absorbing")
    if Gm[r, r] == 0:
        raise ValueError("start state is absorbing")
    if not np.any(np.delete(Gm[:, absorbing_state], absorbing_state) > 0):
        raise UnreachableError("no state has a positive rate into the absorbing state")
    dt = v - u
    powers = chain.powers_for(dt)
    t, st, status = K.bridge_to_absorption(powers, Gm, chain.mu * dt, float(u), float(v),
                                           int(r), int(absorbing_state), rng)
    _raise_for(status, "segment to absorption", chain.mu * dt, powers.shape[0])
    return PathSegment(float(u), float(v), int(r), t, st)


def sample_full_proposal(G, panel: PanelSeries, rng, chain=None) -> Trajectory:
    """Markov path through every observation of a panel series.

    Intervals are bridged independently; an exactly observed death uses the
    absorbing variant on the last interval, an interval-censored death an
    ordinary bridge into the absorbing state.
    """
    if not isinstance(G, RateMatrix):
        G = RateMatrix(G)
    chain = chain if chain is not None else uniformize(G)
    gaps = np.diff(panel.times)
    powers = chain.powers_for(gaps.max())
    t, s, status = K.propose_path(
        panel.times, panel.states, panel.end_kind == "death_exact",
        np.zeros(len(gaps), dtype=np.int64), powers[None], G.matrix[None],
        np.array([chain.mu]), rng)
    _raise_for(status, "panel proposal", chain.mu * gaps.max(), powers.shape[0])
    return Trajectory(int(panel.states[0]), t, s, panel.end_time,
                      panel.trajectory_end_kind)
