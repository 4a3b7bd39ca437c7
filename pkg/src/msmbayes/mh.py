"""Metropolis-Hastings update of one latent trajectory with a Markov-bridge proposal."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .ctmc import RateMatrix, UniformizedChain, uniformize
from .models import (
    MarkovParams,
    ModelParams,
    PanelSeries,
    Trajectory,
    log_density,
)

__all__ = [
    "MarkovProposal",
    "TrajectoryState",
    "log_accept_ratio",
    "mh_update",
]


@dataclass(frozen=True)
class MarkovProposal:
    """Homogeneous or piecewise-homogeneous Markov proposal for one panel series.

    ``chain_of_interval[k]`` selects the generator used on the k-th
    observation interval.
    """

    chains: tuple
    chain_of_interval: np.ndarray

    @classmethod
    def homogeneous(cls, G, panel: PanelSeries, chain=None):
        chain = chain if chain is not None else uniformize(G)
        return cls((chain,), np.zeros(len(panel.times) - 1, dtype=np.int64))

    def kernel_args(self, panel: PanelSeries):
        gaps = np.diff(panel.times)
        ncap = max(ch.cap(gaps[self.chain_of_interval == c].max(initial=0.0))
                   for c, ch in enumerate(self.chains))
        powers = np.stack([ch.powers(ncap)[: ncap + 1] for ch in self.chains])
        Gs = np.stack([ch.generator.matrix for ch in self.chains])
        mus = np.array([ch.mu for ch in self.chains])
        return self.chain_of_interval, powers, Gs, mus

    def log_density(self, y: Trajectory, panel: PanelSeries):
        _, _, Gs, _ = self.kernel_args(panel)
        return K.log_density_piecewise(y.initial_state, y.jump_times, y.jump_states,
                                       y.end_time, y.censored, panel.times,
                                       self.chain_of_interval, Gs)


@dataclass(frozen=True)
class TrajectoryState:
    """Current path plus log target minus log proposal evaluated on it."""

    current: Trajectory
    log_target_minus_proposal: float


def log_accept_ratio(current: Trajectory, proposed: Trajectory,
                     theta_model: ModelParams, theta_proposal: MarkovParams) -> float:
    """Log MH ratio for replacing ``current`` by ``proposed``.

    The normalizing constants of the conditioned target and proposal do not
    depend on the path and cancel, so only complete-data densities appear.
    """
    if current is proposed:
        return 0.0
    lt_prop = log_density(proposed, theta_model)
    lt_cur = log_density(current, theta_model)
    if lt_cur == -np.inf:
        raise ValueError("current trajectory has zero density under the model")
    if lt_prop == -np.inf:
        return -np.inf
    lq_prop = log_density(proposed, theta_proposal)
    lq_cur = log_density(current, theta_proposal)
    return (lt_prop - lq_prop) - (lt_cur - lq_cur)


def _as_proposal(G, panel):
    if isinstance(G, MarkovProposal):
        return G
    if isinstance(G, UniformizedChain):
        return MarkovProposal((G,), np.zeros(len(panel.times) - 1, dtype=np.int64))
    if not isinstance(G, RateMatrix):
        G = RateMatrix(G)
    return MarkovProposal.homogeneous(G, panel)


def mh_update(panel: PanelSeries, state, theta_model: ModelParams, G_proposal, rng,
              attempts=1):
    """One (or ``attempts``) MH steps on the latent path of one individual.

    ``state`` is a :class:`TrajectoryState` or a bare :class:`Trajectory`.
    Returns ``(new_state, accepted)``; ``accepted`` counts accepted attempts
    and is a bool when ``attempts == 1``. A proposal that cannot be drawn
    (endpoints unreachable under the proposal) is counted as a rejection.
    """
    current = state.current if isinstance(state, TrajectoryState) else state
    proposal = _as_proposal(G_proposal, panel)
    kind, P, a, b = theta_model.kernel_args()
    chain_of_interval, powers, Gs, mus = proposal.kernel_args(panel)
    t, s, ratio, n_acc, n_fail = K.mh_attempts(
        panel.times, panel.states, panel.end_kind == "death_exact",
        panel.end_kind == "censored", chain_of_interval, powers, Gs, mus,
        np.array(current.jump_times), np.array(current.jump_states),
        kind, P, a, b, int(attempts), rng)
    if n_fail < 0:
        raise ValueError("current trajectory has zero density under the model")
    new = current if n_acc == 0 else Trajectory(current.initial_state, t, s,
                                                current.end_time, current.end_kind)
    accepted = bool(n_acc) if attempts == 1 else n_acc
    return TrajectoryState(new, float(ratio)), accepted
