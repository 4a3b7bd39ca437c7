"""Trajectories, panel series, parameter types and complete-data densities.

Three model classes share one trajectory representation:

* ``MarkovParams``: exponential sojourns with exit rates ``gamma``.
* ``WeibullSMParams``: semi-Markov with Weibull sojourns whose cumulative
  hazard in state r is ``(gamma_r u) ** alpha_r = eta_r u ** alpha_r``.
* ``GompertzIMParams``: time-inhomogeneous Markov with exit rate
  ``exp(beta0_r + beta1_r t)`` at calendar time t.

In all three the jump chain has transition matrix ``P`` and an absorbing
state is a row of ``P`` that is identically zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _kernels as K
from .ctmc import check_transition_matrix

__all__ = [
    "END_KINDS",
    "PANEL_END_KINDS",
    "GompertzIMParams",
    "MarkovParams",
    "ModelParams",
    "PanelSeries",
    "Trajectory",
    "WeibullSMParams",
    "log_density",
    "log_density_inhom_gompertz",
    "log_density_markov",
    "log_density_semimarkov_weibull",
    "simulate_forward",
]

END_KINDS = ("censored", "absorbed_exact", "absorbed_in_interval")
PANEL_END_KINDS = ("censored", "death_exact", "death_interval")
_PANEL_TO_TRAJ = dict(zip(PANEL_END_KINDS, END_KINDS))


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Trajectory:
    """A complete path on [0, end_time].

    ``jump_times[i]`` is the time of the i-th real transition and
    ``jump_states[i]`` the state entered. For absorbed trajectories the last
    jump enters the absorbing state; with ``absorbed_exact`` it happens at
    ``end_time``.
    """

    initial_state: int
    jump_times: np.ndarray
    jump_states: np.ndarray
    end_time: float
    end_kind: str = "censored"

    def __post_init__(self):
        object.__setattr__(self, "jump_times", _frozen(self.jump_times, float))
        object.__setattr__(self, "jump_states", _frozen(self.jump_states, np.int64))
        object.__setattr__(self, "initial_state", int(self.initial_state))
        object.__setattr__(self, "end_time", float(self.end_time))
        if self.end_kind not in END_KINDS:
            raise ValueError(f"unknown end kind {self.end_kind!r}")

    @property
    def n_jumps(self):
        return self.jump_times.shape[0]

    @property
    def censored(self):
        return self.end_kind == "censored"

    @property
    def final_state(self):
        return int(self.jump_states[-1]) if self.n_jumps else self.initial_state

    def states(self):
        return np.concatenate([[self.initial_state], self.jump_states])

    def sojourns(self):
        """Durations of the completed sojourns (one per jump)."""
        return np.diff(self.jump_times, prepend=0.0)

    def state_at(self, t):
        k = np.searchsorted(self.jump_times, t, side="right")
        return self.initial_state if k == 0 else int(self.jump_states[k - 1])

    def validate(self, absorbing=()):
        z = self.jump_times
        if z.shape != self.jump_states.shape:
            raise ValueError("jump times and states differ in length")
        if self.n_jumps:
            if not z[0] > 0 or np.any(np.diff(z) <= 0):
                raise ValueError("jump times must be strictly increasing and positive")
            if z[-1] > self.end_time:
                raise ValueError("jump after the end time")
            if np.any(np.diff(self.states()) == 0):
                raise ValueError("self-transition in trajectory")
        if not self.censored:
            if self.final_state not in absorbing:
                raise ValueError("absorbed trajectory does not end in an absorbing state")
            if self.end_kind == "absorbed_exact" and (not self.n_jumps or z[-1] != self.end_time):
                raise ValueError("exact absorption must happen at the end time")
        return self


@dataclass(frozen=True)
class PanelSeries:
    """Observed states ``states[k]`` at times ``times[k]`` with ``times[0] == 0``.

    ``end_kind`` is ``censored`` (alive at the last time), ``death_exact``
    (last time is the death time) or ``death_interval`` (death happened at
    some point after the previous observation).
    """

    times: np.ndarray
    states: np.ndarray
    end_kind: str = "censored"
    id: str | None = None

    def __post_init__(self):
        t = _frozen(self.times, float)
        s = _frozen(self.states, np.int64)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)
        if self.end_kind not in PANEL_END_KINDS:
            raise ValueError(f"unknown end kind {self.end_kind!r}")
        if t.ndim != 1 or t.shape != s.shape or t.shape[0] < 2:
            raise ValueError("a panel series needs at least two observations")
        if t[0] != 0:
            raise ValueError("first observation must be at time 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("observation times must be strictly increasing")

    @property
    def end_time(self):
        return float(self.times[-1])

    @property
    def trajectory_end_kind(self):
        return _PANEL_TO_TRAJ[self.end_kind]


@dataclass(frozen=True)
class MarkovParams:
    P: np.ndarray
    gamma: np.ndarray

    kind = "markov"

    def __post_init__(self):
        object.__setattr__(self, "P", _frozen(check_transition_matrix(self.P), float))
        g = _frozen(self.gamma, float)
        if g.shape != (self.P.shape[0],) or np.any(g < 0):
            raise ValueError("gamma must be a nonnegative vector with one entry per state")
        object.__setattr__(self, "gamma", g)

    @property
    def n_states(self):
        return self.P.shape[0]

    @property
    def absorbing(self):
        return _absorbing(self.P)

    def kernel_args(self):
        return K.MARKOV, self.P, self.gamma, self.gamma

    def rate_matrix(self):
        from .ctmc import build_rate_matrix

        return build_rate_matrix(self.P, np.where(self.P.sum(axis=1) > 0, self.gamma, 0.0))


@dataclass(frozen=True)
class WeibullSMParams:
    """Weibull semi-Markov parameters.

    ``eta = gamma ** alpha`` is kept alongside because the Gibbs step is
    conjugate in it. Absorbing states carry ``alpha = 1`` and ``gamma = 0``.
    """

    P: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    eta: np.ndarray = field(default=None)

    kind = "weibull-sm"

    def __post_init__(self):
        P = _frozen(check_transition_matrix(self.P), float)
        S = P.shape[0]
        alpha = _frozen(self.alpha, float)
        gamma = _frozen(self.gamma, float)
        if alpha.shape != (S,) or gamma.shape != (S,):
            raise ValueError("alpha and gamma need one entry per state")
        live = P.sum(axis=1) > 0
        if np.any(alpha[live] <= 0) or np.any(gamma[live] <= 0):
            raise ValueError("alpha and gamma must be strictly positive")
        eta = gamma ** alpha if self.eta is None else np.asarray(self.eta, float)
        if eta.shape != (S,) or np.any(
            np.abs(eta - gamma ** alpha) > 1e-12 * np.maximum(1.0, np.abs(eta))
        ):
            raise ValueError("eta inconsistent with gamma ** alpha")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "eta", _frozen(eta, float))

    @classmethod
    def from_eta(cls, P, alpha, eta):
        alpha = np.asarray(alpha, float)
        eta = np.asarray(eta, float)
        with np.errstate(divide="ignore"):
            gamma = np.where(eta > 0, eta ** (1.0 / alpha), 0.0)
        return cls(P, alpha, gamma, eta)

    @property
    def n_states(self):
        return self.P.shape[0]

    @property
    def absorbing(self):
        return _absorbing(self.P)

    def kernel_args(self):
        return K.WEIBULL, self.P, self.alpha, self.eta


@dataclass(frozen=True)
class GompertzIMParams:
    """Rates ``gamma_rs(t) = P[r, s] * exp(beta0[r] + beta1[r] * t)``."""

    P: np.ndarray
    beta0: np.ndarray
    beta1: np.ndarray

    kind = "gompertz-im"

    def __post_init__(self):
        P = _frozen(check_transition_matrix(self.P), float)
        b0 = _frozen(self.beta0, float)
        b1 = _frozen(self.beta1, float)
        if b0.shape != (P.shape[0],) or b1.shape != (P.shape[0],):
            raise ValueError("beta0 and beta1 need one entry per state")
        if not (np.all(np.isfinite(b0)) and np.all(np.isfinite(b1))):
            raise ValueError("regression coefficients must be finite")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "beta0", b0)
        object.__setattr__(self, "beta1", b1)

    @property
    def n_states(self):
        return self.P.shape[0]

    @property
    def absorbing(self):
        return _absorbing(self.P)

    def exit_rates(self, t):
        live = self.P.sum(axis=1) > 0
        return np.where(live, np.exp(self.beta0 + self.beta1 * t), 0.0)

    def kernel_args(self):
        return K.GOMPERTZ, self.P, self.beta0, self.beta1


ModelParams = Union[MarkovParams, WeibullSMParams, GompertzIMParams]


def _absorbing(P):
    return frozenset(np.flatnonzero(P.sum(axis=1) == 0).tolist())


def _check_traj(y, theta):
    if y.initial_state >= theta.n_states or np.any(y.jump_states >= theta.n_states):
        raise ValueError("trajectory visits a state outside the model")
    y.validate(theta.absorbing)


def log_density(y: Trajectory, theta: ModelParams, check=True) -> float:
    """Log density of a complete trajectory under any of the three model classes.

    Returns ``-inf`` when the path uses a transition with zero probability.
    """
    if check:
        _check_traj(y, theta)
    kind, P, a, b = theta.kernel_args()
    return K.log_density(kind, y.initial_state, y.jump_times, y.jump_states,
                         y.end_time, y.censored, P, a, b)


def log_density_markov(y: Trajectory, theta: MarkovParams) -> float:
    if not isinstance(theta, MarkovParams):
        raise TypeError("expected MarkovParams")
    return log_density(y, theta)


def log_density_semimarkov_weibull(y: Trajectory, theta: WeibullSMParams) -> float:
    if not isinstance(theta, WeibullSMParams):
        raise TypeError("expected WeibullSMParams")
    return log_density(y, theta)


def log_density_inhom_gompertz(y: Trajectory, theta: GompertzIMParams) -> float:
    if not isinstance(theta, GompertzIMParams):
        raise TypeError("expected GompertzIMParams")
    return log_density(y, theta)


def simulate_forward(theta: ModelParams, s0: int, horizon: float, rng) -> Trajectory:
    """Draw an unconditioned path from ``s0`` on [0, horizon].

    The path is censored at ``horizon`` unless it is absorbed first, in
    which case its end time is the absorption time.
    """
    if s0 in theta.absorbing:
        raise ValueError("initial state is absorbing")
    if not 0 <= s0 < theta.n_states:
        raise ValueError("initial state out of range")
    kind, P, a, b = theta.kernel_args()
    t, s, absorbed = K.simulate_path(kind, int(s0), float(horizon), P, a, b, rng)
    if absorbed:
        return Trajectory(s0, t, s, t[-1], "absorbed_exact")
    return Trajectory(s0, t, s, horizon, "censored")
