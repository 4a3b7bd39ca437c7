"""Metropolis-within-Gibbs sampler for panel-observed multi-state models.

Each sweep first refreshes every latent trajectory with a Markov-bridge MH
step under the current parameters, then updates the parameters given the
completed trajectories:

* ``P``: Dirichlet, conjugate, with structural zeros masked out.
* Markov exit rates and Weibull ``eta``: Gamma, conjugate.
* Weibull shapes: random walk on ``log alpha`` with ``eta`` held fixed.
* Gompertz ``(beta0_r, beta1_r)``: joint Gaussian random walk per state.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .ctmc import RateMatrix, build_rate_matrix
from .models import (
    GompertzIMParams,
    MarkovParams,
    PanelSeries,
    Trajectory,
    WeibullSMParams,
)

__all__ = [
    "MODEL_KINDS",
    "PosteriorDraws",
    "PriorSpec",
    "SamplerConfig",
    "SamplerError",
    "SufficientStats",
    "build_proposal_rate_matrix",
    "default_mask",
    "initial_params",
    "parameter_names",
    "parameter_vector",
    "run_gibbs",
    "update_gompertz_params",
    "update_markov_rates",
    "update_transition_probs",
    "update_weibull_rates",
    "update_weibull_shapes",
]

log = logging.getLogger(__name__)

MODEL_KINDS = ("markov", "weibull-sm", "gompertz-im")
TARGET_ACCEPT = 0.35


class SamplerError(RuntimeError):
    """The sampler could not initialize or lost the data (unreachable panels)."""


@dataclass(frozen=True)
class PriorSpec:
    dirichlet_concentration: float = 1.0
    eta_shape: float = 0.001
    eta_rate: float = 0.001
    log_alpha_mean: float = 0.0
    log_alpha_sd: float = 1.0
    beta_mean: float = 0.0
    beta_sd: float = 10.0

    def __post_init__(self):
        for name in ("dirichlet_concentration", "eta_shape", "eta_rate",
                     "log_alpha_sd", "beta_sd"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class SamplerConfig:
    """Run length, step sizes and execution options.

    ``burn_in=None`` means 20% of ``iterations``. Random-walk scales are
    adapted toward 35% acceptance during burn-in when ``adapt`` is set and
    frozen afterwards.
    """

    iterations: int = 5000
    burn_in: int | None = None
    thinning: int = 1
    rw_step_log_alpha: float = 0.1
    rw_step_beta: float = 0.05
    adapt: bool = True
    seed: int = 0
    threads: int = 1
    block_size: int = 32
    trajectory_attempts_per_sweep: int = 1
    parameter_substeps: int = 1
    piecewise_proposal: bool = False
    t_star: str | float = "midpoint"
    max_failure_fraction: float = 0.5
    max_failure_sweeps: int = 100

    def __post_init__(self):
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.iterations // 5)
        if not self.iterations > self.burn_in >= 0:
            raise ValueError("need iterations > burn_in >= 0")
        if self.thinning < 1 or self.threads < 1 or self.block_size < 1:
            raise ValueError("thinning, threads and block_size must be positive")
        if self.rw_step_log_alpha < 0 or self.rw_step_beta < 0:
            raise ValueError("random-walk steps must be nonnegative")
        if self.trajectory_attempts_per_sweep < 1 or self.parameter_substeps < 1:
            raise ValueError("attempt counts must be positive")

    @property
    def n_retained(self):
        return (self.iterations - self.burn_in) // self.thinning


@dataclass
class SufficientStats:
    """Sojourn table of the completed trajectories.

    Row i is a sojourn in ``state[i]`` from ``start[i]`` to ``end[i]``;
    ``complete[i]`` is False for a final sojourn cut by censoring, in which
    case ``next_state[i] == -1``.
    """

    n_states: int
    state: np.ndarray
    start: np.ndarray
    end: np.ndarray
    complete: np.ndarray
    next_state: np.ndarray

    @classmethod
    def from_trajectories(cls, trajectories, n_states):
        rows = []
        for y in trajectories:
            states = y.states()
            starts = np.concatenate([[0.0], y.jump_times])
            for i in range(y.n_jumps):
                rows.append((states[i], starts[i], y.jump_times[i], True, states[i + 1]))
            if y.censored:
                rows.append((states[-1], starts[-1], y.end_time, False, -1))
        if not rows:
            e = np.empty(0)
            return cls(n_states, e.astype(np.int64), e, e, e.astype(bool), e.astype(np.int64))
        st, a, b, c, nx = map(np.array, zip(*rows))
        return cls(n_states, st.astype(np.int64), a.astype(float), b.astype(float),
                   c.astype(bool), nx.astype(np.int64))

    @property
    def duration(self):
        return self.end - self.start

    @property
    def transition_counts(self):
        S = self.n_states
        c = self.complete
        flat = self.state[c] * S + self.next_state[c]
        return np.bincount(flat, minlength=S * S).reshape(S, S)

    def complete_sojourns(self, r):
        return self.duration[(self.state == r) & self.complete]

    def censored_sojourns(self, r):
        return self.duration[(self.state == r) & ~self.complete]


# -- conjugate and random-walk parameter updates ------------------------------

def update_transition_probs(stats, prior, rng, allowed=None):
    """Row-wise Dirichlet draw of P over the permitted transitions."""
    S = stats.n_states
    counts = stats.transition_counts
    if allowed is None:
        allowed = ~np.eye(S, dtype=bool)
    allowed = np.asarray(allowed, bool)
    if np.any(counts[~allowed] > 0):
        raise ValueError("observed counts on a structurally forbidden transition")
    conc = prior.dirichlet_concentration
    P = np.zeros((S, S))
    for r in range(S):
        targets = np.flatnonzero(allowed[r])
        if targets.size == 0:
            continue
        if targets.size == 1:
            P[r, targets[0]] = 1.0
            continue
        P[r, targets] = rng.dirichlet(conc + counts[r, targets])
    return P


def _live_states(P_or_allowed):
    return np.flatnonzero(np.asarray(P_or_allowed).sum(axis=1) > 0)


def update_markov_rates(stats, prior, rng, live):
    """Gamma draw of the exit rates given total time at risk and exit counts."""
    gamma = np.zeros(stats.n_states)
    dur = stats.duration
    for r in live:
        mask = stats.state == r
        n = np.count_nonzero(mask & stats.complete)
        gamma[r] = rng.gamma(prior.eta_shape + n, 1.0 / (prior.eta_rate + dur[mask].sum()))
    return gamma


def update_weibull_rates(stats, alpha, prior, rng, live=None):
    """Conjugate Gamma draw of ``eta_r = gamma_r ** alpha_r``.

    Returns ``(eta, gamma)`` with ``gamma = eta ** (1 / alpha)``.
    """
    alpha = np.asarray(alpha, float)
    S = stats.n_states
    live = np.arange(S) if live is None else live
    eta = np.zeros(S)
    dur = stats.duration
    for r in live:
        mask = stats.state == r
        n = np.count_nonzero(mask & stats.complete)
        rate = prior.eta_rate + np.sum(dur[mask] ** alpha[r])
        eta[r] = rng.gamma(prior.eta_shape + n, 1.0 / rate)
    gamma = np.zeros(S)
    gamma[live] = eta[live] ** (1.0 / alpha[live])
    return eta, gamma


def weibull_shape_loglik(stats, r, alpha_r, eta_r):
    """Complete-data log likelihood in ``alpha_r`` at fixed ``eta_r`` (up to constants)."""
    mask = stats.state == r
    w = stats.duration[mask]
    comp = stats.complete[mask]
    n = np.count_nonzero(comp)
    return (n * np.log(alpha_r) + (alpha_r - 1.0) * np.log(w[comp]).sum()
            - eta_r * np.sum(w ** alpha_r))


def weibull_shape_log_accept(stats, r, alpha, alpha_new, eta_r, prior):
    """Log acceptance probability for ``alpha -> alpha_new`` (walk on log alpha)."""
    def lp(a):
        z = (np.log(a) - prior.log_alpha_mean) / prior.log_alpha_sd
        return weibull_shape_loglik(stats, r, a, eta_r) - 0.5 * z * z
    return lp(alpha_new) - lp(alpha)


def update_weibull_shapes(stats, alpha, eta, prior, step, rng, live=None):
    """Random-walk MH on each ``log alpha_r``.

    The prior is Normal on ``log alpha`` and the walk is symmetric on that
    scale, so no Jacobian term appears. ``step`` may be a scalar or one scale
    per state. Returns ``(alpha, accepted)``.
    """
    alpha = np.array(alpha, float)
    S = stats.n_states
    live = np.arange(S) if live is None else live
    steps = np.broadcast_to(np.asarray(step, float), (S,))
    accepted = np.zeros(S, dtype=bool)
    for r in live:
        z = rng.standard_normal()
        u = rng.random()
        if steps[r] == 0:
            accepted[r] = True
            continue
        a_new = alpha[r] * np.exp(steps[r] * z)
        if np.log(u) < weibull_shape_log_accept(stats, r, alpha[r], a_new, eta[r], prior):
            alpha[r] = a_new
            accepted[r] = True
    return alpha, accepted


def _gompertz_cumhaz(b0, b1, a, b):
    if abs(b1) < K.GOMPERTZ_SERIES_EPS:
        return np.exp(b0) * ((b - a) + b1 * (b * b - a * a) / 2.0)
    return np.exp(b0 + b1 * a) * np.expm1(b1 * (b - a)) / b1


def gompertz_loglik(stats, r, b0, b1):
    """Complete-data log likelihood of state r's exit-rate coefficients."""
    mask = stats.state == r
    a = stats.start[mask]
    b = stats.end[mask]
    comp = stats.complete[mask]
    return (np.count_nonzero(comp) * b0 + b1 * b[comp].sum()
            - _gompertz_cumhaz(b0, b1, a, b).sum())


def gompertz_log_accept(stats, r, old, new, prior):
    def lp(beta):
        z = (np.asarray(beta) - prior.beta_mean) / prior.beta_sd
        return gompertz_loglik(stats, r, beta[0], beta[1]) - 0.5 * np.dot(z, z)
    return lp(new) - lp(old)


def update_gompertz_params(stats, beta0, beta1, prior, step, rng, live=None):
    """Joint Gaussian random walk on ``(beta0_r, beta1_r)`` for each live state.

    ``stats`` may also be a sequence of :class:`Trajectory`. Returns
    ``(beta0, beta1, accepted)``.
    """
    beta0 = np.array(beta0, float)
    beta1 = np.array(beta1, float)
    if not isinstance(stats, SufficientStats):
        stats = SufficientStats.from_trajectories(stats, len(beta0))
    S = stats.n_states
    live = np.arange(S) if live is None else live
    steps = np.broadcast_to(np.asarray(step, float), (S,))
    accepted = np.zeros(S, dtype=bool)
    for r in live:
        z = rng.standard_normal(2)
        u = rng.random()
        if steps[r] == 0:
            accepted[r] = True
            continue
        old = np.array([beta0[r], beta1[r]])
        new = old + steps[r] * z
        if np.log(u) < gompertz_log_accept(stats, r, old, new, prior):
            beta0[r], beta1[r] = new
            accepted[r] = True
    return beta0, beta1, accepted


# -- proposals --------------------------------------------------------------------

def _t_star(policy, horizon):
    if policy == "midpoint":
        return horizon / 2.0
    return float(policy)


def build_proposal_rate_matrix(theta, t_star_policy="midpoint", horizon=None) -> RateMatrix:
    """Markov generator used to propose trajectories under ``theta``.

    Markov and Weibull models use ``gamma_r * P[r, s]``; the Gompertz model
    freezes its rates at ``t*``, by default the midpoint of ``[0, horizon]``.
    """
    if isinstance(theta, GompertzIMParams):
        if t_star_policy == "midpoint" and horizon is None:
            raise ValueError("midpoint policy needs the horizon")
        return build_rate_matrix(theta.P, theta.exit_rates(_t_star(t_star_policy, horizon)))
    live = theta.P.sum(axis=1) > 0
    return build_rate_matrix(theta.P, np.where(live, theta.gamma, 0.0))


def _uniformized_batch(P, rates, max_gap):
    """Generators, dominating rates and power stacks for several rate vectors."""
    Gs = rates[:, :, None] * P[None]
    S = P.shape[0]
    idx = np.arange(S)
    Gs[:, idx, idx] = -Gs.sum(axis=2)
    mus = rates.max(axis=1)
    Rs = np.eye(S)[None] + Gs / mus[:, None, None]
    Rs[(Rs < 0) & (Rs > -1e-15)] = 0.0
    ncap = int(max(K.series_cap(m * g) for m, g in zip(mus, max_gap)))
    return Gs, mus, K.matrix_powers_batch(Rs, ncap)


# -- parameter bookkeeping --------------------------------------------------------

def default_mask(n_states, absorbing):
    """All transitions out of non-absorbing states permitted."""
    m = ~np.eye(n_states, dtype=bool)
    m[list(absorbing)] = False
    return m


def parameter_names(model, allowed, labels=None):
    S = allowed.shape[0]
    labels = [str(i + 1) for i in range(S)] if labels is None else [str(x) for x in labels]
    live = _live_states(allowed)
    pairs = [(r, s) for r in range(S) for s in range(S) if allowed[r, s]]
    names = [f"p_{labels[r]}_{labels[s]}" for r, s in pairs]
    if model == "markov":
        names += [f"gamma_{labels[r]}" for r in live]
        names += [f"gamma_{labels[r]}_{labels[s]}" for r, s in pairs]
    elif model == "weibull-sm":
        names += [f"alpha_{labels[r]}" for r in live]
        names += [f"gamma_{labels[r]}" for r in live]
        names += [f"eta_{labels[r]}" for r in live]
        names += [f"gamma_{labels[r]}_{labels[s]}" for r, s in pairs]
    elif model == "gompertz-im":
        names += [f"beta0_{labels[r]}" for r in live]
        names += [f"beta1_{labels[r]}" for r in live]
    else:
        raise ValueError(f"unknown model kind {model!r}")
    return names


def parameter_vector(theta, allowed):
    rows, cols = np.nonzero(allowed)
    live = _live_states(allowed)
    parts = [theta.P[rows, cols]]
    if isinstance(theta, MarkovParams):
        parts += [theta.gamma[live], theta.gamma[rows] * theta.P[rows, cols]]
    elif isinstance(theta, WeibullSMParams):
        parts += [theta.alpha[live], theta.gamma[live], theta.eta[live],
                  theta.gamma[rows] * theta.P[rows, cols]]
    else:
        parts += [theta.beta0[live], theta.beta1[live]]
    return np.concatenate(parts)


def initial_params(model, allowed, mean_gap):
    """Starting point: uniform P over permitted moves, unit shapes, flat time trend."""
    allowed = np.asarray(allowed, bool)
    S = allowed.shape[0]
    P = allowed / np.maximum(allowed.sum(axis=1, keepdims=True), 1)
    live = allowed.any(axis=1)
    rate = 1.0 / mean_gap
    if model == "markov":
        return MarkovParams(P, np.where(live, rate, 0.0))
    if model == "weibull-sm":
        return WeibullSMParams(P, np.ones(S), np.where(live, rate, 0.0))
    if model == "gompertz-im":
        return GompertzIMParams(P, np.where(live, np.log(rate), 0.0), np.zeros(S))
    raise ValueError(f"unknown model kind {model!r}")


@dataclass
class PosteriorDraws:
    """Retained parameter draws plus per-sweep diagnostics.

    ``values[k]`` is the parameter vector of retained draw k, in the column
    order of ``names``; ``params[k]`` the matching parameter object.
    Per-sweep arrays cover all iterations including burn-in.
    """

    model: str
    names: list
    iterations: np.ndarray
    values: np.ndarray
    params: list
    param_blocks: list
    param_accept: np.ndarray
    trajectory_accept_rate: np.ndarray
    latent_jumps: np.ndarray
    failed_proposals: np.ndarray
    allowed: np.ndarray = None
    labels: list = None
    final_trajectories: list = field(default=None, repr=False)
    config: SamplerConfig = None

    def __len__(self):
        return self.values.shape[0]

    def column(self, name):
        return self.values[:, self.names.index(name)]

    def mean(self):
        return dict(zip(self.names, self.values.mean(axis=0)))


# -- the sampler ----------------------------------------------------------------

class _Block:
    """A fixed group of individuals with its own random stream."""

    def __init__(self, series, rng):
        self.series = series
        self.rng = rng
        self.obs_t = np.concatenate([p.times for p in series])
        self.obs_s = np.concatenate([p.states for p in series])
        self.obs_off = np.concatenate([[0], np.cumsum([len(p.times) for p in series])])
        self.exact = np.array([p.end_kind == "death_exact" for p in series])
        self.censored = np.array([p.end_kind == "censored" for p in series])
        self.T = np.array([p.end_time for p in series])
        self.traj = None

    def interval_slice(self, offset):
        n_int = len(self.obs_t) - len(self.series)
        return slice(offset, offset + n_int)


class _Sampler:
    def __init__(self, series, model, allowed, prior, config):
        self.model = model
        self.allowed = allowed
        self.prior = prior
        self.cfg = config
        self.S = allowed.shape[0]
        self.live = _live_states(allowed)
        self.n = len(series)
        root = np.random.SeedSequence(config.seed)
        param_ss, block_ss = root.spawn(2)
        self.rng = np.random.Generator(np.random.PCG64(param_ss))
        bs = config.block_size
        chunks = [series[i:i + bs] for i in range(0, self.n, bs)]
        self.blocks = [_Block(c, np.random.Generator(np.random.PCG64(ss)))
                       for c, ss in zip(chunks, block_ss.spawn(len(chunks)))]
        self._setup_intervals(series)
        self.pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None

    def _setup_intervals(self, series):
        # proposal time points per interval, flattened over all individuals
        gaps, tstars = [], []
        for p in series:
            g = np.diff(p.times)
            gaps.append(g)
            if self.model != "gompertz-im":
                tstars.append(np.zeros_like(g))
            elif self.cfg.piecewise_proposal:
                tstars.append((p.times[1:] + p.times[:-1]) / 2.0)
            else:
                tstars.append(np.full_like(g, _t_star(self.cfg.t_star, p.end_time)))
        gaps = np.concatenate(gaps)
        uniq, inv = np.unique(np.concatenate(tstars), return_inverse=True)
        self.tstar_unique = uniq
        self.chain_of_interval = inv.astype(np.int64)
        self.max_gap = np.zeros(len(uniq))
        np.maximum.at(self.max_gap, self.chain_of_interval, gaps)
        self.mean_gap = gaps.mean()
        off = 0
        for b in self.blocks:
            sl = b.interval_slice(off)
            b.chain_of_interval = np.ascontiguousarray(self.chain_of_interval[sl])
            off = sl.stop

    def proposal(self, theta):
        P = theta.P
        if isinstance(theta, GompertzIMParams):
            rates = np.exp(theta.beta0[None, :] + theta.beta1[None, :] * self.tstar_unique[:, None])
            rates[:, ~(P.sum(axis=1) > 0)] = 0.0
        else:
            live = P.sum(axis=1) > 0
            rates = np.where(live, theta.gamma, 0.0)[None, :]
        return _uniformized_batch(P, rates, self.max_gap)

    def _map_blocks(self, fn):
        if self.pool is None:
            return [fn(b) for b in self.blocks]
        return list(self.pool.map(fn, self.blocks))

    def initialize(self, theta):
        Gs, mus, powers = self.proposal(theta)

        def init(b):
            t, s, off, status = K.init_block(b.obs_t, b.obs_s, b.obs_off, b.exact,
                                             b.chain_of_interval, powers, Gs, mus, b.rng)
            return b, t, s, off, status

        for b, t, s, off, status in self._map_blocks(init):
            if status != K.OK:
                bad = b.series[int(off[-1])]
                raise SamplerError(f"could not draw an initial path for series {bad.id!r} "
                                   "(observations unreachable under the transition mask?)")
            b.traj = (t, s, off)

    def sweep(self, theta):
        Gs, mus, powers = self.proposal(theta)
        kind, P, a, b_ = theta.kernel_args()
        attempts = self.cfg.trajectory_attempts_per_sweep

        def run(b):
            t, s, off = b.traj
            return b, K.sweep_block(b.obs_t, b.obs_s, b.obs_off, b.exact, b.censored,
                                    b.chain_of_interval, powers, Gs, mus, t, s, off,
                                    kind, P, a, b_, attempts, b.rng)

        n_acc = n_fail = n_jumps = 0
        n_individual_fail = 0
        for b, (t, s, off, acc, fail, _) in self._map_blocks(run):
            if np.any(fail < 0):
                raise SamplerError("current latent path has zero density under the model")
            b.traj = (t, s, off)
            n_acc += acc.sum()
            n_fail += fail.sum()
            n_individual_fail += np.count_nonzero(fail)
            n_jumps += len(t)
        return n_acc / (self.n * attempts), n_fail, n_individual_fail, n_jumps

    def stats(self):
        parts = [K.sojourn_table(b.obs_s, b.obs_off, b.T, b.censored, *b.traj)
                 for b in self.blocks]
        return SufficientStats(self.S, *(np.concatenate(x) for x in zip(*parts)))

    def trajectories(self):
        out = []
        for b in self.blocks:
            t, s, off = b.traj
            for i, p in enumerate(b.series):
                out.append(Trajectory(int(p.states[0]), t[off[i]:off[i + 1]],
                                      s[off[i]:off[i + 1]], p.end_time,
                                      p.trajectory_end_kind))
        return out


def _validate_data(series, allowed):
    S = allowed.shape[0]
    absorbing = set(np.flatnonzero(~allowed.any(axis=1)).tolist())
    for p in series:
        if p.states.min() < 0 or p.states.max() >= S:
            raise ValueError(f"series {p.id!r} has a state outside 0..{S - 1}")
        if int(p.states[0]) in absorbing:
            raise ValueError(f"series {p.id!r} starts in an absorbing state")
        inner = p.states[:-1]
        if any(int(x) in absorbing for x in inner):
            raise ValueError(f"series {p.id!r} is observed after absorption")
        last_abs = int(p.states[-1]) in absorbing
        if p.end_kind == "censored" and last_abs:
            raise ValueError(f"series {p.id!r} ends absorbed but is flagged censored")
        if p.end_kind != "censored" and not last_abs:
            raise ValueError(f"series {p.id!r} is flagged as a death but its last state is not absorbing")


def _rm_update(log_step, accepted, j):
    return log_step + (accepted.astype(float) - TARGET_ACCEPT) / (j + 1.0) ** 0.6


def run_gibbs(data, model, prior=None, config=None, allowed=None, labels=None,
              initial=None, progress=None) -> PosteriorDraws:
    """Run the Metropolis-within-Gibbs sampler.

    Parameters
    ----------
    data : sequence of PanelSeries or PanelDataset
        Panel observations with 0-based states.
    model : {"markov", "weibull-sm", "gompertz-im"}
    prior, config : PriorSpec, SamplerConfig
    allowed : (S, S) bool array, optional
        Permitted transitions; rows without any are absorbing states.
        Defaults to the dataset's mask when ``data`` is a PanelDataset.
    initial : ModelParams, optional
        Starting parameters; defaults to :func:`initial_params`.
    progress : callable, optional
        Called as ``progress(iteration, theta)`` after every sweep.
    """
    if model not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {model!r}")
    prior = prior or PriorSpec()
    config = config or SamplerConfig()
    if allowed is None:
        if not hasattr(data, "mask"):
            raise ValueError("pass an `allowed` transition mask")
        allowed = data.mask
        labels = labels if labels is not None else getattr(data, "labels", None)
    series = list(getattr(data, "series", data))
    allowed = np.asarray(allowed, bool)
    if np.any(np.diag(allowed)):
        raise ValueError("self-transitions cannot be permitted")
    if not series:
        raise ValueError("no data")
    _validate_data(series, allowed)

    sampler = _Sampler(series, model, allowed, prior, config)
    theta = initial if initial is not None else initial_params(model, allowed, sampler.mean_gap)
    sampler.initialize(theta)

    names = parameter_names(model, allowed, labels)
    live = sampler.live
    rng = sampler.rng
    if model == "weibull-sm":
        blocks = [f"alpha_{r + 1 if labels is None else labels[r]}" for r in live]
        log_step = np.full(sampler.S, np.log(config.rw_step_log_alpha or 1.0))
        base_step = config.rw_step_log_alpha
    elif model == "gompertz-im":
        blocks = [f"beta_{r + 1 if labels is None else labels[r]}" for r in live]
        log_step = np.full(sampler.S, np.log(config.rw_step_beta or 1.0))
        base_step = config.rw_step_beta
    else:
        blocks, log_step, base_step = [], None, 0.0

    n_it = config.iterations
    param_accept = np.zeros((n_it, len(blocks)), dtype=bool)
    traj_rate = np.zeros(n_it)
    jumps = np.zeros(n_it, dtype=np.int64)
    failed = np.zeros(n_it, dtype=np.int64)
    kept_it, kept_vals, kept_params = [], [], []
    fail_run = 0

    for j in range(n_it):
        traj_rate[j], failed[j], n_ind_fail, jumps[j] = sampler.sweep(theta)
        if n_ind_fail > config.max_failure_fraction * sampler.n:
            fail_run += 1
            if fail_run >= config.max_failure_sweeps:
                raise SamplerError(
                    f"more than {config.max_failure_fraction:.0%} of individuals failed "
                    f"to draw a proposal for {fail_run} consecutive sweeps (sweep {j})")
        else:
            fail_run = 0
        stats = sampler.stats()
        steps = np.exp(log_step) if base_step > 0 else 0.0
        for _ in range(config.parameter_substeps):
            P = update_transition_probs(stats, prior, rng, allowed)
            if model == "markov":
                theta = MarkovParams(P, update_markov_rates(stats, prior, rng, live))
                acc = np.zeros(0, bool)
            elif model == "weibull-sm":
                eta, _ = update_weibull_rates(stats, theta.alpha, prior, rng, live)
                alpha, acc = update_weibull_shapes(stats, theta.alpha, eta, prior, steps, rng, live)
                theta = WeibullSMParams.from_eta(P, alpha, eta)
                acc = acc[live]
            else:
                b0, b1, acc = update_gompertz_params(stats, theta.beta0, theta.beta1,
                                                     prior, steps, rng, live)
                theta = GompertzIMParams(P, b0, b1)
                acc = acc[live]
        param_accept[j] = acc
        if config.adapt and j < config.burn_in and base_step > 0:
            log_step[live] = _rm_update(log_step[live], acc, j)
        if j >= config.burn_in and (j - config.burn_in + 1) % config.thinning == 0:
            kept_it.append(j)
            kept_vals.append(parameter_vector(theta, allowed))
            kept_params.append(theta)
        if progress is not None:
            progress(j, theta)

    if sampler.pool is not None:
        sampler.pool.shutdown()
    return PosteriorDraws(
        model=model, names=names, iterations=np.array(kept_it),
        values=np.array(kept_vals).reshape(len(kept_it), len(names)),
        params=kept_params, param_blocks=blocks, param_accept=param_accept,
        trajectory_accept_rate=traj_rate, latent_jumps=jumps, failed_proposals=failed,
        allowed=allowed, labels=labels, final_trajectories=sampler.trajectories(),
        config=config,
    )
