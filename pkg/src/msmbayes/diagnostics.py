"""Posterior summaries, effective sample sizes and predictive death-time curves."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K

__all__ = [
    "PredictiveCurve",
    "SummaryRow",
    "effective_sample_size",
    "posterior_summary",
    "predictive_death_distribution",
]

MIN_ESS_DRAWS = 100


@dataclass(frozen=True)
class SummaryRow:
    parameter: str
    mean: float
    sd: float
    q025: float
    q975: float


def _columns(draws, names=None):
    if hasattr(draws, "values") and hasattr(draws, "names"):
        return np.asarray(draws.values, float), list(draws.names)
    x = np.asarray(draws, float)
    if x.ndim == 1:
        x = x[:, None]
    if names is None:
        names = [f"x{j}" for j in range(x.shape[1])]
    return x, list(names)


def posterior_summary(draws, names=None):
    """Mean, SD and 2.5% / 97.5% quantiles per parameter.

    Quantiles use linear interpolation between order statistics (the
    ``numpy`` default). ``draws`` is a :class:`PosteriorDraws` or an array
    of shape (n_draws, n_params).

    >>> [r.q025 for r in posterior_summary(np.arange(1.0, 101.0))]
    [3.475]
    """
    x, names = _columns(draws, names)
    if x.shape[0] == 0:
        raise ValueError("no draws to summarize")
    sd = x.std(axis=0, ddof=1) if x.shape[0] > 1 else np.zeros(x.shape[1])
    q = np.quantile(x, [0.025, 0.975], axis=0)
    return [SummaryRow(n, float(m), float(s), float(a), float(b))
            for n, m, s, a, b in zip(names, x.mean(axis=0), sd, q[0], q[1])]


def _autocorrelation(x):
    n = x.shape[0]
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    return acov / acov[0]


def effective_sample_size(draws, parameter=None):
    """Effective sample size by Geyer's initial monotone sequence estimator.

    Sums of adjacent autocorrelation pairs are truncated at the first
    non-positive pair and forced to be nonincreasing. The result is floored
    at 1, which is what a constant chain returns.
    """
    if hasattr(draws, "column"):
        x = draws.column(parameter)
    else:
        x = np.asarray(draws, float)
        if x.ndim == 2:
            x = x[:, parameter if parameter is not None else 0]
    n = x.shape[0]
    if n < MIN_ESS_DRAWS:
        raise ValueError(f"need at least {MIN_ESS_DRAWS} draws, got {n}")
    if not np.ptp(x) > 0:
        return 1.0
    rho = _autocorrelation(x)
    m = (n - 1) // 2
    pairs = rho[0:2 * m:2] + rho[1:2 * m:2]
    stop = np.flatnonzero(pairs <= 0)
    pairs = pairs[: stop[0]] if stop.size else pairs
    pairs = np.minimum.accumulate(pairs)
    tau = -1.0 + 2.0 * pairs.sum()
    return float(max(1.0, n / tau)) if tau > 0 else float(n)


@dataclass(frozen=True)
class PredictiveCurve:
    """Mixture CDF of the death time on ``grid`` plus a histogram density.

    ``bin_edges`` has one more entry than ``density``; ``n_simulated`` is the
    total number of forward paths and ``n_absorbed`` how many died by the
    last grid point.
    """

    grid: np.ndarray
    cdf: np.ndarray
    bin_edges: np.ndarray
    density: np.ndarray
    n_simulated: int
    n_absorbed: int

    def cdf_standard_error(self):
        return np.sqrt(self.cdf * (1.0 - self.cdf) / self.n_simulated)


def predictive_death_distribution(draws, initial_state, grid, rng, n_simulations=100_000,
                                  bin_width=None):
    """Posterior predictive distribution of the time of absorption.

    For every retained parameter draw, forward paths start in
    ``initial_state`` at time 0 and run to the last grid point; absorption
    times are pooled over draws with equal weight per draw.

    Parameters
    ----------
    draws : PosteriorDraws or sequence of parameter objects
    grid : increasing array of times, starting at or above 0
    n_simulations : total forward paths, split evenly over draws
    bin_width : histogram width, default ``grid`` spacing
    """
    params = list(getattr(draws, "params", draws))
    if not params:
        raise ValueError("no parameter draws")
    if not params[0].absorbing:
        raise ValueError("model has no absorbing state")
    grid = np.asarray(grid, float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise ValueError("grid must be increasing and nonnegative with at least two points")
    horizon = float(grid[-1])
    per = max(1, -(-int(n_simulations) // len(params)))
    times = np.empty(per * len(params))
    for k, theta in enumerate(params):
        kind, P, a, b = theta.kernel_args()
        times[k * per:(k + 1) * per] = K.absorption_times(
            kind, int(initial_state), horizon, P, a, b, per, rng)
    times.sort()
    cdf = np.searchsorted(times, grid, side="right") / times.size
    width = float(np.diff(grid).min()) if bin_width is None else float(bin_width)
    edges = np.arange(0.0, horizon + width, width)
    edges = edges[edges <= horizon + 1e-12 * horizon]
    if edges[-1] < horizon:
        edges = np.append(edges, horizon)
    counts, _ = np.histogram(times[np.isfinite(times)], bins=edges)
    density = counts / (times.size * np.diff(edges))
    return PredictiveCurve(grid, cdf, edges, density, int(times.size),
                           int(np.count_nonzero(times <= horizon)))
