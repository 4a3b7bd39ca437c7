"""Rate matrices, uniformization and transition probabilities for homogeneous chains."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K

__all__ = [
    "ConvergenceError",
    "RateMatrix",
    "UniformizedChain",
    "build_rate_matrix",
    "check_transition_matrix",
    "transition_probability",
    "uniformize",
]

ROW_TOL = 1e-9
ROUND_TOL = 1e-12


class ConvergenceError(ArithmeticError):
    """Uniformization series did not reach the tail tolerance before the cap."""

    def __init__(self, message, tail_bound):
        super().__init__(message)
        self.tail_bound = tail_bound


def check_transition_matrix(P):
    """Validate an embedded-chain matrix and return it as a float array.

    Rows must be nonnegative with a zero diagonal and sum to one, except
    absorbing rows which are all zero.
    """
    P = np.array(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError(f"transition matrix must be square, got shape {P.shape}")
    if P.shape[0] < 2:
        raise ValueError("need at least two states")
    if np.any(P < 0):
        raise ValueError("transition probabilities must be nonnegative")
    if np.any(np.diag(P) != 0):
        raise ValueError("transition matrix must have a zero diagonal")
    sums = P.sum(axis=1)
    bad = (np.abs(sums - 1.0) > ROW_TOL) & (sums != 0.0)
    if np.any(bad):
        r = int(np.flatnonzero(bad)[0])
        raise ValueError(f"row {r} of the transition matrix sums to {sums[r]!r}")
    return P


@dataclass(frozen=True)
class RateMatrix:
    """Generator of a homogeneous chain; the diagonal is the negated row sum."""

    matrix: np.ndarray

    def __post_init__(self):
        G = np.array(self.matrix, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] < 2:
            raise ValueError(f"rate matrix must be square with S >= 2, got {G.shape}")
        off = G - np.diag(np.diag(G))
        if np.any(off < 0):
            raise ValueError("off-diagonal rates must be nonnegative")
        np.fill_diagonal(off, -off.sum(axis=1))
        off.setflags(write=False)
        object.__setattr__(self, "matrix", off)

    @property
    def size(self):
        return self.matrix.shape[0]

    @property
    def exit_rates(self):
        return -np.diag(self.matrix)

    @property
    def absorbing(self):
        return frozenset(np.flatnonzero(self.exit_rates == 0).tolist())


def build_rate_matrix(P, exit_rates):
    """Generator with off-diagonal entries ``exit_rates[r] * P[r, s]``.

    >>> build_rate_matrix([[0, 1], [1, 0]], [1, 2]).matrix
    array([[-1.,  1.],
           [ 2., -2.]])
    """
    P = check_transition_matrix(P)
    rates = np.asarray(exit_rates, dtype=float)
    if rates.shape != (P.shape[0],):
        raise ValueError("need one exit rate per state")
    if np.any(rates < 0) or not np.all(np.isfinite(rates)):
        raise ValueError("exit rates must be finite and nonnegative")
    return RateMatrix(rates[:, None] * P)


@dataclass
class UniformizedChain:
    """Dominating rate ``mu`` and the jump chain ``R = I + G / mu``.

    Matrix powers of ``R`` are cached and grown on demand; growth happens
    under a lock so one chain can serve several threads.
    """

    generator: RateMatrix
    mu: float
    R: np.ndarray
    _powers: np.ndarray = field(repr=False, default=None)
    _lock: threading.Lock = field(repr=False, default_factory=threading.Lock)

    def __post_init__(self):
        if self._powers is None:
            self._powers = K.matrix_powers(self.R, 16)

    @property
    def power_cache(self):
        return self._powers

    def powers(self, k):
        """Array holding at least ``R^0 .. R^k``."""
        p = self._powers
        if p.shape[0] > k:
            return p
        with self._lock:
            p = self._powers
            if p.shape[0] <= k:
                size = max(k + 1, 2 * p.shape[0])
                grown = np.empty((size,) + p.shape[1:])
                grown[: p.shape[0]] = p
                K.fill_powers(self.R, grown, p.shape[0])
                self._powers = grown
                p = grown
        return p

    def cap(self, duration):
        return K.series_cap(self.mu * duration)

    def powers_for(self, duration):
        """Powers up to the series cap for an interval of the given length."""
        n = self.cap(duration)
        return self.powers(n)[: n + 1]


def uniformize(G):
    """Uniformized representation of a generator.

    >>> ch = uniformize(RateMatrix([[-1.0, 1.0], [2.0, -2.0]]))
    >>> ch.mu, ch.R.tolist()
    (2.0, [[0.5, 0.5], [1.0, 0.0]])
    """
    if not isinstance(G, RateMatrix):
        G = RateMatrix(G)
    rates = G.exit_rates
    mu = float(rates.max())
    if not mu > 0:
        raise ValueError("generator has no dynamics (all exit rates are zero)")
    R = np.eye(G.size) + G.matrix / mu
    R[(R < 0) & (R > -1e-15)] = 0.0
    if np.any(R < 0):
        raise ValueError("uniformized matrix has negative entries")
    R = _renormalize(R)
    return UniformizedChain(G, mu, R)


def _renormalize(M):
    err = np.abs(M.sum(axis=1) - 1.0)
    if np.any(err > ROW_TOL):
        raise ValueError(f"row sums deviate from one by up to {err.max():.3g}")
    rows = err > ROUND_TOL
    if np.any(rows):
        M = M.copy()
        M[rows] /= M[rows].sum(axis=1, keepdims=True)
    return M


def transition_probability(G, t, chain=None):
    """exp(tG) evaluated by the uniformization series.

    The series is truncated once the Poisson tail mass is below 1e-12 and
    fails with :class:`ConvergenceError` if that needs more than
    ``max(50, ceil(mu t + 12 sqrt(mu t) + 20))`` terms.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if not isinstance(G, RateMatrix):
        G = RateMatrix(G)
    if t == 0:
        return np.eye(G.size)
    if chain is None:
        if not np.any(G.exit_rates > 0):
            return np.eye(G.size)
        chain = uniformize(G)
    lam = chain.mu * t
    n = chain.cap(t)
    P, nterms = K.series_transition(chain.powers(n)[: n + 1], lam)
    if nterms < 0:
        raise ConvergenceError(
            f"uniformization series for mu*t={lam:.6g} did not converge in {n} terms",
            K.poisson_tail_bound(lam, n + 1),
        )
    P[(P < 0) & (P > -ROUND_TOL)] = 0.0
    return _renormalize(P)

