"""Compiled inner loops shared by the public samplers and the Gibbs engine.

Everything here works on plain arrays and a ``numpy.random.Generator`` so a
single implementation backs both the per-call API in :mod:`msmbayes.bridge`
and the per-sweep loop in :mod:`msmbayes.gibbs`. States are 0-based ints.

Status codes returned by the samplers:

    OK           draw succeeded
    UNREACHABLE  conditioning event has (numerically) zero probability
    CAP_REACHED  the Poisson series did not converge before the power cap
"""
import math

import numpy as np
from numba import njit

TAIL_TOL = 1e-12
MIN_PROB = 1e-300

OK = 0
UNREACHABLE = 1
CAP_REACHED = 2

MARKOV = 0
WEIBULL = 1
GOMPERTZ = 2

GOMPERTZ_SERIES_EPS = 1e-8


@njit(cache=True)
def series_cap(lam):
    """Hard cap on the number of uniformization terms for mean ``lam``."""
    return max(50, int(math.ceil(lam + 12.0 * math.sqrt(lam) + 20.0)))


@njit(cache=True)
def fill_powers(R, powers, start):
    # powers[start - 1] must already hold R^(start - 1)
    S = R.shape[0]
    for k in range(start, powers.shape[0]):
        for i in range(S):
            for j in range(S):
                acc = 0.0
                for m in range(S):
                    acc += powers[k - 1, i, m] * R[m, j]
                powers[k, i, j] = acc


@njit(cache=True)
def matrix_powers(R, K):
    S = R.shape[0]
    powers = np.empty((K + 1, S, S))
    for i in range(S):
        for j in range(S):
            powers[0, i, j] = 1.0 if i == j else 0.0
    if K >= 1:
        fill_powers(R, powers, 1)
    return powers


@njit(cache=True)
def poisson_terms(lam, nmax, out):
    """Poisson(lam) pmf into ``out[:n]``; returns n once the tail is below TAIL_TOL.

    Returns ``-1`` if ``nmax`` terms were not enough.
    """
    if lam <= 0.0:
        out[0] = 1.0
        return 1
    loglam = math.log(lam)
    logp = -lam
    for n in range(nmax):
        if n > 0:
            logp += loglam - math.log(n)
        p = math.exp(logp)
        out[n] = p
        if n + 1.0 > lam:
            q = lam / (n + 1.0)
            if p * q / (1.0 - q) < TAIL_TOL:
                return n + 1
    return -1


@njit(cache=True)
def poisson_tail_bound(lam, n):
    # bound on P(N >= n) for N ~ Poisson(lam), valid for n > lam
    if n <= lam:
        return 1.0
    logp = -lam + n * math.log(lam) - math.lgamma(n + 1.0)
    q = lam / (n + 1.0)
    return math.exp(logp) / (1.0 - q)


@njit(cache=True)
def series_transition(powers, lam):
    """exp(tG) from the uniformization series with ``lam = mu * t``.

    Returns ``(P, nterms)``; ``nterms == -1`` signals non-convergence.
    """
    S = powers.shape[1]
    w = np.empty(powers.shape[0])
    nterms = poisson_terms(lam, powers.shape[0], w)
    P = np.zeros((S, S))
    if nterms < 0:
        return P, -1
    for n in range(nterms):
        for i in range(S):
            for j in range(S):
                P[i, j] += w[n] * powers[n, i, j]
    return P, nterms


@njit(cache=True)
def draw_jump_count(powers, lam, r, s, rng):
    """Number of uniformized (real + virtual) jumps on an interval given endpoints.

    Returns ``(n, status)``.
    """
    w = np.empty(powers.shape[0])
    nterms = poisson_terms(lam, powers.shape[0], w)
    if nterms < 0:
        return -1, CAP_REACHED
    total = 0.0
    for n in range(nterms):
        w[n] *= powers[n, r, s]
        total += w[n]
    if total < MIN_PROB:
        return -1, UNREACHABLE
    target = rng.random() * total
    acc = 0.0
    for n in range(nterms):
        acc += w[n]
        if acc > target:
            return n, OK
    for n in range(nterms - 1, -1, -1):
        if w[n] > 0.0:
            return n, OK
    return -1, UNREACHABLE


@njit(cache=True)
def _draw_weighted(weights, rng):
    total = 0.0
    for a in range(weights.shape[0]):
        total += weights[a]
    target = rng.random() * total
    acc = 0.0
    last = -1
    for a in range(weights.shape[0]):
        if weights[a] > 0.0:
            acc += weights[a]
            last = a
            if acc > target:
                return a
    return last


@njit(cache=True)
def _uniform_order_stats(u, v, n, rng):
    # sorted draws strictly inside (u, v); redrawn on floating-point ties
    times = np.empty(n)
    while True:
        for i in range(n):
            times[i] = u + (v - u) * rng.random()
        times.sort()
        good = True
        prev = u
        for i in range(n):
            if not times[i] > prev:
                good = False
                break
            prev = times[i]
        if good and (n == 0 or times[n - 1] < v):
            return times


@njit(cache=True)
def bridge(powers, lam, u, v, r, s, rng):
    """Endpoint-conditioned path on [u, v] from r to s.

    Returns ``(jump_times, jump_states, status)`` with virtual jumps removed.
    """
    n, status = draw_jump_count(powers, lam, r, s, rng)
    if status != OK:
        return np.empty(0), np.empty(0, dtype=np.int64), status
    S = powers.shape[1]
    seq = np.empty(n + 1, dtype=np.int64)
    seq[0] = r
    weights = np.empty(S)
    for i in range(1, n):
        prev = seq[i - 1]
        rem = n - i
        for a in range(S):
            weights[a] = powers[1, prev, a] * powers[rem, a, s]
        seq[i] = _draw_weighted(weights, rng)
    if n >= 1:
        seq[n] = s
    times = _uniform_order_stats(u, v, n, rng)
    n_real = 0
    for i in range(1, n + 1):
        if seq[i] != seq[i - 1]:
            n_real += 1
    out_t = np.empty(n_real)
    out_s = np.empty(n_real, dtype=np.int64)
    k = 0
    for i in range(1, n + 1):
        if seq[i] != seq[i - 1]:
            out_t[k] = times[i - 1]
            out_s[k] = seq[i]
            k += 1
    return out_t, out_s, OK


@njit(cache=True)
def last_state_weights(powers, G, lam, r, absorbing):
    """Unnormalized law of the state occupied just before absorption at v."""
    S = powers.shape[1]
    w = np.empty(powers.shape[0])
    weights = np.zeros(S)
    nterms = poisson_terms(lam, powers.shape[0], w)
    if nterms < 0:
        return weights, CAP_REACHED
    for a in range(S):
        if a == absorbing or G[a, absorbing] <= 0.0:
            continue
        p = 0.0
        for n in range(nterms):
            p += w[n] * powers[n, r, a]
        weights[a] = p * G[a, absorbing]
    total = 0.0
    for a in range(S):
        total += weights[a]
    if total < MIN_PROB:
        return weights, UNREACHABLE
    return weights, OK


@njit(cache=True)
def bridge_to_absorption(powers, G, lam, u, v, r, absorbing, rng):
    """Path on [u, v] from r that enters ``absorbing`` exactly at v."""
    weights, status = last_state_weights(powers, G, lam, r, absorbing)
    if status != OK:
        return np.empty(0), np.empty(0, dtype=np.int64), status
    last = _draw_weighted(weights, rng)
    t, s, status = bridge(powers, lam, u, v, r, last, rng)
    if status != OK:
        return t, s, status
    n = t.shape[0]
    out_t = np.empty(n + 1)
    out_s = np.empty(n + 1, dtype=np.int64)
    out_t[:n] = t
    out_s[:n] = s
    out_t[n] = v
    out_s[n] = absorbing
    return out_t, out_s, OK


@njit(cache=True)
def propose_path(obs_t, obs_s, exact_death, chain_of_interval, powers_all,
                 Gs, mus, rng):
    """Concatenate per-interval bridges through every panel observation."""
    m = obs_t.shape[0] - 1
    cap = 0
    for i in range(m):
        cap += powers_all.shape[1] + 1
    buf_t = np.empty(cap)
    buf_s = np.empty(cap, dtype=np.int64)
    k = 0
    for i in range(m):
        c = chain_of_interval[i]
        u = obs_t[i]
        v = obs_t[i + 1]
        lam = mus[c] * (v - u)
        if exact_death and i == m - 1:
            t, s, status = bridge_to_absorption(
                powers_all[c], Gs[c], lam, u, v, obs_s[i], obs_s[i + 1], rng)
        else:
            t, s, status = bridge(powers_all[c], lam, u, v, obs_s[i],
                                  obs_s[i + 1], rng)
        if status != OK:
            return np.empty(0), np.empty(0, dtype=np.int64), status
        for j in range(t.shape[0]):
            buf_t[k] = t[j]
            buf_s[k] = s[j]
            k += 1
    return buf_t[:k].copy(), buf_s[:k].copy(), OK


@njit(cache=True)
def gompertz_cumhaz(b0, b1, a, b):
    """Integral of exp(b0 + b1 t) over [a, b]."""
    if abs(b1) < GOMPERTZ_SERIES_EPS:
        return math.exp(b0) * ((b - a) + b1 * (b * b - a * a) / 2.0)
    return math.exp(b0 + b1 * a) * math.expm1(b1 * (b - a)) / b1


@njit(cache=True)
def log_density(kind, s0, times, states, T, censored, P, a, b):
    """Complete-trajectory log density for the three model classes.

    ``a``/``b`` are (gamma, unused), (alpha, eta) or (beta0, beta1).
    """
    lp = 0.0
    cur = s0
    prev_t = 0.0
    for i in range(times.shape[0]):
        z = times[i]
        nxt = states[i]
        p = P[cur, nxt]
        if p <= 0.0:
            return -np.inf
        w = z - prev_t
        if kind == MARKOV:
            if a[cur] <= 0.0:
                return -np.inf
            lp += math.log(p) + math.log(a[cur]) - a[cur] * w
        elif kind == WEIBULL:
            al = a[cur]
            et = b[cur]
            if et <= 0.0:
                return -np.inf
            lp += (math.log(p) + math.log(al) + math.log(et)
                   + (al - 1.0) * math.log(w) - et * w ** al)
        else:
            lp += (math.log(p) + a[cur] + b[cur] * z
                   - gompertz_cumhaz(a[cur], b[cur], prev_t, z))
        cur = nxt
        prev_t = z
    if censored:
        w = T - prev_t
        if kind == MARKOV:
            lp -= a[cur] * w
        elif kind == WEIBULL:
            lp -= b[cur] * w ** a[cur]
        else:
            lp -= gompertz_cumhaz(a[cur], b[cur], prev_t, T)
    return lp


@njit(cache=True)
def log_density_piecewise(s0, times, states, T, censored, breaks,
                          chain_of_piece, Gs):
    """Markov log density with a piecewise-constant generator.

    Piece k covers ``(breaks[k], breaks[k + 1]]`` and uses
    ``Gs[chain_of_piece[k]]``. A single piece gives the homogeneous case.
    """
    lp = 0.0
    cur = s0
    t = 0.0
    k = 0
    last_piece = breaks.shape[0] - 2
    for i in range(times.shape[0]):
        z = times[i]
        while k < last_piece and breaks[k + 1] < z:
            g = Gs[chain_of_piece[k]]
            lp += g[cur, cur] * (breaks[k + 1] - t)
            t = breaks[k + 1]
            k += 1
        g = Gs[chain_of_piece[k]]
        rate = g[cur, states[i]]
        if rate <= 0.0:
            return -np.inf
        lp += g[cur, cur] * (z - t) + math.log(rate)
        t = z
        cur = states[i]
    if censored:
        while k < last_piece:
            g = Gs[chain_of_piece[k]]
            lp += g[cur, cur] * (breaks[k + 1] - t)
            t = breaks[k + 1]
            k += 1
        lp += Gs[chain_of_piece[k]][cur, cur] * (T - t)
    return lp


@njit(cache=True)
def mh_attempts(obs_t, obs_s, exact_death, censored, chain_of_interval,
                powers_all, Gs, mus, cur_t, cur_s, kind, P, a, b, attempts,
                rng):
    """``attempts`` MH updates of one latent path under a Markov-bridge proposal.

    Returns ``(times, states, log_ratio, n_accepted, n_failed)`` where
    ``log_ratio`` is log target minus log proposal of the returned path.
    """
    s0 = obs_s[0]
    T = obs_t[obs_t.shape[0] - 1]
    cur_ratio = (log_density(kind, s0, cur_t, cur_s, T, censored, P, a, b)
                 - log_density_piecewise(s0, cur_t, cur_s, T, censored, obs_t,
                                         chain_of_interval, Gs))
    if not np.isfinite(cur_ratio):
        return cur_t, cur_s, cur_ratio, 0, -1
    n_acc = 0
    n_fail = 0
    for _ in range(attempts):
        prop_t, prop_s, status = propose_path(obs_t, obs_s, exact_death,
                                              chain_of_interval, powers_all,
                                              Gs, mus, rng)
        if status != OK:
            n_fail += 1
            continue
        lt = log_density(kind, s0, prop_t, prop_s, T, censored, P, a, b)
        lq = log_density_piecewise(s0, prop_t, prop_s, T, censored, obs_t,
                                   chain_of_interval, Gs)
        omega = rng.random()
        if lt == -np.inf:
            continue
        new_ratio = lt - lq
        if math.log(omega) < new_ratio - cur_ratio:
            cur_t = prop_t
            cur_s = prop_s
            cur_ratio = new_ratio
            n_acc += 1
    return cur_t, cur_s, cur_ratio, n_acc, n_fail


@njit(cache=True)
def simulate_path(kind, s0, T, P, a, b, rng):
    """Unconditional forward simulation on [0, T].

    Absorbing states are rows of ``P`` that sum to zero. Returns
    ``(times, states, absorbed)``.
    """
    S = P.shape[0]
    cap = 16
    buf_t = np.empty(cap)
    buf_s = np.empty(cap, dtype=np.int64)
    k = 0
    cur = s0
    t = 0.0
    while True:
        row = 0.0
        for j in range(S):
            row += P[cur, j]
        if row <= 0.0:
            return buf_t[:k].copy(), buf_s[:k].copy(), True
        e = rng.standard_exponential()
        if kind == MARKOV:
            if a[cur] <= 0.0:
                break
            t_next = t + e / a[cur]
        elif kind == WEIBULL:
            t_next = t + (e / b[cur]) ** (1.0 / a[cur])
        else:
            b0 = a[cur]
            b1 = b[cur]
            if abs(b1) < GOMPERTZ_SERIES_EPS:
                t_next = t + e * math.exp(-b0)
            else:
                arg = math.exp(b1 * t) + b1 * e * math.exp(-b0)
                if arg <= 0.0:
                    break
                t_next = math.log(arg) / b1
        if t_next > T:
            break
        nxt = _draw_weighted(P[cur], rng)
        if k == cap:
            cap *= 2
            new_t = np.empty(cap)
            new_s = np.empty(cap, dtype=np.int64)
            new_t[:k] = buf_t[:k]
            new_s[:k] = buf_s[:k]
            buf_t = new_t
            buf_s = new_s
        buf_t[k] = t_next
        buf_s[k] = nxt
        k += 1
        t = t_next
        cur = nxt
    return buf_t[:k].copy(), buf_s[:k].copy(), False


@njit(cache=True)
def absorption_times(kind, s0, T, P, a, b, n, rng):
    """Entry times into any absorbing state for ``n`` forward paths (inf if none)."""
    out = np.empty(n)
    for i in range(n):
        t, s, absorbed = simulate_path(kind, s0, T, P, a, b, rng)
        out[i] = t[t.shape[0] - 1] if absorbed and t.shape[0] > 0 else np.inf
    return out


@njit(cache=True)
def matrix_powers_batch(Rs, K):
    C, S, _ = Rs.shape
    out = np.empty((C, K + 1, S, S))
    for c in range(C):
        out[c] = matrix_powers(Rs[c], K)
    return out


@njit(cache=True)
def _push(buf_t, buf_s, k, t, s):
    # append arrays at position k, growing the buffers if needed
    need = k + t.shape[0]
    if need > buf_t.shape[0]:
        size = max(need, 2 * buf_t.shape[0])
        new_t = np.empty(size)
        new_s = np.empty(size, dtype=np.int64)
        new_t[:k] = buf_t[:k]
        new_s[:k] = buf_s[:k]
        buf_t = new_t
        buf_s = new_s
    buf_t[k:need] = t
    buf_s[k:need] = s
    return buf_t, buf_s, need


@njit(cache=True, nogil=True)
def init_block(obs_t, obs_s, obs_off, exact, chain_of_interval, powers_all, Gs,
               mus, rng):
    """Initial latent paths for a block of individuals (proposal draws only).

    Returns ``(traj_t, traj_s, traj_off, status)``; on failure ``status`` is
    nonzero and ``traj_off[-1]`` holds the failing individual.
    """
    n = obs_off.shape[0] - 1
    buf_t = np.empty(16 * n + 16)
    buf_s = np.empty(16 * n + 16, dtype=np.int64)
    off = np.zeros(n + 1, dtype=np.int64)
    k = 0
    for i in range(n):
        lo = obs_off[i]
        hi = obs_off[i + 1]
        t, s, status = propose_path(obs_t[lo:hi].copy(), obs_s[lo:hi].copy(), exact[i],
                                    chain_of_interval[lo - i:hi - i - 1].copy(),
                                    powers_all, Gs, mus, rng)
        if status != OK:
            off[n] = i
            return buf_t[:0].copy(), buf_s[:0].copy(), off, status
        buf_t, buf_s, k = _push(buf_t, buf_s, k, t, s)
        off[i + 1] = k
    return buf_t[:k].copy(), buf_s[:k].copy(), off, OK


@njit(cache=True, nogil=True)
def sweep_block(obs_t, obs_s, obs_off, exact, censored, chain_of_interval,
                powers_all, Gs, mus, traj_t, traj_s, traj_off, kind, P, a, b,
                attempts, rng):
    """MH-update every latent path in a block; individuals share ``rng`` in order.

    Returns ``(traj_t, traj_s, traj_off, n_accepted, n_failed, log_ratio)``
    with per-individual counts. ``n_failed[i] == -1`` flags a current path
    with zero model density.
    """
    n = obs_off.shape[0] - 1
    buf_t = np.empty(traj_t.shape[0] + 16 * n + 16)
    buf_s = np.empty(traj_t.shape[0] + 16 * n + 16, dtype=np.int64)
    off = np.zeros(n + 1, dtype=np.int64)
    n_acc = np.zeros(n, dtype=np.int64)
    n_fail = np.zeros(n, dtype=np.int64)
    ratio = np.empty(n)
    k = 0
    for i in range(n):
        lo = obs_off[i]
        hi = obs_off[i + 1]
        t, s, r, na, nf = mh_attempts(
            obs_t[lo:hi].copy(), obs_s[lo:hi].copy(), exact[i], censored[i],
            chain_of_interval[lo - i:hi - i - 1].copy(), powers_all, Gs, mus,
            traj_t[traj_off[i]:traj_off[i + 1]].copy(),
            traj_s[traj_off[i]:traj_off[i + 1]].copy(),
            kind, P, a, b, attempts, rng)
        n_acc[i] = na
        n_fail[i] = nf
        ratio[i] = r
        buf_t, buf_s, k = _push(buf_t, buf_s, k, t, s)
        off[i + 1] = k
    return buf_t[:k].copy(), buf_s[:k].copy(), off, n_acc, n_fail, ratio


@njit(cache=True)
def sojourn_table(obs_s, obs_off, T, censored, traj_t, traj_s, traj_off):
    """One row per sojourn: (state, entry time, exit time, complete, next state).

    Censored final sojourns have ``complete == False`` and next state -1;
    time spent in an absorbing state is not a sojourn.
    """
    n = obs_off.shape[0] - 1
    total = traj_t.shape[0] + n
    st = np.empty(total, dtype=np.int64)
    start = np.empty(total)
    end = np.empty(total)
    comp = np.empty(total, dtype=np.bool_)
    nxt = np.empty(total, dtype=np.int64)
    k = 0
    for i in range(n):
        cur = obs_s[obs_off[i]]
        prev = 0.0
        for j in range(traj_off[i], traj_off[i + 1]):
            st[k] = cur
            start[k] = prev
            end[k] = traj_t[j]
            comp[k] = True
            nxt[k] = traj_s[j]
            k += 1
            cur = traj_s[j]
            prev = traj_t[j]
        if censored[i]:
            st[k] = cur
            start[k] = prev
            end[k] = T[i]
            comp[k] = False
            nxt[k] = -1
            k += 1
    return st[:k].copy(), start[:k].copy(), end[:k].copy(), comp[:k].copy(), nxt[:k].copy()
