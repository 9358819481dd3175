"""Event-driven simulation core (numba-compiled).

The microscopic network is simulated exactly by thinning.  Each neuron i
carries a frozen dominating rate valid until its current next jumps: the
current only decays between incoming spikes, the rate function is
nondecreasing in the current, and the drive envelope never rises.  Proposals
arrive at the summed dominating rate held in a Fenwick tree (log-time
selection and update), the proposed neuron's true rate decides acceptance,
and acceptance pushes weight w onto every out-neighbor, whose bounds are
refreshed.  Dense spikes (out-degree above n/4) batch the bound refresh into
a full-tree rebuild.

Drive handling: a nonincreasing drive lets bounds freeze F at the current
drive value.  Otherwise the frozen part uses the asymptotic drive profile
and a uniform additive envelope lip * delta(t) is carried outside the tree,
shrinking as the drive relaxes.

Status codes returned by the loops:
0 ran to t_end, 1 extinct (total rate hit zero), 2 blow-up guard tripped,
3 spike budget reached, 4 domination breach (a true rate exceeded its
dominating value, which indicates a broken invariant upstream).
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL_X = 0.5 * (_GL_X + 1.0)      # nodes mapped to [0, 1]
_GL_W = 0.5 * _GL_W

STATUS_OK = 0
STATUS_EXTINCT = 1
STATUS_BLOWUP = 2
STATUS_SPIKE_BUDGET = 3
STATUS_BREACH = 4


# ---------------------------------------------------------------------------
# Fenwick tree over per-neuron bounds (1-indexed internal array)


@njit(cache=True, nogil=True, inline="always")
def _fen_build(tree, vals, n):
    for i in range(n + 1):
        tree[i] = 0.0
    for i in range(1, n + 1):
        tree[i] += vals[i - 1]
        j = i + (i & (-i))
        if j <= n:
            tree[j] += tree[i]


@njit(cache=True, nogil=True, inline="always")
def _fen_update(tree, n, idx, delta):
    pos = idx + 1
    while pos <= n:
        tree[pos] += delta
        pos += pos & (-pos)


@njit(cache=True, nogil=True, inline="always")
def _fen_total(tree, n):
    s = 0.0
    pos = n
    while pos > 0:
        s += tree[pos]
        pos -= pos & (-pos)
    return s


@njit(cache=True, nogil=True, inline="always")
def _fen_find(tree, n, u, top_bit):
    # smallest index whose prefix sum exceeds u
    pos = 0
    bit = top_bit
    rem = u
    while bit > 0:
        nxt = pos + bit
        if nxt <= n and tree[nxt] <= rem:
            rem -= tree[nxt]
            pos = nxt
        bit >>= 1
    if pos >= n:
        pos = n - 1
    return pos


@njit(cache=True, nogil=True, inline="always")
def _top_bit(n):
    bit = 1
    while (bit << 1) <= n:
        bit <<= 1
    return bit


# ---------------------------------------------------------------------------
# rate function and compensator pieces


@njit(cache=True, nogil=True, inline="always")
def _rate(fcode, f0, f1, f2, x, eta):
    if fcode == 0:
        return f0 + eta + x
    elif fcode == 1:
        return f0 / (1.0 + math.exp(-f1 * (x + eta - f2)))
    return f0


@njit(cache=True, nogil=True, inline="always")
def _eta_at(t, i, eta_inf, eta_diff, beta, stationary):
    if stationary:
        return eta_inf[i]
    return eta_inf[i] + math.exp(-beta * t) * eta_diff[i]


@njit(cache=True, nogil=True)
def _comp_piece(fcode, f0, f1, f2, alpha, x, i, t0, t1,
                eta_inf, eta_diff, beta, stationary, gl_x, gl_w):
    """Integral of the true rate over [t0, t1] while the current decays
    freely from x (valid between incoming spikes)."""
    dt = t1 - t0
    if dt <= 0.0:
        return 0.0
    if fcode == 2:
        return f0 * dt
    if fcode == 0:
        if stationary:
            eta_int = eta_inf[i] * dt
        elif beta > 0.0:
            eta_int = eta_inf[i] * dt + eta_diff[i] * (
                math.exp(-beta * t0) - math.exp(-beta * t1)) / beta
        else:
            eta_int = (eta_inf[i] + eta_diff[i]) * dt
        return f0 * dt + eta_int + x * (1.0 - math.exp(-alpha * dt)) / alpha
    # sigmoid: fixed-order Gauss-Legendre on the interval
    acc = 0.0
    for r in range(gl_x.size):
        tau = t0 + gl_x[r] * dt
        xv = x * math.exp(-alpha * (tau - t0))
        eta = _eta_at(tau, i, eta_inf, eta_diff, beta, stationary)
        acc += gl_w[r] * _rate(fcode, f0, f1, f2, xv, eta)
    return acc * dt


# ---------------------------------------------------------------------------
# observation snapshot


@njit(cache=True, nogil=True)
def _snapshot(s, ko, n, x, last, z, alpha, accepts,
              fcode, f0, f1, f2, eta_inf, eta_diff, beta, stationary,
              q, use_xinf, xinf_fine, use_ell, ell_fine, use_xt, xt_fine,
              track_mart, comp, in_indptr, in_indices, w,
              out_dist_xinf, out_dist_xt, out_dist_ell, out_mean_int,
              out_total_spikes, out_max_cur, out_mart_l2, scratch, mscratch):
    ratio = q // n
    mean_int = 0.0
    max_cur = 0.0
    d_xinf = 0.0
    d_xt = 0.0
    d_ell = 0.0
    for i in range(n):
        y = x[i] * math.exp(-alpha * (s - last[i]))
        scratch[i] = y
        if y > max_cur:
            max_cur = y
        eta = _eta_at(s, i, eta_inf, eta_diff, beta, stationary)
        lam = _rate(fcode, f0, f1, f2, y, eta)
        mean_int += lam
        base = i * ratio
        for r in range(ratio):
            if use_xinf:
                e = y - xinf_fine[base + r]
                d_xinf += e * e
            if use_xt:
                e = y - xt_fine[ko, base + r]
                d_xt += e * e
            if use_ell:
                e = lam - ell_fine[base + r]
                d_ell += e * e
    mean_int /= n
    out_mean_int[ko] = mean_int
    out_max_cur[ko] = max_cur
    out_total_spikes[ko] = accepts
    out_dist_xinf[ko] = math.sqrt(d_xinf / q) if use_xinf else np.nan
    out_dist_xt[ko] = math.sqrt(d_xt / q) if use_xt else np.nan
    out_dist_ell[ko] = math.sqrt(d_ell / q) if use_ell else np.nan
    if track_mart:
        # flush compensators virtually to s, then one in-edge sweep
        for j in range(n):
            mscratch[j] = z[j] - (comp[j] + _comp_piece(
                fcode, f0, f1, f2, alpha, x[j], j, last[j], s,
                eta_inf, eta_diff, beta, stationary, _GL_X, _GL_W))
        acc = 0.0
        for i in range(n):
            mi = 0.0
            for p in range(in_indptr[i], in_indptr[i + 1]):
                mi += mscratch[in_indices[p]]
            mi *= w
            acc += mi * mi
        out_mart_l2[ko] = math.sqrt(acc / n)
    else:
        out_mart_l2[ko] = np.nan
    return mean_int


# ---------------------------------------------------------------------------
# exponential-memory event loop


@njit(cache=True, nogil=True)
def run_exponential(n, indptr, indices, w,
                    fcode, f0, f1, f2, alpha,
                    eta_inf, eta_diff, beta, delta0, lip, monotone,
                    t_end, refresh_every, uniform_bound, blow_cap, max_spikes,
                    x0,
                    obs_times, q, use_xinf, xinf_fine, use_ell, ell_fine,
                    use_xt, xt_fine,
                    track_mart, in_indptr, in_indices,
                    spike_cap, spike_t, spike_i,
                    rng):
    stationary = delta0 == 0.0
    envelope = (not monotone) and (not stationary)
    x = x0.copy()
    last = np.zeros(n)
    z = np.zeros(n, dtype=np.int64)
    comp = np.zeros(n)
    bound = np.zeros(n)
    tree = np.zeros(n + 1)
    scratch = np.empty(n)
    mscratch = np.empty(n) if track_mart else np.empty(1)
    top_bit = _top_bit(n)
    use_tree = uniform_bound <= 0.0

    n_obs = obs_times.size
    out_dist_xinf = np.full(n_obs, np.nan)
    out_dist_xt = np.full(n_obs, np.nan)
    out_dist_ell = np.full(n_obs, np.nan)
    out_mean_int = np.full(n_obs, np.nan)
    out_total_spikes = np.full(n_obs, np.nan)
    out_max_cur = np.full(n_obs, np.nan)
    out_mart_l2 = np.full(n_obs, np.nan)

    # initial frozen bounds at t = 0
    for i in range(n):
        if envelope:
            bound[i] = _rate(fcode, f0, f1, f2, x[i], eta_inf[i])
        else:
            bound[i] = _rate(fcode, f0, f1, f2, x[i],
                             _eta_at(0.0, i, eta_inf, eta_diff, beta, stationary))
    if use_tree:
        _fen_build(tree, bound, n)

    t = 0.0
    ko = 0
    proposals = 0
    accepts = 0
    refreshes = 0
    since_refresh = 0
    logged = 0
    status = STATUS_OK
    dense_cut = n // 4

    while True:
        if envelope:
            c_add = lip * delta0 * math.exp(-beta * t)
        else:
            c_add = 0.0
        if use_tree:
            total = _fen_total(tree, n) + n * c_add
        else:
            total = n * uniform_bound
        if total > n * 1.0e12:
            status = STATUS_BLOWUP
            break
        if total <= 1.0e-300:
            # extinct: nothing can ever fire again, flush remaining samples
            while ko < n_obs and obs_times[ko] <= t_end + 1e-12:
                _snapshot(obs_times[ko], ko, n, x, last, z, alpha, accepts,
                          fcode, f0, f1, f2, eta_inf, eta_diff, beta, stationary,
                          q, use_xinf, xinf_fine, use_ell, ell_fine, use_xt, xt_fine,
                          track_mart, comp, in_indptr, in_indices, w,
                          out_dist_xinf, out_dist_xt, out_dist_ell, out_mean_int,
                          out_total_spikes, out_max_cur, out_mart_l2,
                          scratch, mscratch)
                ko += 1
            status = STATUS_EXTINCT
            t = t_end
            break
        t_new = t + rng.exponential(1.0 / total)
        # samples strictly before the pending proposal see the pre-event state
        limit = t_new if t_new < t_end else t_end + 1e-12
        while ko < n_obs and obs_times[ko] < limit:
            m_int = _snapshot(obs_times[ko], ko, n, x, last, z, alpha, accepts,
                              fcode, f0, f1, f2, eta_inf, eta_diff, beta, stationary,
                              q, use_xinf, xinf_fine, use_ell, ell_fine,
                              use_xt, xt_fine,
                              track_mart, comp, in_indptr, in_indices, w,
                              out_dist_xinf, out_dist_xt, out_dist_ell,
                              out_mean_int, out_total_spikes, out_max_cur,
                              out_mart_l2, scratch, mscratch)
            ko += 1
            if blow_cap > 0.0 and m_int > blow_cap:
                status = STATUS_BLOWUP
                break
        if status == STATUS_BLOWUP:
            t = t_new if t_new < t_end else t_end
            break
        if t_new >= t_end:
            t = t_end
            break
        t = t_new
        proposals += 1
        since_refresh += 1

        # select the proposing neuron in proportion to its dominating rate
        u = rng.random() * total
        if use_tree:
            fen_mass = total - n * c_add
            if u < fen_mass:
                i = _fen_find(tree, n, u, top_bit)
            else:
                i = int((u - fen_mass) / c_add)
                if i >= n:
                    i = n - 1
        else:
            i = int(u / uniform_bound)
            if i >= n:
                i = n - 1

        # materialize neuron i at t
        if track_mart:
            comp[i] += _comp_piece(fcode, f0, f1, f2, alpha, x[i], i, last[i], t,
                                   eta_inf, eta_diff, beta, stationary, _GL_X, _GL_W)
        x[i] = x[i] * math.exp(-alpha * (t - last[i]))
        last[i] = t
        eta_i = _eta_at(t, i, eta_inf, eta_diff, beta, stationary)
        lam = _rate(fcode, f0, f1, f2, x[i], eta_i)
        if use_tree:
            per_bound = bound[i] + c_add
        else:
            per_bound = uniform_bound
        if lam > per_bound * (1.0 + 1e-9) + 1e-12:
            status = STATUS_BREACH
            break

        if rng.random() * per_bound <= lam:
            # accepted spike of neuron i
            z[i] += 1
            accepts += 1
            if logged < spike_cap:
                spike_t[logged] = t
                spike_i[logged] = i
                logged += 1
            if use_tree:
                newb = lam if monotone else _rate(fcode, f0, f1, f2, x[i], eta_inf[i])
                lo = indptr[i]
                hi = indptr[i + 1]
                deg = hi - lo
                dense = deg > dense_cut
                if dense:
                    bound[i] = newb
                else:
                    _fen_update(tree, n, i, newb - bound[i])
                    bound[i] = newb
                cache_d = -1.0
                cache_f = 1.0
                if dense and not track_mart and (stationary or not monotone):
                    # hot path: branch-free scan, tree rebuilt wholesale after
                    for p in range(lo, hi):
                        k = indices[p]
                        d = t - last[k]
                        if d != cache_d:
                            cache_f = math.exp(-alpha * d)
                            cache_d = d
                        xv = x[k] * cache_f + w
                        x[k] = xv
                        last[k] = t
                        bound[k] = _rate(fcode, f0, f1, f2, xv, eta_inf[k])
                    _fen_build(tree, bound, n)
                elif dense and track_mart and fcode == 0 and stationary:
                    # linear stationary: compensator piece shares the decay
                    # factor, so tracking costs no extra exp calls
                    inv_a = 1.0 / alpha
                    for p in range(lo, hi):
                        k = indices[p]
                        d = t - last[k]
                        if d != cache_d:
                            cache_f = math.exp(-alpha * d)
                            cache_d = d
                        xk = x[k]
                        comp[k] += (f0 + eta_inf[k]) * d + xk * (1.0 - cache_f) * inv_a
                        xv = xk * cache_f + w
                        x[k] = xv
                        last[k] = t
                        bound[k] = f0 + eta_inf[k] + xv
                    _fen_build(tree, bound, n)
                else:
                    for p in range(lo, hi):
                        k = indices[p]
                        d = t - last[k]
                        if d != cache_d:
                            cache_f = math.exp(-alpha * d)
                            cache_d = d
                        if track_mart:
                            comp[k] += _comp_piece(fcode, f0, f1, f2, alpha, x[k], k,
                                                   last[k], t, eta_inf, eta_diff, beta,
                                                   stationary, _GL_X, _GL_W)
                        x[k] = x[k] * cache_f + w
                        last[k] = t
                        if monotone:
                            eta_k = _eta_at(t, k, eta_inf, eta_diff, beta, stationary)
                        else:
                            eta_k = eta_inf[k]
                        nb = _rate(fcode, f0, f1, f2, x[k], eta_k)
                        if dense:
                            bound[k] = nb
                        else:
                            _fen_update(tree, n, k, nb - bound[k])
                            bound[k] = nb
                    if dense:
                        _fen_build(tree, bound, n)
            else:
                # fixed uniform dominating rate: update state only
                cache_d = -1.0
                cache_f = 1.0
                for p in range(indptr[i], indptr[i + 1]):
                    k = indices[p]
                    d = t - last[k]
                    if d != cache_d:
                        cache_f = math.exp(-alpha * d)
                        cache_d = d
                    if track_mart:
                        comp[k] += _comp_piece(fcode, f0, f1, f2, alpha, x[k], k,
                                               last[k], t, eta_inf, eta_diff, beta,
                                               stationary, _GL_X, _GL_W)
                    x[k] = x[k] * cache_f + w
                    last[k] = t
            if max_spikes > 0 and accepts >= max_spikes:
                status = STATUS_SPIKE_BUDGET
                break
        else:
            # rejected: tighten the frozen bound to the freshly computed rate
            if use_tree:
                newb = lam if monotone else _rate(fcode, f0, f1, f2, x[i], eta_inf[i])
                _fen_update(tree, n, i, newb - bound[i])
                bound[i] = newb

        if use_tree and since_refresh >= refresh_every:
            for k in range(n):
                if track_mart:
                    comp[k] += _comp_piece(fcode, f0, f1, f2, alpha, x[k], k,
                                           last[k], t, eta_inf, eta_diff, beta,
                                           stationary, _GL_X, _GL_W)
                x[k] = x[k] * math.exp(-alpha * (t - last[k]))
                last[k] = t
                if monotone:
                    eta_k = _eta_at(t, k, eta_inf, eta_diff, beta, stationary)
                else:
                    eta_k = eta_inf[k]
                bound[k] = _rate(fcode, f0, f1, f2, x[k], eta_k)
            _fen_build(tree, bound, n)
            refreshes += 1
            since_refresh = 0

    if status == STATUS_OK:
        # flush any samples at or before t_end that the loop did not reach
        while ko < n_obs and obs_times[ko] <= t_end + 1e-12:
            _snapshot(obs_times[ko], ko, n, x, last, z, alpha, accepts,
                      fcode, f0, f1, f2, eta_inf, eta_diff, beta, stationary,
                      q, use_xinf, xinf_fine, use_ell, ell_fine, use_xt, xt_fine,
                      track_mart, comp, in_indptr, in_indices, w,
                      out_dist_xinf, out_dist_xt, out_dist_ell, out_mean_int,
                      out_total_spikes, out_max_cur, out_mart_l2,
                      scratch, mscratch)
            ko += 1

    # currents (and compensators) materialized at the stop time
    for k in range(n):
        if track_mart:
            comp[k] += _comp_piece(fcode, f0, f1, f2, alpha, x[k], k,
                                   last[k], t, eta_inf, eta_diff, beta,
                                   stationary, _GL_X, _GL_W)
        x[k] = x[k] * math.exp(-alpha * (t - last[k]))
        last[k] = t
    return (status, t, z, x, ko,
            out_dist_xinf, out_dist_xt, out_dist_ell, out_mean_int,
            out_total_spikes, out_max_cur, out_mart_l2, comp,
            proposals, accepts, refreshes, logged)


# ---------------------------------------------------------------------------
# general-memory event loop (validation scale)


@njit(cache=True, nogil=True, inline="always")
def _h_eval(hcode, h_alpha, h_samples, h_step, lag):
    if lag < 0.0:
        return 0.0
    if hcode == 0:
        return math.exp(-h_alpha * lag)
    pos = lag / h_step
    idx = int(pos)
    if idx >= h_samples.size - 1:
        return 0.0
    frac = pos - idx
    return h_samples[idx] * (1.0 - frac) + h_samples[idx + 1] * frac


@njit(cache=True, nogil=True)
def _hist_current(i, t, w, head, ev_time, ev_prev,
                  hcode, h_alpha, h_samples, h_step, h_support):
    """Current of neuron i at time t from its incoming spike history."""
    acc = 0.0
    p = head[i]
    while p >= 0:
        lag = t - ev_time[p]
        if lag > h_support:
            break  # older entries only get older
        acc += _h_eval(hcode, h_alpha, h_samples, h_step, lag)
        p = ev_prev[p]
    return acc * w


@njit(cache=True, nogil=True)
def run_general(n, indptr, indices, w,
                fcode, f0, f1, f2,
                hcode, h_alpha, h_samples, h_step, h_support, h_sup, h_monotone,
                eta_inf, eta_diff, beta, delta0, lip, drive_monotone,
                t_end, refresh_every, blow_cap, max_spikes,
                obs_times, q, use_xinf, xinf_fine, use_ell, ell_fine,
                use_xt, xt_fine,
                spike_cap, spike_t, spike_i,
                ev_cap, rng):
    """History-sum twin of run_exponential.

    With a nonincreasing kernel and drive the frozen-bound policy (and hence
    the random-number consumption pattern) matches run_exponential exactly;
    otherwise a conservative envelope based on received spike counts is
    used, which only grows and needs no history scan to refresh.
    """
    stationary = delta0 == 0.0
    monotone = h_monotone and (drive_monotone or stationary)
    envelope_drive = (not (drive_monotone or stationary))
    z = np.zeros(n, dtype=np.int64)
    recv = np.zeros(n, dtype=np.int64)   # incoming spike counts
    bound = np.zeros(n)
    tree = np.zeros(n + 1)
    head = np.full(n, -1, dtype=np.int64)
    ev_time = np.empty(ev_cap)
    ev_prev = np.empty(ev_cap, dtype=np.int64)
    n_ev = 0
    top_bit = _top_bit(n)

    n_obs = obs_times.size
    out_dist_xinf = np.full(n_obs, np.nan)
    out_dist_xt = np.full(n_obs, np.nan)
    out_dist_ell = np.full(n_obs, np.nan)
    out_mean_int = np.full(n_obs, np.nan)
    out_total_spikes = np.full(n_obs, np.nan)
    out_max_cur = np.full(n_obs, np.nan)

    for i in range(n):
        if monotone:
            eta0 = _eta_at(0.0, i, eta_inf, eta_diff, beta, stationary)
            bound[i] = _rate(fcode, f0, f1, f2, 0.0, eta0)
        else:
            eta_ref = eta_inf[i] if envelope_drive else _eta_at(
                0.0, i, eta_inf, eta_diff, beta, stationary)
            bound[i] = _rate(fcode, f0, f1, f2, 0.0, eta_ref)
    _fen_build(tree, bound, n)

    t = 0.0
    ko = 0
    proposals = 0
    accepts = 0
    refreshes = 0
    since_refresh = 0
    logged = 0
    status = STATUS_OK
    dense_cut = n // 4

    while True:
        c_add = lip * delta0 * math.exp(-beta * t) if envelope_drive else 0.0
        total = _fen_total(tree, n) + n * c_add
        if total > n * 1.0e12:
            status = STATUS_BLOWUP
            break
        if total <= 1.0e-300:
            while ko < n_obs and obs_times[ko] <= t_end + 1e-12:
                _general_snapshot(obs_times[ko], ko, n, w, head, ev_time, ev_prev,
                                  hcode, h_alpha, h_samples, h_step, h_support,
                                  accepts, fcode, f0, f1, f2,
                                  eta_inf, eta_diff, beta, stationary,
                                  q, use_xinf, xinf_fine, use_ell, ell_fine,
                                  use_xt, xt_fine,
                                  out_dist_xinf, out_dist_xt, out_dist_ell,
                                  out_mean_int, out_total_spikes, out_max_cur)
                ko += 1
            status = STATUS_EXTINCT
            t = t_end
            break
        t_new = t + rng.exponential(1.0 / total)
        limit = t_new if t_new < t_end else t_end + 1e-12
        while ko < n_obs and obs_times[ko] < limit:
            m_int = _general_snapshot(obs_times[ko], ko, n, w, head, ev_time, ev_prev,
                                      hcode, h_alpha, h_samples, h_step, h_support,
                                      accepts, fcode, f0, f1, f2,
                                      eta_inf, eta_diff, beta, stationary,
                                      q, use_xinf, xinf_fine, use_ell, ell_fine,
                                      use_xt, xt_fine,
                                      out_dist_xinf, out_dist_xt, out_dist_ell,
                                      out_mean_int, out_total_spikes, out_max_cur)
            ko += 1
            if blow_cap > 0.0 and m_int > blow_cap:
                status = STATUS_BLOWUP
                break
        if status == STATUS_BLOWUP:
            t = t_new if t_new < t_end else t_end
            break
        if t_new >= t_end:
            t = t_end
            break
        t = t_new
        proposals += 1
        since_refresh += 1

        u = rng.random() * total
        fen_mass = total - n * c_add
        if u < fen_mass:
            i = _fen_find(tree, n, u, top_bit)
        else:
            i = int((u - fen_mass) / c_add)
            if i >= n:
                i = n - 1

        xi = _hist_current(i, t, w, head, ev_time, ev_prev,
                           hcode, h_alpha, h_samples, h_step, h_support)
        eta_i = _eta_at(t, i, eta_inf, eta_diff, beta, stationary)
        lam = _rate(fcode, f0, f1, f2, xi, eta_i)
        per_bound = bound[i] + c_add
        if lam > per_bound * (1.0 + 1e-9) + 1e-12:
            status = STATUS_BREACH
            break

        if rng.random() * per_bound <= lam:
            z[i] += 1
            accepts += 1
            if logged < spike_cap:
                spike_t[logged] = t
                spike_i[logged] = i
                logged += 1
            if n_ev + (indptr[i + 1] - indptr[i]) > ev_cap:
                status = STATUS_SPIKE_BUDGET  # history store exhausted
                break
            if monotone:
                nb = lam
            else:
                eta_ref = eta_inf[i] if envelope_drive else eta_i
                nb = _rate(fcode, f0, f1, f2, h_sup * w * recv[i], eta_ref)
            lo = indptr[i]
            hi = indptr[i + 1]
            deg = hi - lo
            dense = deg > dense_cut
            if dense:
                bound[i] = nb
            else:
                _fen_update(tree, n, i, nb - bound[i])
                bound[i] = nb
            for p in range(lo, hi):
                k = indices[p]
                ev_time[n_ev] = t
                ev_prev[n_ev] = head[k]
                head[k] = n_ev
                n_ev += 1
                recv[k] += 1
                if monotone:
                    xk = _hist_current(k, t, w, head, ev_time, ev_prev,
                                       hcode, h_alpha, h_samples, h_step, h_support)
                    eta_k = _eta_at(t, k, eta_inf, eta_diff, beta, stationary)
                    nbk = _rate(fcode, f0, f1, f2, xk, eta_k)
                else:
                    eta_ref = eta_inf[k] if envelope_drive else _eta_at(
                        t, k, eta_inf, eta_diff, beta, stationary)
                    nbk = _rate(fcode, f0, f1, f2, h_sup * w * recv[k], eta_ref)
                if dense:
                    bound[k] = nbk
                else:
                    _fen_update(tree, n, k, nbk - bound[k])
                    bound[k] = nbk
            if dense:
                _fen_build(tree, bound, n)
            if max_spikes > 0 and accepts >= max_spikes:
                status = STATUS_SPIKE_BUDGET
                break
        else:
            if monotone:
                nb = lam
            else:
                eta_ref = eta_inf[i] if envelope_drive else eta_i
                nb = _rate(fcode, f0, f1, f2, h_sup * w * recv[i], eta_ref)
            _fen_update(tree, n, i, nb - bound[i])
            bound[i] = nb

        if since_refresh >= refresh_every:
            for k in range(n):
                if monotone:
                    xk = _hist_current(k, t, w, head, ev_time, ev_prev,
                                       hcode, h_alpha, h_samples, h_step, h_support)
                    eta_k = _eta_at(t, k, eta_inf, eta_diff, beta, stationary)
                    bound[k] = _rate(fcode, f0, f1, f2, xk, eta_k)
                else:
                    eta_ref = eta_inf[k] if envelope_drive else _eta_at(
                        t, k, eta_inf, eta_diff, beta, stationary)
                    bound[k] = _rate(fcode, f0, f1, f2, h_sup * w * recv[k], eta_ref)
            _fen_build(tree, bound, n)
            refreshes += 1
            since_refresh = 0

    if status == STATUS_OK:
        while ko < n_obs and obs_times[ko] <= t_end + 1e-12:
            _general_snapshot(obs_times[ko], ko, n, w, head, ev_time, ev_prev,
                              hcode, h_alpha, h_samples, h_step, h_support,
                              accepts, fcode, f0, f1, f2,
                              eta_inf, eta_diff, beta, stationary,
                              q, use_xinf, xinf_fine, use_ell, ell_fine,
                              use_xt, xt_fine,
                              out_dist_xinf, out_dist_xt, out_dist_ell,
                              out_mean_int, out_total_spikes, out_max_cur)
            ko += 1

    x_final = np.empty(n)
    for k in range(n):
        x_final[k] = _hist_current(k, t, w, head, ev_time, ev_prev,
                                   hcode, h_alpha, h_samples, h_step, h_support)
    return (status, t, z, x_final, ko,
            out_dist_xinf, out_dist_xt, out_dist_ell, out_mean_int,
            out_total_spikes, out_max_cur,
            proposals, accepts, refreshes, logged)


@njit(cache=True, nogil=True)
def _general_snapshot(s, ko, n, w, head, ev_time, ev_prev,
                      hcode, h_alpha, h_samples, h_step, h_support,
                      accepts, fcode, f0, f1, f2,
                      eta_inf, eta_diff, beta, stationary,
                      q, use_xinf, xinf_fine, use_ell, ell_fine, use_xt, xt_fine,
                      out_dist_xinf, out_dist_xt, out_dist_ell,
                      out_mean_int, out_total_spikes, out_max_cur):
    ratio = q // n
    mean_int = 0.0
    max_cur = 0.0
    d_xinf = 0.0
    d_xt = 0.0
    d_ell = 0.0
    for i in range(n):
        y = _hist_current(i, s, w, head, ev_time, ev_prev,
                          hcode, h_alpha, h_samples, h_step, h_support)
        if y > max_cur:
            max_cur = y
        eta = _eta_at(s, i, eta_inf, eta_diff, beta, stationary)
        lam = _rate(fcode, f0, f1, f2, y, eta)
        mean_int += lam
        base = i * ratio
        for r in range(ratio):
            if use_xinf:
                e = y - xinf_fine[base + r]
                d_xinf += e * e
            if use_xt:
                e = y - xt_fine[ko, base + r]
                d_xt += e * e
            if use_ell:
                e = lam - ell_fine[base + r]
                d_ell += e * e
    mean_int /= n
    out_mean_int[ko] = mean_int
    out_max_cur[ko] = max_cur
    out_total_spikes[ko] = accepts
    out_dist_xinf[ko] = math.sqrt(d_xinf / q) if use_xinf else np.nan
    out_dist_xt[ko] = math.sqrt(d_xt / q) if use_xt else np.nan
    out_dist_ell[ko] = math.sqrt(d_ell / q) if use_ell else np.nan
    return mean_int
