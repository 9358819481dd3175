"""Microscopic network simulation: public interface over the event engine.

The exponential-memory path scales to thousands of neurons (lazy decay, one
state scalar per neuron).  The general-memory path keeps full spike
histories and is guarded to validation scale (n <= 500).  Both paths are
exact samplers of the point process; they differ only in how the synaptic
current is evaluated.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _engine
from .fields import GridField
from .graph import InteractionGraph
from .kernels import (ConstantRate, ExponentialMemory, LinearRate,
                      RelaxationDrive, SigmoidRate, TabulatedMemory)

GENERAL_SCALE_LIMIT = 500


class DominationError(RuntimeError):
    """A true rate exceeded its dominating bound: internal invariant breach."""


class HistoryCapacityError(RuntimeError):
    """The general-memory history store filled before t_end."""


@dataclass
class ObserverPlan:
    """What to record along a run.

    Distances are step-profile L2 distances on a fine lattice of q midpoint
    cells (q a multiple of n, default 4n): the network profile is constant
    on each of the n cells while targets vary on the fine lattice.

    x_inf / ell: stationary current and intensity profiles (fixed targets).
    xt: a (n_obs, q) matrix giving a time-varying current target per sample.
    """

    obs_dt: float | None = None
    q: int | None = None
    x_inf: GridField | None = None
    ell: GridField | None = None
    xt: np.ndarray | None = None
    track_martingale: bool = False
    spike_log: int = 0


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    dist_to_xinf: np.ndarray
    dist_to_xt: np.ndarray
    mean_intensity: np.ndarray
    total_spikes: np.ndarray
    max_current: np.ndarray
    dist_lambda: np.ndarray      # intensity-profile distance (when requested)
    martingale_l2: np.ndarray    # noise-term L2 norm (when tracked)
    final_currents: np.ndarray
    spike_counts: np.ndarray
    t_final: float
    status: int
    extinct: bool
    blown_up: bool
    stats: dict = field(default_factory=dict)
    spikes: tuple[np.ndarray, np.ndarray] | None = None
    compensators: np.ndarray | None = None  # per-neuron integrated rates (tracked runs)

    def to_csv(self, path) -> None:
        """Canonical sample table: t, dist_to_xinf, dist_to_xt,
        mean_intensity, total_spikes, max_current."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "dist_to_xinf", "dist_to_xt", "mean_intensity",
                        "total_spikes", "max_current"])
            for k, t in enumerate(self.times):
                w.writerow([
                    repr(float(t)),
                    _csv_num(self.dist_to_xinf[k]),
                    _csv_num(self.dist_to_xt[k]),
                    _csv_num(self.mean_intensity[k]),
                    _csv_num(self.total_spikes[k]),
                    _csv_num(self.max_current[k]),
                ])


def _csv_num(v) -> str:
    return "" if (v is None or not np.isfinite(v)) else repr(float(v))


def profile_distance(currents: np.ndarray, target_fine: np.ndarray) -> float:
    """L2(I) distance between a step profile and a fine-lattice target.

    ``currents`` has one value per network cell; ``target_fine`` lives on q
    midpoint cells with q a multiple of n.
    """
    currents = np.asarray(currents, dtype=float)
    target_fine = np.asarray(target_fine, dtype=float)
    n = currents.size
    q = target_fine.size
    if q % n != 0:
        raise ValueError(f"fine lattice size {q} must be a multiple of n={n}")
    step = np.repeat(currents, q // n)
    return float(np.sqrt(np.mean((step - target_fine) ** 2)))


def stream(*key) -> np.random.Generator:
    """Counter-based random stream keyed by a tuple of integers."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(tuple(key))))


def _f_params(F):
    if isinstance(F, LinearRate):
        return 0, float(F.mu), 0.0, 0.0
    if isinstance(F, SigmoidRate):
        return 1, float(F.lam_max), float(F.slope), float(F.theta)
    if isinstance(F, ConstantRate):
        return 2, float(F.c), 0.0, 0.0
    raise TypeError(f"unsupported rate function {type(F).__name__}")


def _drive_arrays(drive: RelaxationDrive, x: np.ndarray):
    """Normalize the drive to engine form.

    beta = 0 freezes the drive at its start profile, so it is folded into a
    stationary eta_inf and the relaxation terms vanish.
    """
    if drive.beta == 0.0:
        eta_inf = np.asarray(drive.eta_0(x), dtype=float)
        return eta_inf, np.zeros_like(eta_inf), 0.0, 0.0, True
    eta_inf = np.asarray(drive.eta_inf(x), dtype=float)
    eta_diff = np.asarray(drive.eta_0(x), dtype=float) - eta_inf
    return eta_inf, eta_diff, float(drive.beta), float(drive.delta_0), drive.nonincreasing


def _obs_arrays(plan: ObserverPlan, n: int, alpha_like: float, t_end: float):
    if plan.obs_dt is not None:
        obs_dt = plan.obs_dt
    else:
        # a tenth of the memory timescale, but never more than 1e4 samples
        obs_dt = max(0.1 / alpha_like, t_end / 10_000.0)
    n_obs = int(math.floor(t_end / obs_dt + 1e-9)) + 1
    obs_times = np.arange(n_obs) * obs_dt
    q = plan.q if plan.q is not None else 4 * n
    if q % n != 0:
        raise ValueError(f"fine lattice q={q} must be a multiple of n={n}")
    use_xinf = plan.x_inf is not None
    use_ell = plan.ell is not None
    use_xt = plan.xt is not None
    xinf_fine = plan.x_inf.resample(q) if use_xinf else np.zeros(1)
    ell_fine = plan.ell.resample(q) if use_ell else np.zeros(1)
    if use_xt:
        xt = np.asarray(plan.xt, dtype=float)
        if xt.shape != (n_obs, q):
            raise ValueError(
                f"time-varying target must have shape {(n_obs, q)}, got {xt.shape}")
    else:
        xt = np.zeros((0, 0))
    return obs_times, q, use_xinf, xinf_fine, use_ell, ell_fine, use_xt, xt


def _record(status, t_final, z, x_final, ko, obs_times, outs, proposals,
            accepts, refreshes, logged, spike_t, spike_i, want_spikes,
            comp=None):
    d_xinf, d_xt, d_ell, mean_int, tot, max_cur, mart = outs
    if status == _engine.STATUS_BREACH:
        raise DominationError(
            f"true rate exceeded its dominating bound at t={t_final:.6f}")
    rec = TrajectoryRecord(
        times=obs_times[:ko],
        dist_to_xinf=d_xinf[:ko], dist_to_xt=d_xt[:ko],
        mean_intensity=mean_int[:ko], total_spikes=tot[:ko],
        max_current=max_cur[:ko], dist_lambda=d_ell[:ko],
        martingale_l2=mart[:ko],
        final_currents=x_final, spike_counts=z,
        t_final=float(t_final), status=int(status),
        extinct=status == _engine.STATUS_EXTINCT,
        blown_up=status == _engine.STATUS_BLOWUP,
        stats={"proposals": int(proposals), "accepts": int(accepts),
               "refreshes": int(refreshes), "spikes_logged": int(logged)},
        compensators=comp,
    )
    if want_spikes:
        rec.spikes = (spike_t[:logged].copy(), spike_i[:logged].copy())
    return rec


def simulate_exponential(graph: InteractionGraph, F, alpha: float,
                         drive: RelaxationDrive, t_end: float,
                         observers: ObserverPlan | None = None,
                         seed: int | tuple = 0,
                         x0: np.ndarray | None = None,
                         refresh_every: int | None = None,
                         uniform_bound: float = 0.0,
                         blowup_intensity: float = 0.0,
                         max_spikes: int = 0) -> TrajectoryRecord:
    """Exact simulation with memory h(t) = exp(-alpha t).

    ``seed`` keys a counter-based stream (ints or tuples both work).
    ``uniform_bound`` switches to a fixed per-neuron dominating rate, which
    ties the proposal schedule to the seed alone; runs sharing a seed then
    couple through identical proposals (raising with a bound too small to
    dominate is reported as a DominationError).
    ``blowup_intensity`` stops the run once the sampled mean intensity
    exceeds it (0 disables).  ``max_spikes`` stops after that many accepted
    events (0 disables).
    """
    plan = observers or ObserverPlan()
    n = graph.n
    if not alpha > 0:
        raise ValueError("decay rate alpha must be positive")
    x = (np.arange(n) + 1.0) / n
    eta_inf, eta_diff, beta, delta0, monotone = _drive_arrays(drive, x)
    fcode, f0, f1, f2 = _f_params(F)
    obs_times, q, use_xinf, xinf_fine, use_ell, ell_fine, use_xt, xt = \
        _obs_arrays(plan, n, alpha, t_end)
    x0v = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    if x0v.size != n or np.any(x0v < 0):
        raise ValueError("initial currents must be a nonnegative length-n vector")
    if refresh_every is None:
        refresh_every = 8 * n
    cap = int(plan.spike_log)
    spike_t = np.empty(max(cap, 1))
    spike_i = np.empty(max(cap, 1), dtype=np.int64)
    if plan.track_martingale:
        in_indptr, in_indices = graph.in_csr
    else:
        in_indptr, in_indices = np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int32)
    rng = stream(*seed) if isinstance(seed, tuple) else stream(seed)

    out = _engine.run_exponential(
        n, graph.out_indptr, graph.out_indices, graph.weight,
        fcode, f0, f1, f2, float(alpha),
        eta_inf, eta_diff, beta, delta0, float(F.lip), monotone,
        float(t_end), int(refresh_every), float(uniform_bound),
        float(blowup_intensity), int(max_spikes),
        x0v,
        obs_times, q, use_xinf, xinf_fine, use_ell, ell_fine, use_xt, xt,
        plan.track_martingale, in_indptr, in_indices,
        cap, spike_t, spike_i,
        rng)
    (status, t_final, z, x_final, ko, d_xinf, d_xt, d_ell, mean_int, tot,
     max_cur, mart, comp, proposals, accepts, refreshes, logged) = out
    return _record(status, t_final, z, x_final, ko, obs_times,
                   (d_xinf, d_xt, d_ell, mean_int, tot, max_cur, mart),
                   proposals, accepts, refreshes, logged, spike_t, spike_i,
                   cap > 0, comp if plan.track_martingale else None)


def simulate_general_h(graph: InteractionGraph, F, h, drive: RelaxationDrive,
                       t_end: float, observers: ObserverPlan | None = None,
                       seed: int | tuple = 0,
                       refresh_every: int | None = None,
                       blowup_intensity: float = 0.0,
                       max_spikes: int = 0,
                       history_cap: int | None = None) -> TrajectoryRecord:
    """Exact simulation with a general nonnegative memory kernel.

    Currents are recomputed from stored spike histories, so the cost grows
    with the horizon; the network size is capped at {limit} neurons.  With a
    nonincreasing kernel and drive the dominating-rate policy (and random
    number consumption) coincides with the exponential path.
    """
    n = graph.n
    if n > GENERAL_SCALE_LIMIT:
        raise ValueError(
            f"general-memory path is validation scale only (n <= {GENERAL_SCALE_LIMIT})")
    plan = observers or ObserverPlan()
    if plan.track_martingale:
        raise ValueError("martingale tracking needs the exponential path")
    if isinstance(h, ExponentialMemory):
        hcode, h_alpha = 0, float(h.alpha)
        h_samples, h_step = np.zeros(2), 1.0
        h_support, h_sup = np.inf, 1.0
        alpha_like = h.alpha
    elif isinstance(h, TabulatedMemory):
        hcode, h_alpha = 1, 1.0
        h_samples, h_step = h.samples, float(h.step)
        h_support, h_sup = float(h.t_max), float(h.sup)
        alpha_like = 1.0 / max(h.l1_norm, 1e-9)
    else:
        raise TypeError(f"unsupported memory kernel {type(h).__name__}")
    x = (np.arange(n) + 1.0) / n
    eta_inf, eta_diff, beta, delta0, drive_monotone = _drive_arrays(drive, x)
    fcode, f0, f1, f2 = _f_params(F)
    obs_times, q, use_xinf, xinf_fine, use_ell, ell_fine, use_xt, xt = \
        _obs_arrays(plan, n, alpha_like, t_end)
    if refresh_every is None:
        refresh_every = 8 * n
    cap = int(plan.spike_log)
    spike_t = np.empty(max(cap, 1))
    spike_i = np.empty(max(cap, 1), dtype=np.int64)
    if history_cap is None:
        history_cap = 4_000_000
    rng = stream(*seed) if isinstance(seed, tuple) else stream(seed)

    out = _engine.run_general(
        n, graph.out_indptr, graph.out_indices, graph.weight,
        fcode, f0, f1, f2,
        hcode, h_alpha, h_samples, h_step, h_support, h_sup, h.nonincreasing,
        eta_inf, eta_diff, beta, delta0, float(F.lip), drive_monotone,
        float(t_end), int(refresh_every), float(blowup_intensity), int(max_spikes),
        obs_times, q, use_xinf, xinf_fine, use_ell, ell_fine, use_xt, xt,
        cap, spike_t, spike_i,
        int(history_cap), rng)
    (status, t_final, z, x_final, ko, d_xinf, d_xt, d_ell, mean_int, tot,
     max_cur, proposals, accepts, refreshes, logged) = out
    if status == _engine.STATUS_SPIKE_BUDGET and not (0 < max_spikes <= accepts):
        raise HistoryCapacityError(
            f"history store ({history_cap} entries) filled at t={t_final:.3f}; "
            "raise history_cap or shorten the horizon")
    mart = np.full(len(obs_times), np.nan)
    return _record(status, t_final, z, x_final, ko, obs_times,
                   (d_xinf, d_xt, d_ell, mean_int, tot, max_cur, mart),
                   proposals, accepts, refreshes, logged, spike_t, spike_i,
                   cap > 0)


simulate_general_h.__doc__ = simulate_general_h.__doc__.format(limit=GENERAL_SCALE_LIMIT)


def martingale_diagnostic(graph: InteractionGraph, F, alpha: float,
                          drive: RelaxationDrive, t_end: float,
                          obs_dt: float, seed: int | tuple = 0,
                          x0: np.ndarray | None = None):
    """Sampled L2 norm of the compensated noise term M_N.

    Spike counts minus exactly integrated compensators, pushed through the
    scaled adjacency.  Returns (times, l2_norms).
    """
    plan = ObserverPlan(obs_dt=obs_dt, q=graph.n, track_martingale=True)
    rec = simulate_exponential(graph, F, alpha, drive, t_end, plan,
                               seed=seed, x0=x0)
    return rec.times, rec.martingale_l2


def first_event(graph: InteractionGraph, F, alpha: float,
                drive: RelaxationDrive, x0: np.ndarray, t_max: float,
                seed: int | tuple):
    """Time and site of the first spike (t_max and -1 when none occurs)."""
    plan = ObserverPlan(obs_dt=t_max, q=graph.n, spike_log=1)
    rec = simulate_exponential(graph, F, alpha, drive, t_max, plan,
                               seed=seed, x0=x0, max_spikes=1)
    if rec.spikes is not None and rec.spikes[0].size:
        return float(rec.spikes[0][0]), int(rec.spikes[1][0])
    return float(t_max), -1
