import math

import numpy as np
import pytest

from spikefield import (
    ConstantGraphon,
    ConstantRate,
    DominationError,
    ExponentialMemory,
    GridField,
    HistoryCapacityError,
    LinearRate,
    ObserverPlan,
    RelaxationDrive,
    SigmoidRate,
    TabulatedMemory,
    build_operator,
    complete_graph,
    constant_drive,
    first_event,
    martingale_diagnostic,
    profile_distance,
    sample_graph,
    simulate_exponential,
    simulate_general_h,
    solve_lambda_volterra,
)
from spikefield.micro import GENERAL_SCALE_LIMIT, stream


def _empty_graph(n):
    return sample_graph(ConstantGraphon(0.0), n, 1.0, seed=0)


# ---------------------------------------------------------------------------
# Poisson sanity laws


def test_constant_rate_total_count():
    # rates never depend on currents: total spikes ~ Poisson(n c T)
    g = complete_graph(100)
    rec = simulate_exponential(g, ConstantRate(3.0), 1.0, constant_drive(0.0),
                               t_end=100.0, seed=1)
    total = rec.spike_counts.sum()
    mean = 100 * 3.0 * 100.0
    assert abs(total - mean) < 4 * math.sqrt(mean)
    assert rec.status == 0
    assert rec.t_final == pytest.approx(100.0)


def test_uncoupled_linear_counts_are_poisson():
    g = _empty_graph(200)
    rec = simulate_exponential(g, LinearRate(mu=1.0), 2.0, constant_drive(0.0),
                               t_end=50.0, seed=2)
    z = rec.spike_counts
    lam = 50.0
    assert abs(z.mean() - lam) < 4 * math.sqrt(lam / 200)
    # index of dispersion of a Poisson sample is near 1
    assert 0.7 < z.var() / z.mean() < 1.3
    # currents stay zero without edges
    assert rec.final_currents.max() == 0.0


def test_general_h_zero_kernel_is_poisson():
    g = complete_graph(100)
    h = TabulatedMemory(np.zeros(6), step=0.1)
    rec = simulate_general_h(g, LinearRate(mu=1.0), h, constant_drive(0.0),
                             t_end=20.0, seed=3)
    total = rec.spike_counts.sum()
    mean = 100 * 20.0
    assert abs(total - mean) < 4 * math.sqrt(mean)


def test_stationary_level_small_network():
    # complete graph at n = 500: time averages sit near the mean-field values
    g = complete_graph(500)
    plan = ObserverPlan(obs_dt=0.05, x_inf=GridField.constant(1.0, 500))
    rec = simulate_exponential(g, LinearRate(mu=1.0), 2.0, constant_drive(0.0),
                               t_end=100.0, observers=plan, seed=4)
    win = rec.times >= 50.0
    assert rec.mean_intensity[win].mean() == pytest.approx(2.0, abs=0.1)
    mean_current = rec.final_currents.mean()
    assert mean_current == pytest.approx(1.0, abs=0.1)
    # the recorded profile distance ends small as well
    assert rec.dist_to_xinf[win].mean() < 0.3


# ---------------------------------------------------------------------------
# agreement between the two simulation paths


@pytest.mark.parametrize("dense", [False, True], ids=["sparse", "dense"])
def test_exponential_and_general_paths_agree(dense):
    # with a nonincreasing drive both paths share the dominating-rate policy,
    # so the realized spike sequences must coincide event by event
    alpha = 2.0
    n = 80 if dense else 60
    if dense:
        g = complete_graph(n)
    else:
        g = sample_graph(ConstantGraphon(0.8), n, 1.0, seed=5)
    drive = RelaxationDrive(eta_inf=0.1, eta_0=0.6, beta=1.0)
    h = TabulatedMemory.from_function(lambda t: np.exp(-alpha * t), 1e-4, 18.0)
    plan = ObserverPlan(obs_dt=0.5, spike_log=200_000)
    seed = (99, n, 0)
    fast = simulate_exponential(g, LinearRate(mu=0.8), alpha, drive, t_end=6.0,
                                observers=plan, seed=seed)
    slow = simulate_general_h(g, LinearRate(mu=0.8), h, drive, t_end=6.0,
                              observers=plan, seed=seed)
    np.testing.assert_array_equal(fast.spike_counts, slow.spike_counts)
    np.testing.assert_array_equal(fast.spikes[1], slow.spikes[1])
    np.testing.assert_allclose(fast.spikes[0], slow.spikes[0], atol=1e-9)
    assert fast.stats["proposals"] == slow.stats["proposals"]


def test_rising_drive_law_agreement():
    # a rising drive breaks proposal-schedule identity (the paths dominate
    # differently) but all samplers stay exact: totals agree in distribution
    n, t_end, reps = 40, 4.0, 30
    g = complete_graph(n)
    drive = RelaxationDrive(eta_inf=0.6, eta_0=0.1, beta=1.0)
    h = TabulatedMemory.from_function(lambda t: np.exp(-2.0 * t), 1e-4, 18.0)
    totals = {"envelope": [], "uniform": [], "general": []}
    for s in range(reps):
        rec = simulate_exponential(g, LinearRate(mu=0.8), 2.0, drive, t_end,
                                   seed=(3, s))
        totals["envelope"].append(rec.spike_counts.sum())
        rec = simulate_exponential(g, LinearRate(mu=0.8), 2.0, drive, t_end,
                                   seed=(4, s), uniform_bound=30.0)
        totals["uniform"].append(rec.spike_counts.sum())
        rec = simulate_general_h(g, LinearRate(mu=0.8), h, drive, t_end,
                                 seed=(5, s))
        totals["general"].append(rec.spike_counts.sum())
    means = {k: np.mean(v) for k, v in totals.items()}
    sems = {k: np.std(v) / math.sqrt(reps) for k, v in totals.items()}
    for a, b in (("envelope", "uniform"), ("envelope", "general")):
        gap = abs(means[a] - means[b])
        assert gap < 4 * math.hypot(sems[a], sems[b])


def test_general_h_tail_matches_volterra():
    # moderate network vs the deterministic intensity equation
    h = TabulatedMemory.from_function(lambda t: 0.8 * np.exp(-2.0 * t), 1e-3, 8.0)
    F = LinearRate(mu=1.0)
    g = complete_graph(200)
    rec = simulate_general_h(g, F, h, constant_drive(0.0), t_end=30.0, seed=6,
                             observers=ObserverPlan(obs_dt=0.25))
    win = rec.times >= 15.0
    micro_tail = rec.mean_intensity[win].mean()
    vol = solve_lambda_volterra(build_operator(ConstantGraphon(1.0), 8), F, h,
                                constant_drive(0.0), t_end=30.0, dt=0.01)
    vol_tail = vol.values[-1].mean()
    # l1 = 0.4: the stationary intensity is mu / (1 - 0.4) = 5/3, reached by
    # the first-order history scheme up to an O(dt) offset
    assert vol_tail == pytest.approx(1.0 / 0.6, abs=0.1)
    sigma = math.sqrt(vol_tail / (200 * 15.0))
    assert abs(micro_tail - vol_tail) < 3 * sigma + 0.02


# ---------------------------------------------------------------------------
# profile distance


def test_profile_distance_closed_form():
    currents = np.array([1.0, 2.0, 3.0, 4.0])
    target = (np.arange(4096) + 0.5) / 4096  # the profile y on fine cells
    # sum over quarter-cells of the exact integral of (k + 1 - y)^2
    assert profile_distance(currents, target) == pytest.approx(
        math.sqrt(113.0 / 24.0), abs=1e-4)


def test_profile_distance_validation():
    with pytest.raises(ValueError):
        profile_distance(np.ones(3), np.ones(8))


def test_profile_distance_matching_step():
    vals = np.array([0.5, 1.5])
    assert profile_distance(vals, np.repeat(vals, 8)) == 0.0


# ---------------------------------------------------------------------------
# martingale diagnostics


def test_martingale_constant_rate_closed_form():
    # complete graph: ||M(T)||^2 = ((1/n) sum_j (Z_j - cT))^2, mean c T / n
    n, c, T = 100, 2.0, 5.0
    g = complete_graph(n)
    finals = []
    for s in range(50):
        times, l2m = martingale_diagnostic(g, ConstantRate(c), 1.0,
                                           constant_drive(0.0), T, 0.5, seed=s)
        assert times[0] == 0.0 and l2m[0] == 0.0
        finals.append(l2m[-1] ** 2)
    mean = np.mean(finals)
    expect = c * T / n
    sd = expect * math.sqrt(2.0 / 50)  # chi-square(1) variance over 50 seeds
    assert abs(mean - expect) < 3 * sd


def test_martingale_scaling_slope():
    rng_sizes = (500, 1000, 2000)
    med = []
    for n in rng_sizes:
        g = complete_graph(n)
        sups = []
        for r in range(5):
            _, l2m = martingale_diagnostic(g, LinearRate(mu=1.0), 2.0,
                                           constant_drive(0.0), 5.0, 0.25,
                                           seed=(11, n, r))
            sups.append(np.max(l2m ** 2))
        med.append(np.median(sups))
    slope = np.polyfit(np.log(rng_sizes), np.log(med), 1)[0]
    assert -1.3 < slope < -0.7


def test_martingale_tracking_does_not_perturb_paths():
    g = complete_graph(120)
    kw = dict(F=LinearRate(mu=1.0), alpha=2.0, drive=constant_drive(0.0),
              t_end=8.0, seed=13)
    bare = simulate_exponential(g, kw["F"], kw["alpha"], kw["drive"], kw["t_end"],
                                seed=kw["seed"])
    tracked = simulate_exponential(g, kw["F"], kw["alpha"], kw["drive"], kw["t_end"],
                                   observers=ObserverPlan(track_martingale=True),
                                   seed=kw["seed"])
    np.testing.assert_array_equal(bare.spike_counts, tracked.spike_counts)
    np.testing.assert_allclose(bare.final_currents, tracked.final_currents,
                               rtol=1e-12)
    assert tracked.compensators is not None
    assert bare.compensators is None


def test_count_integral_residual_centered():
    # Z_i - integral of lambda_i has mean zero; averaged residuals shrink
    n, T, reps = 200, 10.0, 5
    g = complete_graph(n)
    resid = []
    lam_bar = 0.0
    for r in range(reps):
        rec = simulate_exponential(g, LinearRate(mu=1.0), 2.0, constant_drive(0.0),
                                   T, observers=ObserverPlan(track_martingale=True),
                                   seed=(17, r))
        resid.append(np.mean(rec.spike_counts - rec.compensators))
        lam_bar = max(lam_bar, rec.spike_counts.mean() / T)
    sd = math.sqrt(lam_bar * T / (n * reps))
    assert abs(np.mean(resid)) < 4 * sd


def test_compensator_exact_for_constant_rate():
    g = _empty_graph(10)
    rec = simulate_exponential(g, ConstantRate(3.0), 1.0, constant_drive(0.0),
                               t_end=10.0,
                               observers=ObserverPlan(track_martingale=True),
                               seed=21)
    np.testing.assert_allclose(rec.compensators, 30.0, rtol=1e-12)


# ---------------------------------------------------------------------------
# reproducibility and coupling


def test_reproducible_bytes(tmp_path):
    g = sample_graph(ConstantGraphon(0.7), 150, 1.0, seed=9)
    out = []
    for k in range(2):
        rec = simulate_exponential(g, LinearRate(mu=1.0), 2.0, constant_drive(0.0),
                                   t_end=10.0, seed=(5, 7))
        path = tmp_path / f"run{k}.csv"
        rec.to_csv(path)
        out.append(path.read_bytes())
    assert out[0] == out[1]


def test_integer_and_tuple_seeds_differ():
    g = complete_graph(50)
    a = simulate_exponential(g, LinearRate(mu=1.0), 2.0, constant_drive(0.0),
                             t_end=5.0, seed=3)
    b = simulate_exponential(g, LinearRate(mu=1.0), 2.0, constant_drive(0.0),
                             t_end=5.0, seed=4)
    assert not np.array_equal(a.spike_counts, b.spike_counts)


def test_monotone_coupling_under_shared_proposals():
    # a fixed dominating rate ties proposals to the seed; a larger baseline
    # then accepts a superset of spikes, neuron by neuron
    g = complete_graph(50)
    for s in range(20):
        lo = simulate_exponential(g, LinearRate(mu=1.0), 2.0, constant_drive(0.0),
                                  t_end=10.0, seed=(31, s), uniform_bound=25.0)
        hi = simulate_exponential(g, LinearRate(mu=1.2), 2.0, constant_drive(0.0),
                                  t_end=10.0, seed=(31, s), uniform_bound=25.0)
        assert lo.stats["proposals"] == hi.stats["proposals"]
        assert np.all(hi.spike_counts >= lo.spike_counts)


def test_domination_breach_detected():
    g = complete_graph(50)
    with pytest.raises(DominationError):
        simulate_exponential(g, LinearRate(mu=1.0), 2.0, constant_drive(0.0),
                             t_end=10.0, seed=1, uniform_bound=0.9)


# ---------------------------------------------------------------------------
# termination statuses


def test_extinction_without_input():
    g = complete_graph(20)
    rec = simulate_exponential(g, LinearRate(mu=0.0), 2.0, constant_drive(0.0),
                               t_end=5.0, seed=0)
    assert rec.extinct
    assert rec.spike_counts.sum() == 0
    # extinction freezes the state; observation still runs to the horizon
    assert rec.t_final == pytest.approx(5.0)


def test_blowup_flag_supercritical():
    g = complete_graph(100)
    rec = simulate_exponential(g, LinearRate(mu=1.0), 0.5, constant_drive(0.0),
                               t_end=200.0, seed=1, blowup_intensity=50.0)
    assert rec.blown_up
    assert rec.t_final < 200.0


def test_spike_budget_stops_run():
    g = complete_graph(100)
    rec = simulate_exponential(g, LinearRate(mu=1.0), 2.0, constant_drive(0.0),
                               t_end=100.0, seed=1, max_spikes=500)
    assert rec.stats["accepts"] == 500
    assert not rec.extinct and not rec.blown_up
    assert rec.t_final < 100.0


def test_history_capacity_guard():
    g = complete_graph(50)
    h = TabulatedMemory.from_function(lambda t: np.exp(-t), 1e-3, 10.0)
    with pytest.raises(HistoryCapacityError):
        simulate_general_h(g, LinearRate(mu=1.0), h, constant_drive(0.0),
                           t_end=50.0, seed=1, history_cap=200)


# ---------------------------------------------------------------------------
# argument validation


def test_simulate_validation():
    g = complete_graph(10)
    with pytest.raises(ValueError):
        simulate_exponential(g, LinearRate(mu=1.0), 0.0, constant_drive(0.0), 1.0)
    with pytest.raises(ValueError):
        simulate_exponential(g, LinearRate(mu=1.0), 1.0, constant_drive(0.0), 1.0,
                             x0=np.full(10, -1.0))
    with pytest.raises(ValueError):
        simulate_exponential(g, LinearRate(mu=1.0), 1.0, constant_drive(0.0), 1.0,
                             x0=np.ones(7))
    with pytest.raises(ValueError):
        simulate_exponential(g, LinearRate(mu=1.0), 1.0, constant_drive(0.0), 1.0,
                             observers=ObserverPlan(q=15))
    with pytest.raises(ValueError):
        simulate_exponential(g, LinearRate(mu=1.0), 1.0, constant_drive(0.0), 1.0,
                             observers=ObserverPlan(xt=np.zeros((3, 3))))
    with pytest.raises(TypeError):
        simulate_exponential(g, lambda x, e: x, 1.0, constant_drive(0.0), 1.0)


def test_general_h_guards():
    big = complete_graph(GENERAL_SCALE_LIMIT + 1)
    h = TabulatedMemory.from_function(lambda t: np.exp(-t), 1e-2, 5.0)
    with pytest.raises(ValueError):
        simulate_general_h(big, LinearRate(mu=1.0), h, constant_drive(0.0), 1.0)
    g = complete_graph(10)
    with pytest.raises(ValueError):
        simulate_general_h(g, LinearRate(mu=1.0), h, constant_drive(0.0), 1.0,
                           observers=ObserverPlan(track_martingale=True))
    with pytest.raises(TypeError):
        simulate_general_h(g, LinearRate(mu=1.0), object(), constant_drive(0.0), 1.0)


# ---------------------------------------------------------------------------
# observables and helpers


def test_observer_lattice_and_targets():
    g = complete_graph(64)
    xinf = GridField.constant(1.0, 64)
    plan = ObserverPlan(obs_dt=0.5, x_inf=xinf, ell=GridField.constant(2.0, 64))
    rec = simulate_exponential(g, LinearRate(mu=1.0), 2.0, constant_drive(0.0),
                               t_end=10.0, observers=plan, seed=2)
    np.testing.assert_allclose(np.diff(rec.times), 0.5)
    assert rec.times[0] == 0.0
    assert np.all(np.isfinite(rec.dist_to_xinf))
    assert np.all(np.isfinite(rec.dist_lambda))
    # distance at t = 0 is exactly ||x_inf|| since currents start at zero
    assert rec.dist_to_xinf[0] == pytest.approx(1.0)
    assert rec.total_spikes[-1] == rec.spike_counts.sum()


def test_time_varying_target_observer():
    g = complete_graph(32)
    plan0 = ObserverPlan(obs_dt=1.0, q=32)
    n_obs = 11
    xt = np.zeros((n_obs, 32))
    plan = ObserverPlan(obs_dt=1.0, q=32, xt=xt)
    rec = simulate_exponential(g, LinearRate(mu=1.0), 2.0, constant_drive(0.0),
                               t_end=10.0, observers=plan, seed=3)
    assert rec.dist_to_xt.size == n_obs
    # distance to the zero target is the L2 norm of the current profile
    norm = math.sqrt(np.mean(rec.final_currents ** 2))
    assert rec.dist_to_xt[-1] == pytest.approx(norm, rel=1e-9)


def test_first_event_extinction_probability():
    # single self-coupled... no edges: rate x0 e^{-alpha t} integrates to x0/alpha
    g = _empty_graph(1)
    hits = 0
    reps = 4000
    for s in range(reps):
        t, site = first_event(g, LinearRate(mu=0.0), 1.0, constant_drive(0.0),
                              x0=np.array([1.0]), t_max=40.0, seed=(41, s))
        if site >= 0:
            hits += 1
            assert 0.0 < t < 40.0
    p_never = math.exp(-1.0)
    frac_never = 1.0 - hits / reps
    sd = math.sqrt(p_never * (1 - p_never) / reps)
    assert abs(frac_never - p_never) < 4 * sd


def test_stream_is_keyed():
    a = stream(1, 2).random(4)
    b = stream(1, 2).random(4)
    c = stream(1, 3).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
