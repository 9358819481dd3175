"""Config loading, the experiment runners, plotting, and the CLI.

Runner smoke tests use deliberately small networks and short horizons; the
statistical claims themselves live in the acceptance suite.
"""
import json
import math
from pathlib import Path

import numpy as np
import pytest

from spikefield.config import (PRESETS, config_from_dict, load, load_config,
                               load_preset)
from spikefield.experiments import (ConfigError, ExperimentConfig,
                                    SupercriticalError, _seed_int, run_experiment,
                                    run_finite_time, run_graph_diag, run_macro,
                                    run_noise_scaling, run_phase, run_stability)
from spikefield.kernels import (BlockGraphon, ConstantGraphon, ConstantRate,
                                ExpDistanceGraphon, LinearRate, PNearestGraphon,
                                ProductGraphon, SigmoidRate, constant_drive)
from spikefield.operator import build_operator, stability_report
from spikefield.plotting import plot_all


# ---------------------------------------------------------------------------
# ExperimentConfig validation


def test_config_defaults():
    cfg = ExperimentConfig()
    assert cfg.kind == "check"
    assert isinstance(cfg.kernel, ConstantGraphon)
    assert isinstance(cfg.F, LinearRate)
    assert cfg.rho_of(250) == 1.0


def test_config_rho_power():
    cfg = ExperimentConfig(rho=None, rho_power=0.25)
    assert cfg.rho_of(16) == pytest.approx(16.0 ** -0.25)
    assert cfg.rho_of(10_000) == pytest.approx(0.1)


@pytest.mark.parametrize("bad", [
    {"kind": "sweep"},
    {"eps": 0.0},
    {"eps": -1.0},
    {"replicas": 0},
    {"sizes": (8, 250)},
    {"alpha": 0.0},
    {"m": 0},
    {"rho": 0.5, "rho_power": 0.25},   # both given
    {"rho": None},                     # neither given
    {"rho": 1.5},
    {"rho": 0.0},
])
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig(**bad)


def test_seed_int_deterministic():
    a = _seed_int(3, 250, 7, 1)
    assert a == _seed_int(3, 250, 7, 1)
    assert a != _seed_int(3, 250, 7, 2)
    assert isinstance(a, int) and 0 <= a < 2 ** 64


# ---------------------------------------------------------------------------
# config files and presets


def test_config_from_dict_kernels():
    base = Path(".")
    for sec, typ in [
        ({"family": "constant", "c": 0.5}, ConstantGraphon),
        ({"family": "exp_distance", "sigma": 0.7}, ExpDistanceGraphon),
        ({"family": "product", "f": [0.25, 0.5], "g": 1.0}, ProductGraphon),
        ({"family": "p_nearest", "r": 0.2}, PNearestGraphon),
        ({"family": "block", "boundaries": [0.5],
          "p": [[0.9, 0.1], [0.1, 0.9]]}, BlockGraphon),
    ]:
        cfg = config_from_dict({"kernel": sec}, base)
        assert isinstance(cfg.kernel, typ)


def test_config_from_dict_rates():
    assert isinstance(config_from_dict(
        {"rate": {"family": "sigmoid", "lam_max": 2.0, "slope": 1.0,
                  "theta": 1.0}}).F, SigmoidRate)
    assert isinstance(config_from_dict(
        {"rate": {"family": "constant", "c": 1.5}}).F, ConstantRate)


def test_config_from_dict_drive_and_memory():
    cfg = config_from_dict({"memory": {"alpha": 3.0},
                            "drive": {"eta_inf": 0.2, "eta_0": 1.0,
                                      "beta": 2.0}})
    assert cfg.alpha == 3.0
    assert cfg.drive.beta == 2.0
    assert cfg.drive.eta_inf(0.5) == pytest.approx(0.2)


@pytest.mark.parametrize("raw", [
    {"typo_section": {}},
    {"experiment": {"not_a_key": 1}},
    {"kernel": {"family": "moebius"}},
    {"kernel": {"family": "constant"}},          # missing c
    {"rate": {"family": "sigmoid"}},             # missing lam_max
    {"experiment": {"sizes": ["x"]}},            # non-numeric size
])
def test_config_from_dict_rejects(raw):
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_load_config_toml_and_json(tmp_path):
    toml = tmp_path / "a.toml"
    toml.write_text(
        '[kernel]\nfamily = "constant"\nc = 0.5\n'
        '[rate]\nfamily = "linear"\nmu = 1.0\n'
        '[memory]\nalpha = 4.0\n'
        '[experiment]\nkind = "check"\nsizes = [32, 64]\n')
    cfg = load_config(toml)
    assert cfg.alpha == 4.0 and cfg.sizes == (32, 64)

    js = tmp_path / "a.json"
    js.write_text(json.dumps({
        "kernel": {"family": "constant", "c": 0.5},
        "memory": {"alpha": 4.0},
        "experiment": {"kind": "check", "sizes": [32, 64]}}))
    cfg2 = load_config(js)
    assert cfg2.alpha == 4.0 and cfg2.sizes == (32, 64)


def test_load_config_profile_path(tmp_path):
    # profile entries may point at a CSV relative to the config file
    (tmp_path / "f.csv").write_text("x,value\n0.0,0.25\n1.0,0.5\n")
    toml = tmp_path / "b.toml"
    toml.write_text('[kernel]\nfamily = "product"\nf = "f.csv"\ng = 1.0\n')
    cfg = load_config(toml)
    assert cfg.kernel(1.0, 0.0) == pytest.approx(0.5)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("not valid [toml\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_presets_load_and_are_subcritical():
    kinds = set()
    for name in PRESETS:
        cfg = load_preset(name)
        kinds.add(cfg.kind)
        op = build_operator(cfg.kernel, cfg.grid_m)
        from spikefield.kernels import ExponentialMemory
        rep = stability_report(op, cfg.F, ExponentialMemory(cfg.alpha))
        assert rep.subcritical, name
    assert "stability" in kinds and "graph_diag" in kinds


def test_preset_unknown():
    with pytest.raises(ConfigError):
        load_preset("banana")


def test_load_dispatch_and_overrides():
    cfg = load("meanfield-linear",
               {"kind": "check", "master_seed": 9, "out_dir": "xyz",
                "threads": None})
    assert cfg.kind == "check"
    assert cfg.master_seed == 9
    assert cfg.out_dir == "xyz"
    assert cfg.threads == 1          # None overrides are dropped


def test_preset_rho_power_has_no_rho():
    cfg = load_preset("erdos-renyi-diluted")
    assert cfg.rho is None and cfg.rho_power is not None


# ---------------------------------------------------------------------------
# runners


def _read_rows(path):
    lines = Path(path).read_text().strip().split("\n")
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


def test_run_check(tmp_path):
    cfg = ExperimentConfig(kind="check", sizes=(64, 256), grid_m=64,
                           out_dir=str(tmp_path))
    res = run_experiment(cfg)
    assert res.kind == "check"
    header, rows = _read_rows(tmp_path / "check.csv")
    assert header == ["N", "rho", "scale", "comfortable"]
    # scale n^(1-2 tau) rho^4 = sqrt(n) here; comfortable means >= 10
    assert rows[0] == ["64", "1.0", "8.0", "0"]
    assert rows[1] == ["256", "1.0", "16.0", "1"]
    payload = json.loads((tmp_path / "check.json").read_text())
    assert payload["stability"]["subcritical"] is True
    assert payload["stability"]["gamma"] == pytest.approx(1.0)


def test_run_macro_meanfield(tmp_path):
    cfg = ExperimentConfig(kind="macro", grid_m=64, out_dir=str(tmp_path))
    run_macro(cfg)
    header, rows = _read_rows(tmp_path / "macro_profile.csv")
    assert header == ["node", "x_inf", "ell"]
    x = np.array([float(r[1]) for r in rows])
    ell = np.array([float(r[2]) for r in rows])
    assert np.max(np.abs(x - 1.0)) < 1e-10
    assert np.max(np.abs(ell - 2.0)) < 1e-10
    payload = json.loads((tmp_path / "macro.json").read_text())
    assert payload["residual"] < 1e-12
    # relaxation from zero: sup distance e^{-t} crosses eps/4 at log 16
    assert payload["t_eps"] == pytest.approx(math.log(16.0), abs=0.02)
    header, rows = _read_rows(tmp_path / "macro_traj.csv")
    assert header == ["t", "dist_l2", "dist_linf"]
    assert float(rows[-1][1]) < 1e-6


def test_run_macro_t_eps_nan_when_unreached(tmp_path):
    cfg = ExperimentConfig(kind="macro", grid_m=16, eps=1e-9,
                           out_dir=str(tmp_path))
    run_macro(cfg)
    payload = json.loads((tmp_path / "macro.json").read_text())
    assert math.isnan(payload["t_eps"])


def test_run_macro_supercritical_gate(tmp_path):
    cfg = ExperimentConfig(kind="macro", alpha=0.5, grid_m=16,
                           out_dir=str(tmp_path))
    with pytest.raises(SupercriticalError):
        run_macro(cfg)
    cfg2 = ExperimentConfig(kind="stability", alpha=0.5, grid_m=16,
                            out_dir=str(tmp_path))
    with pytest.raises(SupercriticalError):
        run_stability(cfg2)


def test_run_stability_smoke(tmp_path):
    cfg = ExperimentConfig(kind="stability", sizes=(24, 32), replicas=2,
                           t_f=0.2, grid_m=64, master_seed=1,
                           out_dir=str(tmp_path))
    res = run_stability(cfg)
    header, rows = _read_rows(tmp_path / "stability.csv")
    assert header == ["N", "replica", "t_eps", "T_N", "sup_x", "exceed_x",
                      "sup_lambda", "exceed_lambda", "window_samples",
                      "verdict"]
    assert len(rows) == 4
    for r in rows:
        assert r[9] in ("ok", "exceeded")      # mu = 1 rules out extinction
        assert int(r[8]) > 0
        assert float(r[4]) > 0.0
    # the horizon is ceil(N rho) t_f + t_eps
    t_eps = float(rows[0][2])
    assert float(rows[0][3]) == pytest.approx(24 * 0.2 + t_eps)
    assert float(rows[-1][3]) == pytest.approx(32 * 0.2 + t_eps)
    summary = json.loads((tmp_path / "stability_summary.json").read_text())
    assert set(summary["per_N"]) == {"24", "32"}
    for stats in summary["per_N"].values():
        assert 0.0 <= stats["mean_exceed_x"] <= 1.0
        assert 0.0 <= stats["zero_exceed_share_lambda"] <= 1.0
    assert res.summary["t_eps"] == pytest.approx(t_eps)


def test_run_finite_time_smoke_and_determinism(tmp_path):
    def make(out):
        return ExperimentConfig(kind="finite_time", sizes=(16, 32),
                                replicas=2, t_end=2.0, grid_m=32,
                                master_seed=3, out_dir=str(out))

    run_finite_time(make(tmp_path / "a"))
    run_finite_time(make(tmp_path / "b"))
    for name in ("finite_time.csv", "finite_time_medians.csv",
                 "finite_time_summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == \
               (tmp_path / "b" / name).read_bytes()

    header, rows = _read_rows(tmp_path / "a" / "finite_time.csv")
    assert header == ["N", "replica", "sup_dist", "final_dist"]
    assert len(rows) == 4
    assert all(float(r[2]) >= float(r[3]) >= 0.0 for r in rows)
    header, med = _read_rows(tmp_path / "a" / "finite_time_medians.csv")
    assert header == ["N", "rho", "N_rho", "median_sup_dist"]
    assert [m[0] for m in med] == ["16", "32"]
    summary = json.loads(
        (tmp_path / "a" / "finite_time_summary.json").read_text())
    assert math.isfinite(summary["slope"])


def test_run_finite_time_threads_identical(tmp_path):
    def make(out, threads):
        return ExperimentConfig(kind="finite_time", sizes=(16,), replicas=3,
                                t_end=1.0, grid_m=32, master_seed=4,
                                threads=threads, out_dir=str(out))

    run_finite_time(make(tmp_path / "t1", 1))
    run_finite_time(make(tmp_path / "t3", 3))
    assert (tmp_path / "t1" / "finite_time.csv").read_bytes() == \
           (tmp_path / "t3" / "finite_time.csv").read_bytes()


def test_run_phase_smoke(tmp_path):
    cfg = ExperimentConfig(kind="phase", sizes=(16,), grid_m=32,
                           h_l1_values=(0.5, 1.25), master_seed=5,
                           out_dir=str(tmp_path))
    res = run_phase(cfg)
    header, rows = _read_rows(tmp_path / "phase.csv")
    assert header == ["h_l1", "alpha", "N", "t_end", "tail_intensity",
                      "closed_form", "rel_err", "blown_up", "macro_cross_t"]
    sub, sup = rows
    assert float(sub[1]) == pytest.approx(2.0)       # alpha = 1 / ||h||_1
    assert float(sub[5]) == pytest.approx(2.0)       # mu / (1 - 1/2)
    assert sub[7] == "0"
    assert float(sub[6]) < 0.5                       # N = 16 is noisy
    assert sup[7] == "1"                             # above critical mass
    cross = float(sup[8])
    assert math.isfinite(cross) and 5.0 < cross < 30.0
    assert res.summary["r_inf"] == pytest.approx(1.0, abs=1e-6)


def test_run_phase_needs_linear_positive_mu():
    with pytest.raises(ConfigError):
        run_phase(ExperimentConfig(kind="phase", F=ConstantRate(1.0)))
    with pytest.raises(ConfigError):
        run_phase(ExperimentConfig(kind="phase", F=LinearRate(mu=0.0)))


def test_run_noise_scaling_constant_rate(tmp_path):
    cfg = ExperimentConfig(kind="noise_scaling", F=ConstantRate(1.0),
                           alpha=1.0, sizes=(32, 64), replicas=6, t_end=2.0,
                           grid_m=16, master_seed=6, out_dir=str(tmp_path))
    run_noise_scaling(cfg)
    header, rows = _read_rows(tmp_path / "noise.csv")
    assert header == ["N", "replica", "sup_sq", "final_sq", "edges"]
    assert len(rows) == 12
    # the dense kernel keeps every possible edge, self-loops included
    assert all(int(r[4]) == int(r[0]) ** 2 for r in rows)
    header, med = _read_rows(tmp_path / "noise_medians.csv")
    assert header == ["N", "rho", "N_rho", "median_sup_sq", "mean_final_sq",
                      "closed_form_final"]
    for m in med:
        n = int(m[0])
        closed = float(m[5])
        assert closed == pytest.approx(2.0 / n)      # c T edges / (n^3 rho^2)
        assert 0.1 * closed < float(m[4]) < 4.0 * closed
    summary = json.loads((tmp_path / "noise_summary.json").read_text())
    assert math.isfinite(summary["slope"])


def test_run_graph_diag_smoke(tmp_path):
    cfg = ExperimentConfig(kind="graph_diag", kernel=ConstantGraphon(0.5),
                           rho=None, rho_power=0.25, sizes=(32, 64),
                           replicas=2, grid_m=16, master_seed=7,
                           out_dir=str(tmp_path))
    run_graph_diag(cfg)
    header, rows = _read_rows(tmp_path / "graph_diag.csv")
    assert header == ["N", "replica", "max_norm_in", "max_norm_out",
                      "concentrated", "s_max", "s_max_bound", "within_bound"]
    assert len(rows) == 4
    for r in rows:
        assert r[4] == "1" and r[7] == "1"
        assert 0.0 < float(r[5]) < float(r[6])
    header, reg = _read_rows(tmp_path / "graph_regularity.csv")
    assert header == ["N", "R1", "R2", "S"]
    # a constant kernel has no within-cell variation at all
    for r in reg:
        assert float(r[1]) == 0.0 and float(r[2]) == 0.0 and float(r[3]) == 0.0
    summary = json.loads((tmp_path / "graph_diag_summary.json").read_text())
    assert summary["per_N"]["64"]["within_bound_share"] == 1.0


# ---------------------------------------------------------------------------
# plotting


def test_plot_all_macro_and_finite_time(tmp_path):
    mac = tmp_path / "mac"
    ExperimentConfig(kind="macro", grid_m=16, out_dir=str(mac))
    run_macro(ExperimentConfig(kind="macro", grid_m=16, out_dir=str(mac)))
    written = plot_all(mac)
    assert str(mac / "macro.gp") in written
    assert str(mac / "macro.png") in written
    assert 'plot "' in (mac / "macro.gp").read_text()
    assert (mac / "macro.png").stat().st_size > 1000

    fin = tmp_path / "fin"
    run_finite_time(ExperimentConfig(kind="finite_time", sizes=(16,),
                                     replicas=2, t_end=1.0, grid_m=16,
                                     master_seed=8, out_dir=str(fin)))
    written = plot_all(fin)
    assert sorted(Path(w).name for w in written) == \
        ["finite_time.gp", "finite_time.png"]


def test_plot_all_empty_dir(tmp_path):
    assert plot_all(tmp_path) == []


# ---------------------------------------------------------------------------
# command line


def test_cli_check_preset(tmp_path, capsys):
    from spikefield.cli import main
    rc = main(["check", "meanfield-linear", "--out-dir", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "wrote" in out and (tmp_path / "check.csv").exists()


def test_cli_unknown_config(capsys):
    from spikefield.cli import main
    assert main(["check", "no-such-preset-or-file"]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_supercritical_exit(tmp_path, capsys):
    from spikefield.cli import main
    toml = tmp_path / "super.toml"
    toml.write_text(
        '[rate]\nfamily = "linear"\nmu = 1.0\n'
        '[memory]\nalpha = 0.5\n'
        '[experiment]\ngrid_m = 16\n')
    rc = main(["macro", str(toml), "--out-dir", str(tmp_path)])
    assert rc == 3
    assert "supercritical" in capsys.readouterr().err


def test_cli_plot(tmp_path, capsys):
    from spikefield.cli import main
    assert main(["plot", str(tmp_path)]) == 2
    capsys.readouterr()
    run_macro(ExperimentConfig(kind="macro", grid_m=16,
                               out_dir=str(tmp_path)))
    assert main(["plot", str(tmp_path)]) == 0
    assert "macro.png" in capsys.readouterr().out


def test_cli_seed_override(tmp_path):
    from spikefield.cli import main
    a, b = tmp_path / "a", tmp_path / "b"
    toml = tmp_path / "ft.toml"
    toml.write_text(
        '[experiment]\nkind = "finite_time"\nsizes = [16]\nreplicas = 2\n'
        't_end = 1.0\ngrid_m = 16\n')
    assert main(["finite-time", str(toml), "--seed", "11",
                 "--out-dir", str(a)]) == 0
    assert main(["finite-time", str(toml), "--seed", "12",
                 "--out-dir", str(b)]) == 0
    assert (a / "finite_time.csv").read_bytes() != \
           (b / "finite_time.csv").read_bytes()
