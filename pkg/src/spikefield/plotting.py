"""Figures for experiment output directories.

Every plotter works from the CSV tables alone, in two forms: a standalone
gnuplot script (no library needed; renders to <kind>.gp.png when run) and a
matplotlib PNG rendered directly to <kind>.png.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path: Path) -> dict[str, list[str]]:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        cols = {name: [] for name in header}
        for row in rd:
            for name, v in zip(header, row):
                cols[name].append(v)
    return cols


def _floats(col: list[str]) -> list[float]:
    return [float(v) if v not in ("", "nan") else math.nan for v in col]


def _present(out_dir: Path, name: str) -> bool:
    return (out_dir / name).exists()


# ---------------------------------------------------------------------------
# gnuplot scripts


_GP_HEADER = """\
set datafile separator ","
set terminal pngcairo size 900,600
set key top right
"""


def _gp_stability(out: Path) -> str:
    return _GP_HEADER + f"""\
set output "stability.gp.png"
set logscale x
set xlabel "N"
set ylabel "exceedance fraction over [t_eps, T_N]"
set title "Long-time departure from the stationary profile"
plot "stability.csv" skip 1 using 1:6 with points pt 6 title "current profile", \\
     "stability.csv" skip 1 using 1:8 with points pt 2 title "intensity profile"
"""


def _gp_finite_time(out: Path) -> str:
    return _GP_HEADER + """\
set output "finite_time.gp.png"
set logscale xy
set xlabel "N rho_N"
set ylabel "median sup_t ||X_N - X_t||_2"
set title "Finite-horizon convergence to the field solution"
plot "finite_time_medians.csv" skip 1 using 3:4 with linespoints pt 7 title "median", \\
     "finite_time.csv" skip 1 using 1:3 with points pt 0 title "replicas"
"""


def _gp_phase(out: Path) -> str:
    return _GP_HEADER + """\
set output "phase.gp.png"
set xlabel "||h||_1"
set ylabel "tail mean intensity"
set title "Phase transition in the memory mass"
plot "phase.csv" skip 1 using 1:5 with points pt 7 ps 1.5 title "sampled", \\
     "phase.csv" skip 1 using 1:6 with lines title "closed form"
"""


def _gp_noise(out: Path) -> str:
    return _GP_HEADER + """\
set output "noise.gp.png"
set logscale xy
set xlabel "N rho_N"
set ylabel "median sup_t ||M_N||_2^2"
set title "Noise-term scaling"
plot "noise_medians.csv" skip 1 using 3:4 with linespoints pt 7 title "median", \\
     "noise.csv" skip 1 using 1:3 with points pt 0 title "replicas"
"""


def _gp_graph_diag(out: Path) -> str:
    return _GP_HEADER + """\
set output "graph_diag.gp.png"
set logscale xy
set xlabel "N"
set ylabel "kernel regularity sums"
set title "Discretization regularity of the connectivity kernel"
plot "graph_regularity.csv" skip 1 using 1:2 with linespoints title "R1", \\
     "graph_regularity.csv" skip 1 using 1:3 with linespoints title "R2", \\
     "graph_regularity.csv" skip 1 using 1:4 with linespoints title "S"
"""


def _gp_macro(out: Path) -> str:
    return _GP_HEADER + """\
set output "macro.gp.png"
set logscale y
set xlabel "t"
set ylabel "distance to the stationary profile"
set title "Field relaxation"
plot "macro_traj.csv" skip 1 using 1:2 with lines title "L2", \\
     "macro_traj.csv" skip 1 using 1:3 with lines title "sup"
"""


# ---------------------------------------------------------------------------
# matplotlib renderings


def _png_stability(out: Path) -> None:
    t = _read_csv(out / "stability.csv")
    ns = _floats(t["N"])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(ns, _floats(t["exceed_x"]), "o", alpha=0.4, label="current profile")
    ax.plot(ns, _floats(t["exceed_lambda"]), "x", alpha=0.4,
            label="intensity profile")
    ax.set_xscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("exceedance fraction")
    ax.set_title("Long-time departure from the stationary profile")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "stability.png", dpi=120)
    plt.close(fig)


def _png_finite_time(out: Path) -> None:
    m = _read_csv(out / "finite_time_medians.csv")
    r = _read_csv(out / "finite_time.csv")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.loglog(_floats(r["N"]), _floats(r["sup_dist"]), ".", alpha=0.3,
              label="replicas")
    ax.loglog(_floats(m["N_rho"]), _floats(m["median_sup_dist"]), "o-",
              label="median")
    ax.set_xlabel("N rho_N")
    ax.set_ylabel("sup distance to the field solution")
    ax.set_title("Finite-horizon convergence")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "finite_time.png", dpi=120)
    plt.close(fig)


def _png_phase(out: Path) -> None:
    t = _read_csv(out / "phase.csv")
    l1 = _floats(t["h_l1"])
    lev = _floats(t["tail_intensity"])
    closed = _floats(t["closed_form"])
    blown = [v == "1" for v in t["blown_up"]]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(l1, closed, "k--", label="closed form")
    ax.plot([x for x, b in zip(l1, blown) if not b],
            [y for y, b in zip(lev, blown) if not b], "o", label="sampled")
    for x, b in zip(l1, blown):
        if b:
            ax.axvline(x, color="tab:red", alpha=0.5)
    ax.plot([], [], color="tab:red", label="blow-up")
    ax.set_xlabel("||h||_1")
    ax.set_ylabel("tail mean intensity")
    ax.set_title("Phase transition in the memory mass")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "phase.png", dpi=120)
    plt.close(fig)


def _png_noise(out: Path) -> None:
    m = _read_csv(out / "noise_medians.csv")
    r = _read_csv(out / "noise.csv")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.loglog(_floats(r["N"]), _floats(r["sup_sq"]), ".", alpha=0.3,
              label="replicas")
    ax.loglog(_floats(m["N_rho"]), _floats(m["median_sup_sq"]), "o-",
              label="median")
    ax.set_xlabel("N rho_N")
    ax.set_ylabel("sup ||M_N||^2")
    ax.set_title("Noise-term scaling")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "noise.png", dpi=120)
    plt.close(fig)


def _png_graph_diag(out: Path) -> None:
    g = _read_csv(out / "graph_regularity.csv")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for col in ("R1", "R2", "S"):
        vals = _floats(g[col])
        if all(v == 0 for v in vals):
            continue
        ax.loglog(_floats(g["N"]), vals, "o-", label=col)
    ax.set_xlabel("N")
    ax.set_ylabel("regularity sum")
    ax.set_title("Kernel discretization regularity")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "graph_diag.png", dpi=120)
    plt.close(fig)


def _png_macro(out: Path) -> None:
    t = _read_csv(out / "macro_traj.csv")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.semilogy(_floats(t["t"]), _floats(t["dist_l2"]), label="L2")
    ax.semilogy(_floats(t["t"]), _floats(t["dist_linf"]), label="sup")
    ax.set_xlabel("t")
    ax.set_ylabel("distance to the stationary profile")
    ax.set_title("Field relaxation")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "macro.png", dpi=120)
    plt.close(fig)


_KINDS = {
    "stability": ("stability.csv", _gp_stability, _png_stability),
    "finite_time": ("finite_time_medians.csv", _gp_finite_time, _png_finite_time),
    "phase": ("phase.csv", _gp_phase, _png_phase),
    "noise": ("noise_medians.csv", _gp_noise, _png_noise),
    "graph_diag": ("graph_regularity.csv", _gp_graph_diag, _png_graph_diag),
    "macro": ("macro_traj.csv", _gp_macro, _png_macro),
}


def plot_all(out_dir) -> list[str]:
    """Emit a gnuplot script and render a PNG for every table found."""
    out = Path(out_dir)
    written = []
    for kind, (marker, gp_fn, png_fn) in _KINDS.items():
        if not _present(out, marker):
            continue
        gp_path = out / f"{kind}.gp"
        gp_path.write_text(gp_fn(out))
        written.append(str(gp_path))
        png_fn(out)
        written.append(str(out / f"{kind}.png"))
    return written
