"""Command-line entry point.

    spikefield check meanfield-linear
    spikefield stability my_config.toml --seed 7 --out-dir runs/s7
    spikefield plot runs/s7

The first argument of every experiment subcommand is a config file path or a
packaged preset name.  Exit codes: 0 success, 2 config error, 3 supercritical
gate, 4 internal invariant breach.
"""
from __future__ import annotations

import argparse
import sys

from . import config as config_mod
from .experiments import ConfigError, SupercriticalError, run_experiment
from .kernels import KernelError
from .micro import DominationError

_COMMANDS = {
    "check": ("check", "subcriticality and dilution report"),
    "macro": ("macro", "stationary profiles and field relaxation"),
    "stability": ("stability", "long-time profile departure statistics"),
    "finite-time": ("finite_time", "finite-horizon field convergence"),
    "phase": ("phase", "intensity level across memory masses"),
    "noise": ("noise_scaling", "martingale-term scaling"),
    "graph-diag": ("graph_diag", "degree and regularity diagnostics"),
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="spikefield",
        description="Simulation and limit checks for spiking networks on "
                    "sampled interaction graphs.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in _COMMANDS.items():
        s = sub.add_parser(name, help=help_text)
        s.add_argument("config",
                       help="config file (.toml/.json) or preset name "
                            f"({', '.join(config_mod.PRESETS)})")
        s.add_argument("--seed", type=int, default=None,
                       help="override the master seed")
        s.add_argument("--out-dir", default=None,
                       help="override the output directory")
        s.add_argument("--threads", type=int, default=None,
                       help="worker threads for the replica grid")
    s = sub.add_parser("plot", help="emit gnuplot scripts and render PNGs "
                                    "for an output directory")
    s.add_argument("out_dir", help="directory holding experiment CSVs")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "plot":
        from .plotting import plot_all
        written = plot_all(args.out_dir)
        if not written:
            print(f"no experiment tables found in {args.out_dir}",
                  file=sys.stderr)
            return 2
        for f in written:
            print(f"wrote {f}")
        return 0

    kind = _COMMANDS[args.command][0]
    overrides = {"kind": kind, "master_seed": args.seed,
                 "out_dir": args.out_dir, "threads": args.threads}
    try:
        cfg = config_mod.load(args.config, overrides)
        result = run_experiment(cfg)
    except (ConfigError, KernelError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except SupercriticalError as e:
        print(f"supercritical: {e}", file=sys.stderr)
        return 3
    except DominationError as e:
        print(f"invariant breach: {e}", file=sys.stderr)
        return 4

    for key, val in sorted(result.summary.items()):
        if isinstance(val, dict):
            for k2, v2 in sorted(val.items()):
                if isinstance(v2, (bool, int, float, str)):
                    print(f"{key}.{k2}={v2}")
        elif isinstance(val, (bool, int, float, str)):
            print(f"{key}={val}")
    for f in result.files:
        print(f"wrote {f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
