"""Experiment configuration from TOML or JSON files, plus packaged presets.

A config file has sections [kernel], [rate], [memory], [drive], and
[experiment]; the same structure works as JSON.  Profile-valued entries
(drive profiles, product-kernel factors) accept a number (constant), a list
(ascending polynomial coefficients), or a string path to a two-column CSV.
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .experiments import ConfigError, ExperimentConfig
from .kernels import (BlockGraphon, ConstantGraphon, ConstantRate,
                      ExpDistanceGraphon, LinearRate, PNearestGraphon,
                      ProductGraphon, Profile, RelaxationDrive, SigmoidRate)

PRESETS = ("meanfield-linear", "erdos-renyi-diluted", "edd", "sbm")


def _profile(value, base: Path):
    if isinstance(value, str):
        return Profile.from_csv(base / value)
    return Profile.coerce(value)


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"[{where}] is missing required key {key!r}")
    return section[key]


def _build_kernel(sec: dict, base: Path):
    family = _require(sec, "family", "kernel")
    if family == "constant":
        return ConstantGraphon(float(_require(sec, "c", "kernel")))
    if family == "exp_distance":
        return ExpDistanceGraphon(float(_require(sec, "sigma", "kernel")))
    if family == "product":
        return ProductGraphon(_profile(_require(sec, "f", "kernel"), base),
                              _profile(_require(sec, "g", "kernel"), base))
    if family == "p_nearest":
        return PNearestGraphon(float(_require(sec, "r", "kernel")))
    if family == "block":
        return BlockGraphon(_require(sec, "boundaries", "kernel"),
                            _require(sec, "p", "kernel"))
    raise ConfigError(f"unknown kernel family {family!r}")


def _build_rate(sec: dict):
    family = _require(sec, "family", "rate")
    if family == "linear":
        return LinearRate(mu=float(sec.get("mu", 0.0)))
    if family == "sigmoid":
        return SigmoidRate(float(_require(sec, "lam_max", "rate")),
                           float(_require(sec, "slope", "rate")),
                           float(_require(sec, "theta", "rate")))
    if family == "constant":
        return ConstantRate(float(_require(sec, "c", "rate")))
    raise ConfigError(f"unknown rate family {family!r}")


def _build_drive(sec: dict, base: Path) -> RelaxationDrive:
    eta_inf = _profile(sec.get("eta_inf", 0.0), base)
    eta_0 = sec.get("eta_0")
    return RelaxationDrive(eta_inf=eta_inf,
                           eta_0=None if eta_0 is None else _profile(eta_0, base),
                           beta=float(sec.get("beta", 0.0)))


_EXPERIMENT_KEYS = {"kind", "sizes", "rho", "rho_power", "tau", "m", "t_f",
                    "eps", "t_end", "replicas", "master_seed", "grid_m",
                    "obs_dt", "h_l1_values", "pair_budget", "out_dir",
                    "threads", "label"}


def config_from_dict(raw: dict, base: Path = Path(".")) -> ExperimentConfig:
    for name in raw:
        if name not in ("kernel", "rate", "memory", "drive", "experiment"):
            raise ConfigError(f"unknown config section [{name}]")
    exp = dict(raw.get("experiment", {}))
    unknown = set(exp) - _EXPERIMENT_KEYS
    if unknown:
        raise ConfigError(f"unknown [experiment] keys: {sorted(unknown)}")
    if "sizes" in exp:
        exp["sizes"] = tuple(exp["sizes"])
    if "h_l1_values" in exp:
        exp["h_l1_values"] = tuple(exp["h_l1_values"])
    if "rho_power" in exp and "rho" not in exp:
        exp["rho"] = None
    mem = raw.get("memory", {})
    try:
        return ExperimentConfig(
            kernel=_build_kernel(raw.get("kernel", {"family": "constant", "c": 1.0}),
                                 base),
            F=_build_rate(raw.get("rate", {"family": "linear", "mu": 1.0})),
            alpha=float(mem.get("alpha", 2.0)),
            drive=_build_drive(raw.get("drive", {}), base),
            **exp)
        # noqa: the dataclass validates ranges itself
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from e


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a TOML or JSON config file; overrides patch [experiment] keys."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix == ".json":
        raw = json.loads(path.read_text())
    else:
        with open(path, "rb") as fh:
            try:
                raw = tomllib.load(fh)
            except tomllib.TOMLDecodeError as e:
                raise ConfigError(f"bad TOML in {path}: {e}") from e
    return _apply_overrides(raw, overrides, path.parent)


def load_preset(name: str, overrides: dict | None = None) -> ExperimentConfig:
    """One of the packaged presets, by name."""
    if name not in PRESETS:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    ref = resources.files("spikefield").joinpath(f"presets/{name}.toml")
    raw = tomllib.loads(ref.read_text())
    return _apply_overrides(raw, overrides, Path("."))


def load(source, overrides: dict | None = None) -> ExperimentConfig:
    """Accept either a preset name or a config file path."""
    if isinstance(source, (str, Path)) and str(source) in PRESETS:
        return load_preset(str(source), overrides)
    return load_config(source, overrides)


def _apply_overrides(raw: dict, overrides: dict | None, base: Path):
    if overrides:
        exp = dict(raw.get("experiment", {}))
        for k, v in overrides.items():
            if v is not None:
                exp[k] = v
        raw = {**raw, "experiment": exp}
    return config_from_dict(raw, base)
