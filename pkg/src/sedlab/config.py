"""Flat key = value run configuration with per-experiment defaults."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .dynamics import PotentialModel, auto_dt, step_grid
from .units import TAU_E
from .zeropoint import FieldSpec, ModeEnsemble, sample_modes

EXPERIMENTS = ("hydrogen", "oscillator", "field-check", "nearfield", "inspiral")
# keys that change how a run executes but never what it computes
EXECUTION_KEYS = ("workers", "out_dir")


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _vector(text: str) -> np.ndarray:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated numbers, got {text!r}")
    return np.array([float(p) for p in parts])


def _auto_float(text: str):
    return None if text.strip().lower() == "auto" else float(text)


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        text = text.strip()
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


def _int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


_HYDROGEN_T_END = repr(2000.0 * math.pi)

# key: (parser, default or {experiment: default, "*": fallback}, help)
KEYS: dict[str, tuple[Callable[[str], Any], Any, str]] = {
    "seed": (_int, "1", "master seed; per-trajectory seeds are hashed from it"),
    "n_traj": (_int, {"oscillator": "200", "hydrogen": "50", "*": "1"}, "number of trajectories"),
    "t_end": (float, {"oscillator": "1000.0", "hydrogen": _HYDROGEN_T_END,
                      "inspiral": _HYDROGEN_T_END, "*": "0.0"}, "integration time (t_au)"),
    "potential": (_choice("coulomb", "harmonic", "free"),
                  {"oscillator": "harmonic", "hydrogen": "coulomb", "inspiral": "coulomb",
                   "*": "free"}, "binding potential"),
    "omega": (float, "1.0", "harmonic frequency (1/t_au)"),
    "field": (_bool, {"inspiral": "off", "*": "on"}, "zero-point field on/off"),
    "omega_min": (float, "0.3", "lower edge of the field window"),
    "omega_max": (float, "3.0", "upper edge of the field window"),
    "n_freq": (_int, {"hydrogen": "3000", "*": "600"}, "frequency cells in the window"),
    "n_dir": (_int, "16", "propagation directions per frequency"),
    "jitter": (float, "0.5", "random offset of each frequency inside its cell, [0, 1)"),
    "radiation": (_bool, "on", "radiation reaction and Larmor loss on/off"),
    "dt": (_auto_float, "auto", "time step; auto = min(field period, orbital period)/200"),
    "stride": (_int, "37", "record a sample every this many steps"),
    "r_ionize": (float, "25.0", "radius (a0) beyond which a run counts as ionized"),
    "r_collapse": (float, "0.001", "radius (a0) below which a Coulomb run counts as diverged; "
                   "never below the radius the step resolves, (10 dt / 2 pi)^(2/3)"),
    "burn_in": (_auto_float, "auto", "time excluded from statistics; auto = 50 periods"),
    "init": (_choice("circular", "stationary", "rest"),
             {"oscillator": "stationary", "*": "circular"}, "initial condition"),
    "r0": (float, "1.0", "initial (pericenter) radius for Coulomb starts"),
    "eccentricity": (float, "0.0", "initial orbit eccentricity"),
    "pairing": (_choice("none", "antithetic"), {"oscillator": "antithetic", "*": "none"},
                "antithetic: trajectories 2k, 2k+1 share a field with mirrored starts"),
    "stratify": (_bool, {"oscillator": "on", "*": "off"},
                 "stratify stationary initial energies across field groups"),
    "hist_min": (float, {"oscillator": "-3.0", "*": "0.0"}, "lower histogram edge"),
    "hist_max": (float, {"oscillator": "3.0", "*": "6.0"}, "upper histogram edge"),
    "hist_bins": (_int, {"oscillator": "60", "*": "120"}, "histogram bin count"),
    "allow_recurrence": (_bool, "off", "permit t_end beyond the field recurrence time"),
    "n_samples": (_int, "10000", "field-check: resampled ensembles"),
    "n_times": (_int, "4", "field-check: evaluation times per ensemble"),
    "time_spacing": (float, "10.0", "field-check: spacing of evaluation times (t_au)"),
    "particle": (_choice("electron", "positron", "proton", "neutron", "neutrino", "custom"),
                 "electron", "nearfield: particle preset"),
    "z": (_int, "auto", "nearfield: charge number (auto = preset)"),
    "mass": (_auto_float, "auto", "nearfield: mass in electron masses (auto = preset)"),
    "g": (_auto_float, "auto", "nearfield: g-factor (auto = preset)"),
    "spin": (_vector, "0,0,0.5", "nearfield: spin vector (units of hbar)"),
    "moment": (str, "auto", "nearfield: magnetic moment override x,y,z (auto = preset)"),
    "point": (_vector, "1,0,0", "nearfield: evaluation point relative to the particle (a0)"),
    "velocity": (_vector, "0,0,0", "nearfield: particle velocity"),
    "accel": (_vector, "0,0,0", "nearfield: particle acceleration"),
    "workers": (_int, "1", "worker processes"),
    "out_dir": (str, "auto", "output directory (auto = runs/<experiment>-seed<seed>)"),
}


def default_value(key: str, experiment: str) -> str:
    default = KEYS[key][1]
    if isinstance(default, dict):
        return default.get(experiment, default["*"])
    return default


def describe_keys() -> str:
    lines = []
    for key, (_, default, text) in KEYS.items():
        if isinstance(default, dict):
            shown = ", ".join(f"{k}={v}" for k, v in default.items() if k != "*")
            shown = f"{shown}, else {default['*']}" if shown else default["*"]
        else:
            shown = default
        lines.append(f"  {key:<17} {text} [default: {shown}]")
    return "\n".join(lines)


@dataclass(frozen=True, eq=False)
class RunConfig:
    experiment: str
    field_spec: FieldSpec
    potential: PotentialModel
    n_traj: int
    t_end: float
    dt: float | None
    r_ionize: float
    burn_in: float
    stride: int
    seed: int
    out_dir: Path
    workers: int
    field_on: bool = True
    radiation: bool = True
    r_collapse: float = 1e-3
    init: str = "circular"
    r0: float = 1.0
    eccentricity: float = 0.0
    pairing: str = "none"
    stratify: bool = False
    hist_edges: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 6.0, 121))
    allow_recurrence: bool = False
    n_samples: int = 10000
    n_times: int = 4
    time_spacing: float = 10.0
    nearfield: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)

    @property
    def tau(self) -> float:
        return TAU_E if self.radiation else 0.0

    @property
    def period(self) -> float:
        return self.potential.period(self.r0)

    def dt_max(self) -> float:
        if self.dt is not None:
            return self.dt
        return auto_dt(self.potential, self.field_spec.omega_max if self.field_on else None, self.r0)

    def step_grid(self) -> tuple[float, int]:
        return step_grid(self.t_end, self.dt_max())

    def sample_field(self, rng: np.random.Generator) -> ModeEnsemble:
        if not self.field_on:
            return ModeEnsemble.empty(self.field_spec)
        return sample_modes(self.field_spec, rng)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, field_spec=replace(self.field_spec, seed=seed))

    def echo(self) -> list[tuple[str, str]]:
        """Materialized key/value pairs, minus execution-only keys."""
        return [(k, v) for k, v in self.values.items() if k not in EXECUTION_KEYS]


def read_config_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    items: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        items[key] = value
    return items


def parse_overrides(pairs) -> dict[str, str]:
    items = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        key, value = (part.strip() for part in pair.split("=", 1))
        items[key] = value
    return items


def parse_config(experiment: str, path=None, overrides=None, **flags) -> RunConfig:
    """Build a validated :class:`RunConfig`.

    Precedence, lowest first: defaults, ``path``, ``overrides`` (``key=value``
    strings or a mapping), then keyword ``flags`` such as ``seed=3``.
    """
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}",
                          "experiment")
    raw: dict[str, str] = {}
    if path is not None:
        raw.update(read_config_file(path))
    if isinstance(overrides, dict):
        raw.update({k: str(v) for k, v in overrides.items()})
    else:
        raw.update(parse_overrides(overrides))
    raw.update({k: str(v) for k, v in flags.items() if v is not None})

    unknown = sorted(set(raw) - set(KEYS))
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r}", unknown[0])

    text = {key: raw.get(key, default_value(key, experiment)) for key in KEYS}
    val: dict[str, Any] = {}
    for key, (parser, _, _) in KEYS.items():
        if key in ("z",) and text[key].strip().lower() == "auto":
            val[key] = None
            continue
        if key == "moment":
            val[key] = None if text[key].strip().lower() == "auto" else _vector_or_error(text[key])
            continue
        try:
            val[key] = parser(text[key])
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", key) from None
    return _build(experiment, val, text)


def _vector_or_error(text):
    try:
        return _vector(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for 'moment': {exc}", "moment") from None


def _require(ok: bool, key: str, message: str):
    if not ok:
        raise ConfigError(f"{key}: {message}", key)


def _build(experiment: str, val: dict, text: dict) -> RunConfig:
    _require(val["n_traj"] >= 1, "n_traj", "must be at least 1")
    _require(val["t_end"] >= 0, "t_end", "must be non-negative")
    _require(val["seed"] >= 0 and val["seed"] < 2**64, "seed", "must be an unsigned 64-bit integer")
    _require(val["omega"] > 0, "omega", "must be positive")
    _require(val["omega_min"] > 0, "omega_min", "must be positive")
    if not val["omega_min"] < val["omega_max"]:
        raise ConfigError(
            f"omega_min ({val['omega_min']}) must be below omega_max ({val['omega_max']})",
            "omega_min/omega_max",
        )
    _require(val["n_freq"] >= 1, "n_freq", "must be at least 1")
    _require(val["n_dir"] >= 1, "n_dir", "must be at least 1")
    _require(0 <= val["jitter"] < 1, "jitter", "must lie in [0, 1)")
    _require(val["stride"] >= 1, "stride", "must be at least 1")
    _require(val["r_ionize"] > 0, "r_ionize", "must be positive")
    _require(val["r_collapse"] >= 0, "r_collapse", "must be non-negative")
    _require(val["r0"] > 0, "r0", "must be positive")
    _require(0 <= val["eccentricity"] < 1, "eccentricity", "must lie in [0, 1)")
    _require(val["workers"] >= 1, "workers", "must be at least 1")
    _require(val["hist_bins"] >= 1, "hist_bins", "must be at least 1")
    _require(val["hist_min"] < val["hist_max"], "hist_min", "must be below hist_max")
    _require(val["n_samples"] >= 1, "n_samples", "must be at least 1")
    _require(val["n_times"] >= 1, "n_times", "must be at least 1")
    if val["dt"] is not None:
        _require(val["dt"] > 0, "dt", "must be positive")
    if val["burn_in"] is not None:
        _require(val["burn_in"] >= 0, "burn_in", "must be non-negative")

    spec = FieldSpec(val["omega_min"], val["omega_max"], val["n_freq"], val["n_dir"],
                     val["jitter"], val["seed"])
    potential = PotentialModel(val["potential"], val["omega"] if val["potential"] == "harmonic" else None)
    if val["init"] == "stationary":
        _require(val["potential"] == "harmonic", "init", "stationary starts need a harmonic potential")

    if val["field"] and val["dt"] is not None:
        limit = 0.05 * 2.0 * math.pi / val["omega_max"]
        _require(val["dt"] <= limit, "dt", f"must not exceed 0.05 of the shortest field period ({limit:.6g})")
    uses_field = val["field"] and experiment in ("hydrogen", "oscillator")
    if uses_field and not val["allow_recurrence"]:
        _require(val["t_end"] < spec.recurrence_time, "t_end",
                 f"{val['t_end']} reaches the field recurrence time {spec.recurrence_time:.6g} "
                 "(2 pi / frequency spacing); raise n_freq, narrow the window, or pass "
                 "--allow-recurrence")

    period = potential.period(val["r0"])
    burn_in = 50.0 * period if val["burn_in"] is None else val["burn_in"]
    out_dir = Path(f"runs/{experiment}-seed{val['seed']}" if text["out_dir"] == "auto" else text["out_dir"])

    materialized = dict(text)
    materialized["burn_in"] = repr(burn_in)
    materialized["out_dir"] = str(out_dir)

    nearfield = {k: val[k] for k in ("particle", "z", "mass", "g", "spin", "moment",
                                     "point", "velocity", "accel")}
    return RunConfig(
        experiment=experiment, field_spec=spec, potential=potential, n_traj=val["n_traj"],
        t_end=val["t_end"], dt=val["dt"], r_ionize=val["r_ionize"], burn_in=burn_in,
        stride=val["stride"], seed=val["seed"], out_dir=out_dir, workers=val["workers"],
        field_on=val["field"], radiation=val["radiation"], r_collapse=val["r_collapse"],
        init=val["init"], r0=val["r0"], eccentricity=val["eccentricity"],
        pairing=val["pairing"], stratify=val["stratify"],
        hist_edges=np.linspace(val["hist_min"], val["hist_max"], val["hist_bins"] + 1),
        allow_recurrence=val["allow_recurrence"], n_samples=val["n_samples"],
        n_times=val["n_times"], time_spacing=val["time_spacing"], nearfield=nearfield,
        values=materialized,
    )
