"""Run configuration: TOML file plus command-line overrides.

Every parameter has a default and a provenance tag: ``paper`` for published
reference values, ``default`` for values this tool had to choose. ``parse_config`` reports problems with the dotted key path and,
when the key came from a file, its line number.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import tomli
import tomli_w

from .channel import ChannelParams
from .energy import SolarUavParams, UavEnergyParams
from .scenarios import (DeploymentMode, Scenario1Config, Scenario2Config, Scenario3Config,
                        SCENARIO1_MODES, SCENARIO3_MODES)
from .spatial import ProcessDensities, SimWindow
from .stations import HarvestProfile


class ConfigError(ValueError):
    pass


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _unit_open(v):
    return 0 < v <= 1


@dataclass(frozen=True)
class Param:
    default: Any
    kind: type
    provenance: str = "default"
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    is_list: bool = False


def P(default, kind, provenance="default", check=None, rule="", is_list=False):
    return Param(default, kind, provenance, check, rule, is_list)


_MODE_NAMES = [m.value for m in DeploymentMode]

SCHEMA: dict[str, dict[str, Param]] = {
    "run": {
        "scenario": P(1, int, check=lambda v: v in (1, 2, 3), rule="must be 1, 2 or 3"),
        "n_trials": P(10000, int, check=_positive, rule="must be >= 1"),
        "seed": P(20211025, int, check=lambda v: 0 <= v < 2 ** 64, rule="must be a 64-bit unsigned value"),
        "workers": P(0, int, check=_nonneg, rule="must be >= 0 (0 = environment default)"),
    },
    "spatial": {
        "lambda_m": P(1e-6, float, "paper", _positive, "must be > 0"),
        "lambda_l": P(1e-3, float, "default", _positive, "must be > 0"),
        "working_ratio": P(10.0, float, "paper", _positive, "must be > 0"),
        "lambda_roads": P(1e-3, float, "default", _positive, "must be > 0"),
        "window_half_width": P(5000.0, float, "default", _positive, "must be > 0"),
        "user_stddev": P(math.sqrt(120.0), float, "paper", _positive, "must be > 0"),
    },
    "channel": {
        "env_a": P(4.88, float, "paper", _positive, "must be > 0"),
        "env_b": P(0.43, float, "paper", _positive, "must be > 0"),
        "alpha_los": P(2.1, float, "paper", _positive, "must be > 0"),
        "alpha_nlos": P(4.0, float, "paper", lambda v: v >= 2, "must be >= 2"),
        "alpha_tbs": P(4.0, float, "paper", lambda v: v >= 2, "must be >= 2"),
        "m_los": P(3.0, float, "paper", lambda v: v >= 0.5, "must be >= 0.5"),
        "m_nlos": P(1.0, float, "paper", lambda v: v >= 0.5, "must be >= 0.5"),
        "m_tbs": P(1.0, float, "default", lambda v: v >= 0.5, "must be >= 0.5"),
        "eta_los": P(1.0, float, "paper", _unit_open, "must lie in (0, 1] (linear scale)"),
        "eta_nlos": P(0.01, float, "paper", _unit_open, "must lie in (0, 1] (linear scale)"),
        "rho_uav": P(0.2, float, "paper", _positive, "must be > 0 W"),
        "rho_tbs": P(10.0, float, "paper", _positive, "must be > 0 W"),
        "noise_power": P(1e-9, float, "paper", _positive, "must be > 0 W"),
        "sinr_threshold": P(1.0, float, "paper", _positive, "must be > 0 (linear scale)"),
        "interference": P(True, bool),
    },
    "energy": {
        "battery_wh": P(177.6, float, "paper", _positive, "must be > 0"),
        "power_service_w": P(177.5, float, "paper", _positive, "must be > 0"),
        "power_travel_w": P(161.8, float, "paper", _positive, "must be > 0"),
        "speed_mps": P(10.0, float, "paper", _positive, "must be > 0"),
        "altitude_m": P(60.0, float, "paper", _positive, "must be > 0"),
        "safety_margin": P(0.0, float, "default", lambda v: 0 <= v < 1, "must lie in [0, 1)"),
    },
    "solar": {
        "harvest_w": P(20.0, float, "default", _nonneg, "must be >= 0"),
        "weight_penalty": P(1.15, float, "default", lambda v: v >= 1, "must be >= 1"),
    },
    "stations": {
        "n_chargers": P(1, int, "default", _positive, "must be >= 1"),
        "charge_time_s": P(3600.0, float, "default", _nonneg, "must be >= 0"),
        "peak_harvest_w": P(400.0, float, "default", _nonneg, "must be >= 0"),
        "day_length_s": P(43200.0, float, "default", _nonneg, "must be >= 0"),
        "period_s": P(86400.0, float, "default", _positive, "must be > 0"),
        "initial_stored_fraction": P(1.0, float, "default", lambda v: 0 <= v <= 1, "must lie in [0, 1]"),
        "horizon_periods": P(1.0, float, "default", lambda v: v >= 1, "must be >= 1"),
    },
    "scenario1": {
        "modes": P([m.value for m in SCENARIO1_MODES], str, is_list=True,
                   check=lambda v: v in _MODE_NAMES[:4], rule=f"must be one of {_MODE_NAMES[:4]}"),
        "charge_times_s": P([1800.0, 3600.0, 7200.0, 10800.0], float, is_list=True,
                            check=_nonneg, rule="entries must be >= 0"),
        "feasibility_radius_m": P(500.0, float, "default", _positive, "must be > 0"),
    },
    "scenario2": {
        "capacity_multiples": P([0.0, 1.0, 2.0, 4.0, 8.0], float, is_list=True,
                                check=_nonneg, rule="entries must be >= 0"),
    },
    "scenario3": {
        "modes": P([m.value for m in SCENARIO3_MODES], str, is_list=True,
                   check=lambda v: v in ("EE_PER_CLUSTER_EDGE", "RE_ON_ROAD"),
                   rule="must be EE_PER_CLUSTER_EDGE or RE_ON_ROAD"),
        "distances_m": P([500.0, 1000.0, 2000.0, 4000.0], float, is_list=True,
                         check=_nonneg, rule="entries must be >= 0"),
        "feasibility_radii_m": P([500.0, 1000.0], float, is_list=True, check=_positive,
                                 rule="entries must be > 0"),
        "living_zone_sigmas": P(3.0, float, "default", _positive, "must be > 0"),
        "placement_samples": P(20000, int, "default", _positive, "must be >= 1"),
    },
}


@dataclass
class RunConfig:
    values: dict[str, dict[str, Any]]
    source: str | None = None
    overridden: set[str] = field(default_factory=set)

    def __getitem__(self, dotted: str):
        section, key = dotted.split(".", 1)
        return self.values[section][key]

    def provenance(self) -> dict[str, str]:
        """``paper`` / ``default`` per parameter, ``user`` where a file or flag changed it."""
        out = {}
        for section, params in SCHEMA.items():
            for key, spec in params.items():
                path = f"{section}.{key}"
                changed = self.values[section][key] != spec.default
                out[path] = "user" if changed else spec.provenance
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(self.values)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self.values))


def defaults() -> RunConfig:
    return RunConfig({s: {k: (list(p.default) if p.is_list else p.default) for k, p in params.items()}
                      for s, params in SCHEMA.items()})


def _line_of(text: str | None, section: str, key: str | None = None) -> int | None:
    if text is None:
        return None
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        m = re.match(r"^\[([^\]]+)\]", stripped)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return lineno
            continue
        if key is not None and current == section and re.match(rf"^\"?{re.escape(key)}\"?\s*=", stripped):
            return lineno
    return None


def _where(path: str, origin: str, line: int | None) -> str:
    loc = f"{origin}:{line}" if line else origin
    return f"{path} ({loc})"


def _coerce(value, spec: Param, where: str):
    def one(v):
        if spec.kind is bool:
            if not isinstance(v, bool):
                raise ConfigError(f"{where}: expected a boolean, got {v!r}")
            return v
        if spec.kind is int:
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{where}: expected an integer, got {v!r}")
            return v
        if spec.kind is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{where}: expected a number, got {v!r}")
            return float(v)
        if not isinstance(v, str):
            raise ConfigError(f"{where}: expected a string, got {v!r}")
        return v

    if spec.is_list:
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{where}: expected a non-empty list, got {value!r}")
        items = [one(v) for v in value]
        for v in items:
            if spec.check and not spec.check(v):
                raise ConfigError(f"{where}: {v!r} {spec.rule}")
        return items
    v = one(value)
    if spec.check and not spec.check(v):
        raise ConfigError(f"{where}: {v!r} {spec.rule}")
    return v


def _apply(cfg: RunConfig, data: dict, origin: str, text: str | None):
    for section, entries in data.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}] ({origin}:{_line_of(text, section) or '?'})")
        if not isinstance(entries, dict):
            raise ConfigError(f"{section} ({origin}): expected a table")
        for key, value in entries.items():
            path = f"{section}.{key}"
            where = _where(path, origin, _line_of(text, section, key))
            if key not in SCHEMA[section]:
                raise ConfigError(f"{where}: unknown key")
            cfg.values[section][key] = _coerce(value, SCHEMA[section][key], where)
            cfg.overridden.add(path)


def parse_override(assignment: str) -> tuple[str, Any]:
    """Parse ``section.key=value``; the value is read as a TOML literal, else a bare string."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form section.key=value")
    path, raw = assignment.split("=", 1)
    path = path.strip()
    try:
        value = tomli.loads(f"v = {raw.strip()}")["v"]
    except tomli.TOMLDecodeError:
        value = raw.strip()
    return path, value


def parse_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Resolve defaults <- file <- flag overrides and check invariants.

    ``path`` may be a TOML file or a results sidecar (JSON with a ``config`` table).
    """
    cfg = defaults()
    text = None
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        if path.suffix == ".json":
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{exc.lineno}: malformed JSON: {exc.msg}") from exc
            data = data.get("config", data)
            text = None
        else:
            try:
                data = tomli.loads(text)
            except tomli.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: malformed TOML: {exc}") from exc
        _apply(cfg, data, str(path), text)
        cfg.source = str(path)
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if not key:
            raise ConfigError(f"override {dotted!r} needs a section.key path")
        _apply(cfg, {section: {key: value}}, "command line", None)
    _check_cross(cfg)
    return cfg


def _check_cross(cfg: RunConfig):
    st = cfg.values["stations"]
    if st["day_length_s"] > st["period_s"]:
        raise ConfigError("stations.day_length_s: must not exceed stations.period_s")
    try:
        solar_penalised = cfg["solar.weight_penalty"] * cfg["energy.power_service_w"] - cfg["solar.harvest_w"]
    except KeyError:  # pragma: no cover
        return
    if solar_penalised <= 0:
        raise ConfigError("solar.harvest_w: harvest exceeds the penalised service power")


# Conversion to the simulation dataclasses -----------------------------------

def channel_params(cfg: RunConfig) -> ChannelParams:
    c = dict(cfg.values["channel"])
    c.pop("interference")
    return ChannelParams(**c)


def energy_params(cfg: RunConfig) -> UavEnergyParams:
    return UavEnergyParams(**cfg.values["energy"])


def densities(cfg: RunConfig) -> ProcessDensities:
    s = cfg.values["spatial"]
    return ProcessDensities(s["lambda_m"], s["lambda_l"], s["working_ratio"], s["lambda_roads"])


def _common(cfg: RunConfig) -> dict:
    s = cfg.values["spatial"]
    return dict(densities=densities(cfg), window=SimWindow(s["window_half_width"]),
                channel=channel_params(cfg), energy=energy_params(cfg), user_stddev=s["user_stddev"],
                interference=cfg["channel.interference"])


def scenario_config(cfg: RunConfig, scenario: int | None = None):
    """Build the scenario dataclass selected by ``run.scenario`` (or ``scenario``)."""
    scenario = cfg["run.scenario"] if scenario is None else scenario
    st = cfg.values["stations"]
    try:
        if scenario == 1:
            s1 = cfg.values["scenario1"]
            return Scenario1Config(**_common(cfg), solar=SolarUavParams(**cfg.values["solar"]),
                                   modes=tuple(DeploymentMode(m) for m in s1["modes"]),
                                   charge_times_s=tuple(s1["charge_times_s"]),
                                   feasibility_radius_m=s1["feasibility_radius_m"], n_chargers=st["n_chargers"])
        if scenario == 2:
            battery = cfg["energy.battery_wh"]
            return Scenario2Config(
                **_common(cfg), solar=SolarUavParams(**cfg.values["solar"]),
                charge_times_s=(st["charge_time_s"],),
                capacities_wh=tuple(k * battery for k in cfg["scenario2.capacity_multiples"]),
                harvest=HarvestProfile(st["peak_harvest_w"], st["day_length_s"], st["period_s"]),
                horizon_periods=st["horizon_periods"], initial_stored_fraction=st["initial_stored_fraction"],
                n_chargers=st["n_chargers"])
        if scenario == 3:
            s3 = cfg.values["scenario3"]
            return Scenario3Config(**_common(cfg), modes=tuple(DeploymentMode(m) for m in s3["modes"]),
                                   distances_m=tuple(s3["distances_m"]),
                                   feasibility_radii_m=tuple(s3["feasibility_radii_m"]),
                                   charge_time_s=st["charge_time_s"],
                                   living_zone_sigmas=s3["living_zone_sigmas"],
                                   placement_samples=s3["placement_samples"])
    except ValueError as exc:
        raise ConfigError(f"scenario {scenario}: {exc}") from exc
    raise ConfigError(f"run.scenario: unknown scenario {scenario}")
