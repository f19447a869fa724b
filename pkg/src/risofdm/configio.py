"""YAML configuration files: one-to-one SystemConfig mapping or scenario specs.

A file carries either a ``system`` section (explicit SystemConfig fields) or a
``scenario`` section (geometry drawn from distances and seeds).  Powers are
accepted in dBm, Rician factors in dB or linear, tap profiles either explicit
or as an attenuation step; angles explicit or "uniform-random" with a seed.
Dotted-key overrides apply to the raw mapping before validation.
"""

from __future__ import annotations

import math
from dataclasses import fields
from typing import Any

import numpy as np
import yaml

from risofdm.config import Geometry, SystemConfig, dbm_to_watts, tap_power_profile
from risofdm.experiments import ScenarioSpec


class ConfigError(ValueError):
    """Raised when a configuration file cannot be turned into valid objects."""


def load_raw(path) -> dict:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"configuration root must be a mapping, got {type(raw).__name__}")
    return raw


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply ``a.b.c=value`` overrides (values parsed as YAML scalars)."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, value = item.partition("=")
        node = raw
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key!r} crosses a non-mapping node")
        node[parts[-1]] = yaml.safe_load(value)
    return raw


def _number(value: Any) -> float:
    if isinstance(value, str) and value.lower() in ("inf", "infinite", "infinity"):
        return math.inf
    return float(value)


def _geometry_from(section: Any, n_users: int, fallback_seed: int) -> Geometry:
    if section is None:
        section = {"mode": "uniform-random", "seed": fallback_seed}
    if "mode" in section:
        if section["mode"] != "uniform-random":
            raise ConfigError(f"unknown geometry mode {section['mode']!r}")
        rng = np.random.default_rng(int(section.get("seed", fallback_seed)))
        return Geometry.uniform_random(n_users, rng)
    try:
        return Geometry(
            user_azimuth=np.asarray(section["user_azimuth"], dtype=float),
            user_elevation=np.asarray(section["user_elevation"], dtype=float),
            ris_departure_azimuth=float(section["ris_departure_azimuth"]),
            ris_departure_elevation=float(section["ris_departure_elevation"]),
            bs_azimuth=float(section["bs_azimuth"]),
            bs_elevation=float(section["bs_elevation"]),
        )
    except KeyError as missing:
        raise ConfigError(f"geometry section is missing {missing}") from None


def system_from_mapping(section: dict, default_seed: int = 0) -> SystemConfig:
    """Build a SystemConfig from its file mapping, converting units."""
    s = dict(section)
    try:
        n_users = int(s["n_users"])
        l_u = int(s["taps_user_ris"])
        l_b = int(s["taps_ris_bs"])

        if "rician_user" in s:
            rician_user = np.asarray(s["rician_user"], dtype=float)
        else:
            db = s.get("rician_user_db", 0.0)
            db = np.full(n_users, float(db)) if np.isscalar(db) else np.asarray(db, dtype=float)
            rician_user = 10.0 ** (db / 10.0)
        rician_bs = float(s["rician_bs"]) if "rician_bs" in s else 10.0 ** (float(s.get("rician_bs_db", 0.0)) / 10.0)

        if "tap_power_user" in s:
            tap_user = np.asarray(s["tap_power_user"], dtype=float)
        else:
            tap_user = np.tile(tap_power_profile(l_u, float(s.get("tap_step_user_db", 0.0))), (n_users, 1))
        if "tap_power_bs" in s:
            tap_bs = np.asarray(s["tap_power_bs"], dtype=float)
        else:
            tap_bs = tap_power_profile(l_b, float(s.get("tap_step_bs_db", 0.0)))

        ref = float(s.get("pathloss_ref", 1e-3))
        exponent = float(s.get("pathloss_exponent", 2.8))
        if "pathloss_user" in s:
            pathloss_user = np.asarray(s["pathloss_user"], dtype=float)
        else:
            dist = np.asarray(s["user_distances_m"], dtype=float)
            pathloss_user = ref * dist ** (-exponent)
        if "pathloss_bs" in s:
            pathloss_bs = float(s["pathloss_bs"])
        else:
            pathloss_bs = ref * float(s["bs_ris_distance_m"]) ** (-exponent)

        if "tx_power" in s:
            tx_power = np.asarray(s["tx_power"], dtype=float)
        else:
            dbm = s["tx_power_dbm"]
            tx_power = (
                np.full(n_users, dbm_to_watts(float(dbm)))
                if np.isscalar(dbm)
                else np.array([dbm_to_watts(float(x)) for x in dbm])
            )
        noise = float(s["noise_power"]) if "noise_power" in s else dbm_to_watts(float(s["noise_power_dbm"]))

        return SystemConfig(
            n_bs_antennas=int(s["n_bs_antennas"]),
            n_ris_elements=int(s["n_ris_elements"]),
            n_users=n_users,
            n_subcarriers=int(s["n_subcarriers"]),
            cp_length=int(s["cp_length"]),
            taps_user_ris=l_u,
            taps_ris_bs=l_b,
            rician_user=rician_user,
            rician_bs=rician_bs,
            tap_power_user=tap_user,
            tap_power_bs=tap_bs,
            pathloss_user=pathloss_user,
            pathloss_bs=pathloss_bs,
            tx_power=tx_power,
            noise_power=noise,
            adc_bits=_number(s.get("adc_bits", math.inf)),
            geometry=_geometry_from(s.get("geometry"), n_users, default_seed),
            element_spacing_over_wavelength=float(s.get("element_spacing_over_wavelength", 0.5)),
        )
    except ConfigError:
        raise
    except KeyError as missing:
        raise ConfigError(f"system section is missing required key {missing}") from None
    except ValueError as bad:
        raise ConfigError(str(bad)) from None


def scenario_from_mapping(section: dict) -> ScenarioSpec:
    known = {f.name for f in fields(ScenarioSpec)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    coerced = {k: (_number(v) if k == "adc_bits" else v) for k, v in section.items()}
    try:
        return ScenarioSpec(**coerced)
    except (TypeError, ValueError) as bad:
        raise ConfigError(str(bad)) from None


def resolve(raw: dict, default_seed: int = 0) -> tuple[SystemConfig, dict]:
    """Return the SystemConfig described by the file plus an echo mapping."""
    if "system" in raw and "scenario" in raw:
        raise ConfigError("configuration must carry either a system or a scenario section, not both")
    if "system" in raw:
        cfg = system_from_mapping(raw["system"], default_seed)
        return cfg, {"system": raw["system"]}
    if "scenario" in raw:
        spec = scenario_from_mapping(raw["scenario"])
        from risofdm.experiments import build_scenario

        try:
            cfg = build_scenario(spec)
        except ValueError as bad:
            raise ConfigError(str(bad)) from None
        return cfg, {"scenario": raw["scenario"]}
    raise ConfigError("configuration needs a 'system' or 'scenario' section")


def config_echo(cfg: SystemConfig) -> dict:
    """JSON-serializable echo of a resolved SystemConfig."""
    geo = cfg.geometry
    return {
        "n_bs_antennas": cfg.n_bs_antennas,
        "n_ris_elements": cfg.n_ris_elements,
        "n_users": cfg.n_users,
        "n_subcarriers": cfg.n_subcarriers,
        "cp_length": cfg.cp_length,
        "taps_user_ris": cfg.taps_user_ris,
        "taps_ris_bs": cfg.taps_ris_bs,
        "rician_user": cfg.rician_user.tolist(),
        "rician_bs": cfg.rician_bs,
        "tap_power_user": cfg.tap_power_user.tolist(),
        "tap_power_bs": cfg.tap_power_bs.tolist(),
        "pathloss_user": cfg.pathloss_user.tolist(),
        "pathloss_bs": cfg.pathloss_bs,
        "tx_power": cfg.tx_power.tolist(),
        "noise_power": cfg.noise_power,
        "adc_bits": str(cfg.adc_bits),
        "element_spacing_over_wavelength": cfg.element_spacing_over_wavelength,
        "geometry": {
            "user_azimuth": geo.user_azimuth.tolist(),
            "user_elevation": geo.user_elevation.tolist(),
            "ris_departure_azimuth": geo.ris_departure_azimuth,
            "ris_departure_elevation": geo.ris_departure_elevation,
            "bs_azimuth": geo.bs_azimuth,
            "bs_elevation": geo.bs_elevation,
        },
    }
