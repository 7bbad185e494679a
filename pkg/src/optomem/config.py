"""Run configuration files: INI sections with explicit physical units.

Every dimensional value carries a unit suffix ("235.5 kHz", "104 nm",
"0.1 pW"); bare numbers are accepted only for dimensionless keys.
Frequencies are ordinary frequencies (they are multiplied by 2*pi) unless
given in rad/s.  Unknown sections or keys are rejected with their path.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DriveSpec, ModelTier, NoiseSpec
from .params import PhysicalParams, table1_params

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Invalid configuration; the message carries the section.key path."""


_LENGTH_UNITS = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9, "pm": 1e-12}
_FREQ_UNITS = {"hz": TWO_PI, "khz": TWO_PI * 1e3, "mhz": TWO_PI * 1e6,
               "ghz": TWO_PI * 1e9, "rad/s": 1.0, "rads": 1.0}
_TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}
_POWER_UNITS = {"w": 1.0, "mw": 1e-3, "uw": 1e-6, "nw": 1e-9,
                "pw": 1e-12, "fw": 1e-15, "aw": 1e-18}
_DENSITY_UNITS = {"kg/m3": 1.0, "g/cm3": 1e3}


def _parse_with_units(text: str, units: dict, path: str) -> float:
    parts = text.split()
    if len(parts) != 2:
        raise ConfigError(f"{path}: expected '<number> <unit>', got {text!r}")
    try:
        value = float(parts[0])
    except ValueError as exc:
        raise ConfigError(f"{path}: bad number {parts[0]!r}") from exc
    unit = parts[1].lower()
    if unit not in units:
        raise ConfigError(f"{path}: unknown unit {parts[1]!r} "
                          f"(accepted: {', '.join(sorted(units))})")
    return value * units[unit]


def _parse_float(text: str, path: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"{path}: expected a bare number, got {text!r}; "
                          "dimensional values need a unit suffix") from exc


def _parse_int(text: str, path: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"{path}: expected an integer") from exc


def _parse_bool(text: str, path: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{path}: expected a boolean, got {text!r}")


def _parse_list(text: str, path: str, item=_parse_float) -> list:
    return [item(v.strip(), path) for v in text.split(",") if v.strip()]


_TIERS = {"first_order": ModelTier.FIRST_ORDER,
          "second_order": ModelTier.SECOND_ORDER,
          "full": ModelTier.FULL}


def _parse_tier(text: str, path: str) -> ModelTier:
    low = text.strip().lower()
    if low not in _TIERS:
        raise ConfigError(f"{path}: tier must be one of {sorted(_TIERS)}")
    return _TIERS[low]


# Per-section key tables: key -> (kind, target-name). Kinds select the
# parser; "freq" and friends force an explicit unit suffix.
_PHYSICAL_KEYS = {
    "omega1": "freq", "omega2": "freq", "omega_bar": "freq", "delta": "freq",
    "gamma1": "freq", "gamma2": "freq",
    "kappa_in": "freq", "kappa_ex": "freq", "Delta": "freq",
    "n": "float", "rho": "density", "branch_l": "int",
    "L": "length", "wavelength": "length", "Lz": "length",
    "Lx1": "length", "Ly1": "length", "Lx2": "length", "Ly2": "length",
    "reflectivity_R": "float", "reflectivity_phi": "float",
    "detuning": "str",
}
_PLACEMENT_KEYS = {"Q1": "length", "Q2": "length",
                   "Q1_lambda": "float", "Q2_lambda": "float"}
_DRIVE_KEYS = {"power": "power", "E": "rate",
               "E1": "rate", "E2": "rate",
               "tone1": "freq", "tone2": "freq"}
_NOISE_KEYS = {"enabled": "bool", "nbar_a": "float", "nbar_1": "float",
               "nbar_2": "float", "seed": "int"}
_INTEGRATION_KEYS = {"tier": "tier", "tiers": "str", "dtau": "float",
                     "t_end": "time", "tau_end": "float",
                     "sample_stride": "int",
                     "q1_0": "float", "p1_0": "float",
                     "q2_0": "float", "p2_0": "float"}
_ANALYSIS_KEYS = {"grid": "int", "q1_min": "float", "q1_max": "float",
                  "q2_min": "float", "q2_max": "float",
                  "amplitude_scale": "float", "fraction": "float",
                  "demodulate": "bool", "smoothing_periods": "float",
                  "samples_per_period": "int",
                  "tau_s": "float", "tau_window": "float",
                  "delta_list": "freq_list", "drive_list": "float_list",
                  "drive_mode": "str",
                  "placement_list": "float_list",
                  "check_union_fraction": "float", "check_tol": "float",
                  "check_sigma_max": "float",
                  "t1": "time", "t2": "time"}
_ENSEMBLE_KEYS = {"n": "int", "shard_size": "int", "master_seed": "int",
                  "sample_tau": "float_list",
                  "hist_extent": "float", "hist_h": "float",
                  "hist_time_index": "int"}

_SECTIONS = {"physical": _PHYSICAL_KEYS, "placement": _PLACEMENT_KEYS,
             "drive": _DRIVE_KEYS, "noise": _NOISE_KEYS,
             "integration": _INTEGRATION_KEYS, "analysis": _ANALYSIS_KEYS,
             "ensemble": _ENSEMBLE_KEYS}


def _parse_value(kind: str, text: str, path: str):
    if kind == "freq" or kind == "rate":
        return _parse_with_units(text, _FREQ_UNITS, path)
    if kind == "length":
        return _parse_with_units(text, _LENGTH_UNITS, path)
    if kind == "time":
        return _parse_with_units(text, _TIME_UNITS, path)
    if kind == "power":
        return _parse_with_units(text, _POWER_UNITS, path)
    if kind == "density":
        return _parse_with_units(text, _DENSITY_UNITS, path)
    if kind == "float":
        return _parse_float(text, path)
    if kind == "int":
        return _parse_int(text, path)
    if kind == "bool":
        return _parse_bool(text, path)
    if kind == "tier":
        return _parse_tier(text, path)
    if kind == "float_list":
        return _parse_list(text, path)
    if kind == "freq_list":
        return [_parse_with_units(v.strip(), _FREQ_UNITS, path)
                for v in text.split(",") if v.strip()]
    return text.strip()     # "str"


@dataclass
class RunConfig:
    """Fully parsed configuration; sections become attribute dicts."""

    physical: dict = field(default_factory=dict)
    placement: dict = field(default_factory=dict)
    drive: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    integration: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=dict)
    ensemble: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)     # resolved text for headers

    # -- builders ----------------------------------------------------------

    def params(self) -> PhysicalParams:
        ph = dict(self.physical)
        over = {}
        if "omega_bar" in ph or "delta" in ph:
            if "omega1" in ph or "omega2" in ph:
                raise ConfigError("physical: give either omega1/omega2 or "
                                  "omega_bar/delta, not both")
            wb = ph.pop("omega_bar", TWO_PI * 235.5e3)
            dl = ph.pop("delta", 0.0)
            over["omega1"] = wb - 0.5 * dl
            over["omega2"] = wb + 0.5 * dl
        if "n" in ph:
            over["n_refr"] = ph.pop("n")
        detuning = ph.pop("detuning", "relative")
        if detuning not in ("relative", "absolute"):
            raise ConfigError("physical.detuning: 'relative' or 'absolute'")
        over["detuning_is_relative"] = detuning == "relative"
        if "reflectivity_R" in ph or "reflectivity_phi" in ph:
            try:
                R = ph.pop("reflectivity_R")
                phi = ph.pop("reflectivity_phi", 0.0)
            except KeyError as exc:
                raise ConfigError("physical.reflectivity_R required with "
                                  "reflectivity_phi") from exc
            over["reflectivity_override"] = (R, phi)
        over.update(ph)
        try:
            return table1_params(**over)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"physical: {exc}") from exc

    def placement_point(self, params: PhysicalParams) -> tuple[float, float]:
        pl = self.placement
        lam = params.wavelength
        if "Q1_lambda" in pl or "Q2_lambda" in pl:
            if "Q1" in pl or "Q2" in pl:
                raise ConfigError("placement: give Q_j or Q_j_lambda, "
                                  "not both")
            return pl.get("Q1_lambda", 0.0) * lam, \
                pl.get("Q2_lambda", 0.0) * lam
        if "Q1" not in pl or "Q2" not in pl:
            raise ConfigError("placement: Q1 and Q2 (or Q1_lambda/"
                              "Q2_lambda) are required")
        return pl["Q1"], pl["Q2"]

    def drive_spec(self, params: PhysicalParams) -> DriveSpec | None:
        dr = self.drive
        if not dr:
            return None
        if "power" in dr and "E" in dr:
            raise ConfigError("drive: give power or E, not both")
        try:
            if "power" in dr:
                base = DriveSpec.from_power(dr["power"], params)
                e0 = base.E
            else:
                e0 = dr.get("E", 0.0)
            return DriveSpec(E=e0, E1=dr.get("E1", 0.0),
                             E2=dr.get("E2", 0.0),
                             omega_tone1=dr.get("tone1", 0.0),
                             omega_tone2=dr.get("tone2", 0.0))
        except ValueError as exc:
            raise ConfigError(f"drive: {exc}") from exc

    def noise_spec(self) -> NoiseSpec:
        ns = self.noise
        try:
            return NoiseSpec(enabled=ns.get("enabled", True),
                             nbar_a=ns.get("nbar_a", 0.0),
                             nbar_1=ns.get("nbar_1", 0.0),
                             nbar_2=ns.get("nbar_2", 0.0),
                             seed=ns.get("seed", 0))
        except ValueError as exc:
            raise ConfigError(f"noise: {exc}") from exc

    def tier(self) -> ModelTier:
        return self.integration.get("tier", ModelTier.FULL)

    def tier_list(self) -> list[ModelTier]:
        text = self.integration.get("tiers")
        if text is None:
            return [self.tier()]
        return [_parse_tier(v.strip(), "integration.tiers")
                for v in text.split(",") if v.strip()]

    def time_grid(self, params: PhysicalParams) -> tuple[float, float]:
        """(dt, t_end) in seconds from dtau/tau_end or direct values."""
        it = self.integration
        wb = params.omega_bar
        dt = it.get("dtau", 0.005) / wb
        if "t_end" in it and "tau_end" in it:
            raise ConfigError("integration: give t_end or tau_end, not both")
        if "t_end" in it:
            return dt, it["t_end"]
        if "tau_end" in it:
            return dt, it["tau_end"] / wb
        raise ConfigError("integration: t_end or tau_end is required")

    def header(self) -> dict:
        out = {}
        for sec, body in self.raw.items():
            for key, text in body.items():
                out[f"config.{sec}.{key}"] = text
        return out


def loads(text: str, overrides: list[str] | None = None) -> RunConfig:
    """Parse configuration text plus --set section.key=value overrides."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str          # keys are case-sensitive
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from exc

    raw: dict[str, dict[str, str]] = {s: dict(cp[s]) for s in cp.sections()}
    for item in overrides or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set {item!r}: expected section.key=value")
        sec, dot, name = key.strip().partition(".")
        if not dot:
            raise ConfigError(f"--set {item!r}: key must be section.key")
        raw.setdefault(sec, {})[name] = value.strip()

    cfg = RunConfig(raw=raw)
    for sec, body in raw.items():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        table = _SECTIONS[sec]
        parsed = getattr(cfg, sec)
        for key, text_value in body.items():
            if key not in table:
                raise ConfigError(f"unknown key {sec}.{key}")
            parsed[key] = _parse_value(table[key], text_value,
                                       f"{sec}.{key}")
    return cfg


def load(path, overrides: list[str] | None = None) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text, overrides)
