"""Experiment configuration: a versioned JSON schema with typed errors."""

import json
from dataclasses import dataclass, field

from .canonical import BUILTIN_MAPS, builtin_map
from .errors import ConfigError
from .maps import load_map_spec

SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    version: int = SCHEMA_VERSION
    precision_bits: int = 256
    seed: int = 0
    output_dir: str = "out"
    maps: dict = field(default_factory=dict)
    rotation: str = "surd(5,1,2)"
    window: list = field(default_factory=lambda: [9, 11, 13])
    theta_low: float = 0.05
    theta_mid: float = 0.15
    bounded_type_bound: int = 5

    def validate(self):
        if self.version != SCHEMA_VERSION:
            raise ConfigError("version", f"expected {SCHEMA_VERSION}, got {self.version}")
        if self.precision_bits < 128:
            raise ConfigError("precision_bits", "must be at least 128")
        if not isinstance(self.seed, int):
            raise ConfigError("seed", "must be an integer")
        last = 0
        for n in self.window:
            if n % 2 == 0:
                raise ConfigError("window", f"levels must be odd, got {n}")
            if n <= last:
                raise ConfigError("window", "levels must be strictly increasing")
            last = n
        if not 0 < self.theta_low < self.theta_mid < 0.5:
            raise ConfigError("theta_low/theta_mid", "need 0 < low < mid < 1/2")
        return self

    def resolve_map(self, name_or_spec):
        """Named config map, builtin:<name>, or an inline JSON spec."""
        try:
            if isinstance(name_or_spec, dict):
                return load_map_spec(name_or_spec)
            if name_or_spec in self.maps:
                spec = self.maps[name_or_spec]
                if isinstance(spec, str) and spec.startswith("builtin:"):
                    return builtin_map(spec.split(":", 1)[1])
                return load_map_spec(spec)
            if name_or_spec.startswith("builtin:"):
                return builtin_map(name_or_spec.split(":", 1)[1])
            if name_or_spec in BUILTIN_MAPS:
                return builtin_map(name_or_spec)
            if name_or_spec.strip().startswith("{"):
                return load_map_spec(json.loads(name_or_spec))
        except (KeyError, json.JSONDecodeError) as err:
            raise ConfigError("maps", str(err)) from None
        raise ConfigError("maps", f"unknown map {name_or_spec!r}")


_FIELDS = {
    "version": int,
    "precision_bits": int,
    "seed": int,
    "output_dir": str,
    "maps": dict,
    "rotation": str,
    "window": list,
    "theta_low": float,
    "theta_mid": float,
    "bounded_type_bound": int,
}


def load_config(path_or_dict):
    if isinstance(path_or_dict, dict):
        raw = path_or_dict
    else:
        try:
            with open(path_or_dict) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError("config", f"file not found: {path_or_dict}") from None
        except json.JSONDecodeError as err:
            raise ConfigError("config", f"invalid JSON: {err}") from None
    cfg = ExperimentConfig()
    for key, value in raw.items():
        if key not in _FIELDS:
            raise ConfigError(key, "unknown field")
        want = _FIELDS[key]
        if want is float and isinstance(value, int):
            value = float(value)
        if not isinstance(value, want):
            raise ConfigError(key, f"expected {want.__name__}, got {type(value).__name__}")
        setattr(cfg, key, value)
    return cfg.validate()
