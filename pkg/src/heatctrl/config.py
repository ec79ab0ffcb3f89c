"""Declarative run configuration: INI (key = value with sections) or JSON.

Unknown sections or keys are rejected; every default is materialized so the
echoed effective config reproduces the run exactly.  Environment variables
HEATCTRL_<SECTION>_<KEY> override file values.
"""

from __future__ import annotations

import configparser
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

ENV_PREFIX = "HEATCTRL"


def _parse_bool(s):
    if isinstance(s, bool):
        return s
    if str(s).lower() in ("1", "true", "yes", "on"):
        return True
    if str(s).lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_float_list(s):
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [float(v) for v in str(s).replace(",", " ").split()]


def _parse_int_list(s):
    if isinstance(s, (list, tuple)):
        return [int(v) for v in s]
    return [int(v) for v in str(s).replace(",", " ").split()]


def _opt(parser):
    """Wrap a parser to map the literal 'auto'/'none' to None."""

    def run(s):
        if s is None or (isinstance(s, str) and s.lower() in ("auto", "none", "")):
            return None
        return parser(s)

    return run


# section -> key -> (parser, default)
SCHEMA = {
    "system": {
        "a": (float, 10.0),
        "x_star": (float, float(1.0 / np.sqrt(2.0))),
        "delta": (float, 0.1),
        "n": (int, 4),
        "n0": (_opt(int), None),
        "delta0": (_opt(float), None),
        "delta1": (_opt(float), None),
        "tau_my": (_opt(float), None),
        "tau_mu": (_opt(float), None),
    },
    "gains": {
        "l0": (_opt(_parse_float_list), None),
        "k0": (_opt(_parse_float_list), None),
    },
    "solver": {
        "max_iter": (int, 100),
        "tol": (float, 1e-9),
        "rel_margin": (float, 1e-7),
        "margin_eps": (_opt(float), None),
    },
    "design": {
        "margin_req": (float, 1e-6),
        "decay_slack": (float, 5.0),
        "assumption_tol": (float, 1e-6),
    },
    "sim": {
        "m": (int, 100),
        "horizon": (float, 10.0),
        "dt": (_opt(float), None),
        "initial": (str, "parabola"),
        "sampling": (str, "continuous"),   # continuous | uniform | jittered
        "seed": (int, 0),
        "jitter_low": (float, 0.5),
        "fit_window": (_opt(float), None),
        "open_loop": (_parse_bool, False),
    },
    "sweep": {
        "n_values": (_parse_int_list, [6, 8, 10, 12, 14]),
        "tau_my_values": (_parse_float_list,
                          [0.002, 0.004, 0.006, 0.008, 0.010,
                           0.012, 0.014, 0.016]),
        "grid_step": (float, 0.001),
        "cap": (float, 0.2),
    },
}


@dataclass
class RunConfig:
    """Validated, fully-defaulted configuration tree."""

    values: dict = field(default_factory=dict)
    source: str = "<defaults>"

    def __getitem__(self, section):
        return self.values[section]

    def get(self, section, key):
        return self.values[section][key]

    @classmethod
    def from_mapping(cls, data: dict, source="<mapping>") -> "RunConfig":
        values = {}
        for section, keys in SCHEMA.items():
            values[section] = {k: d for k, (_, d) in keys.items()}
        for section, entries in data.items():
            if section not in SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            if not isinstance(entries, dict):
                raise ConfigError(f"section [{section}] must hold key = value pairs")
            for key, raw in entries.items():
                key = key.lower()
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown key '{key}' in section [{section}]")
                parser, _ = SCHEMA[section][key]
                try:
                    values[section][key] = parser(raw)
                except (ValueError, TypeError) as exc:
                    raise ConfigError(
                        f"bad value for [{section}] {key} = {raw!r}: {exc}") from exc
        cfg = cls(values, source)
        cfg._apply_env()
        cfg._validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        text = open(path).read()
        if str(path).endswith(".json") or text.lstrip().startswith("{"):
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON config {path}: {exc}") from exc
        else:
            parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
            try:
                parser.read_string(text)
            except configparser.Error as exc:
                raise ConfigError(f"invalid config {path}: {exc}") from exc
            data = {s: dict(parser.items(s)) for s in parser.sections()}
        return cls.from_mapping(data, source=str(path))

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls.from_mapping({})

    def _apply_env(self):
        for section, keys in SCHEMA.items():
            for key, (parser, _) in keys.items():
                name = f"{ENV_PREFIX}_{section.upper()}_{key.upper()}"
                if name in os.environ:
                    try:
                        self.values[section][key] = parser(os.environ[name])
                    except (ValueError, TypeError) as exc:
                        raise ConfigError(f"bad env override {name}: {exc}") from exc

    def _validate(self):
        sys_ = self.values["system"]
        if not 0.0 < sys_["x_star"] < 1.0:
            raise ConfigError("x_star must lie in (0, 1)")
        if sys_["delta"] <= 0:
            raise ConfigError("delta must be positive")
        sampled = [sys_[k] for k in ("delta0", "delta1", "tau_my", "tau_mu")]
        if any(v is not None for v in sampled) and any(v is None for v in sampled):
            raise ConfigError(
                "sampled-data mode needs delta0, delta1, tau_my and tau_mu")
        gains = self.values["gains"]
        if (gains["l0"] is None) != (gains["k0"] is None):
            raise ConfigError("give both l0 and k0, or neither")

    @property
    def sampled(self) -> bool:
        return self.values["system"]["tau_my"] is not None

    def system_config(self):
        from .modal import SystemConfig
        s = self.values["system"]
        return SystemConfig(a=s["a"], x_star=s["x_star"], delta=s["delta"],
                            N=s["n"], N0=s["n0"], delta0=s["delta0"],
                            delta1=s["delta1"], tau_my=s["tau_my"],
                            tau_mu=s["tau_mu"])

    def solve_options(self):
        from .sdp import SolveOptions
        s = self.values["solver"]
        return SolveOptions(max_iter=s["max_iter"], tol=s["tol"],
                            rel_margin=s["rel_margin"],
                            margin_eps=s["margin_eps"])

    def dump_ini(self) -> str:
        """Deterministic INI text of the fully-resolved configuration."""
        lines = []
        for section in SCHEMA:
            lines.append(f"[{section}]")
            for key in SCHEMA[section]:
                val = self.values[section][key]
                if val is None:
                    out = "auto"
                elif isinstance(val, bool):
                    out = "true" if val else "false"
                elif isinstance(val, list):
                    out = ", ".join(repr(v) if isinstance(v, float) else str(v)
                                    for v in val)
                elif isinstance(val, float):
                    out = repr(val)
                else:
                    out = str(val)
                lines.append(f"{key} = {out}")
            lines.append("")
        return "\n".join(lines)
