"""Run-configuration loading, strict key validation, and --set overrides.

Validation is structural and happens before any computation: every key in
the config must appear in the nested schema of allowed keys, otherwise the
run aborts.  Leaf values are checked by the builders that consume them.
"""

from __future__ import annotations

import json
from typing import Any, Optional

from .errors import ConfigError

# Nested allowed-key schema; leaves are None (any value, builder-checked).
_SYSTEM_INLINE = {
    "n": None,
    "m": None,
    "degree": None,
    "terms": None,
    "cone": None,
    "name": None,
    "target": {"kind": None, "radius": None, "n": None},
}

_OPTIONS = {
    "target_tol": None,
    "blowup_norm": None,
    "min_step": None,
    "rel_tol": None,
    "abs_tol": None,
}

_BETA = {"name": None, "scale": None, "rate": None}

_CLF = {
    "W": {"name": None},
    "gamma": {"name": None, "exponent": None, "scale": None},
    "region": {"r_min": None, "r_max": None, "samples": None, "log": None},
    "grid": {"mesh": None, "directions": None, "r_max": None, "r_min": None, "per_decade": None},
    "n_curve": {"r_values": None, "band_samples": None},
}

SCHEMA = {
    "system": _SYSTEM_INLINE,  # or a plain string
    "mode": None,
    "seed": None,
    "output": {"trajectory": None, "plot": None, "report": None, "table": None},
    "simulate": {
        "z": None,
        "feedback": {"name": None, "value": None, "w0": None, "w": None},
        "signal": {"constant": None, "breaks": None, "values": None},
        "partition": {"delta": None, "golden": None},
        "horizon": None,
        "record_dt": None,
        "options": _OPTIONS,
        "fail_on_blowup": None,
        "plot": {"beta": _BETA},
    },
    "clf": _CLF,
    "synthesize": {
        "x_grid": {"min": None, "max": None, "count": None, "log": None},
        "N": {"name": None, "constant": None},
        "grid": {"mesh": None, "directions": None},
    },
    "certify": {
        "beta": _BETA,
        "pairs": None,
        "delta": {"golden": None, "constant": None},
        "fractions": None,
        "seeds": {"magnitude_fractions": None},
        "horizon": None,
        "options": _OPTIONS,
    },
}


def validate_keys(cfg: Any, schema: Optional[dict] = None, path: str = "") -> None:
    """Reject any key not present in the nested schema."""
    schema = SCHEMA if schema is None else schema
    if not isinstance(cfg, dict):
        return
    for key, value in cfg.items():
        if key not in schema:
            where = path or "top level"
            raise ConfigError(f"unknown config key '{key}' at {where}")
        sub = schema[key]
        if isinstance(sub, dict) and isinstance(value, dict):
            validate_keys(value, sub, f"{path}{key}.")
        elif isinstance(sub, dict) and value is not None and not isinstance(value, (str, dict)):
            raise ConfigError(f"config key '{path}{key}' must be a mapping")


def load_config(path: Optional[str], overrides) -> dict:
    """Read a JSON config file, apply dotted-path --set overrides, validate."""
    if path is None:
        cfg: dict = {}
    else:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                cfg = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    for item in overrides or []:
        cfg = apply_override(cfg, item)
    validate_keys(cfg)
    return cfg


def apply_override(cfg: dict, assignment: str) -> dict:
    """Apply one KEY.PATH=VALUE override; VALUE parses as JSON, else string."""
    if "=" not in assignment:
        raise ConfigError(f"--set needs KEY=VALUE, got '{assignment}'")
    key, _, raw = assignment.partition("=")
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"--set needs a non-empty key, got '{assignment}'")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    for part in parts[:-1]:
        nxt = node.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            node[part] = nxt
        node = nxt
    node[parts[-1]] = value
    return cfg


def require(cfg: dict, key: str, command: str):
    if key not in cfg:
        raise ConfigError(f"command '{command}' needs a '{key}' config block")
    return cfg[key]
