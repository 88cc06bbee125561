"""Run configuration: TOML files validated against a JSON schema.

Unknown keys anywhere are rejected. Missing optional keys are filled from
``DEFAULTS`` and the completed configuration is what every runner sees (and
what is echoed into the run summary), so nothing is implied.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from pathlib import Path

import jsonschema

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

EXPERIMENTS = ("greens", "polarizability", "compare", "compress", "oracle")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` locates the offending entry."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


def _num():
    return {"type": "number"}


def _section(props: dict) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props}


SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["comment", "experiment"],
    "properties": {
        "comment": {"type": "string", "minLength": 1},
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "output": _section({"dir": {"type": "string"}}),
        "model": _section({
            "n": {"type": "integer", "minimum": 2, "maximum": 64},
            "v_nn": _num(),
            "mu": _num(),
            "delta": {"oneOf": [{"type": "number", "minimum": 0},
                                {"type": "array", "minItems": 1,
                                 "items": {"type": "number", "minimum": 0}}]},
            "boundary": {"enum": ["open", "periodic"]},
        }),
        "drive": _section({
            "kind": {"enum": ["delta", "gaussian"]},
            "eta": _num(),
            "amplitude": _num(),
            "omega0": _num(),
            "sigma": {"type": "number", "exclusiveMinimum": 0},
            "n_sigma": {"type": "number", "exclusiveMinimum": 0},
        }),
        "run": _section({
            "t_max": {"type": "number", "minimum": 0},
            "dt": {"type": "number", "exclusiveMinimum": 0},
            "method": {"enum": ["auxiliary_parity", "post_selection", "position_selective",
                                "hadamard_test"]},
            "backend": {"enum": ["statevector", "compressed", "covariance"]},
            "propagator": {"enum": ["trotter", "exact"]},
            "exact_drive": {"type": "boolean"},
            "sample_every": {"type": "integer", "minimum": 1},
            "shots": {"type": "integer", "minimum": 0},
            "tau": {"type": "number", "exclusiveMinimum": 0},
            "pad": {"type": "integer", "minimum": 1},
            "momenta": {"type": "array", "items": {"type": "integer", "minimum": 0}},
            "site": {"type": "integer", "minimum": 0},
            "odd_part": {"type": "boolean"},
            "verify": {"type": "boolean"},
            "tolerance": {"type": "number", "exclusiveMinimum": 0},
        }),
        "noise": _section({
            "presets": {"type": "array", "minItems": 1, "items": {"type": "string"}},
            "shots": {"type": "integer", "minimum": 1},
            "batches": {"type": "integer", "minimum": 1},
            "seeds": {"type": "integer", "minimum": 1},
            "window": {"type": "number", "exclusiveMinimum": 0},
            "band": {"type": "array", "minItems": 2, "maxItems": 2, "items": _num()},
        }),
        "compress": _section({
            "n": {"type": "integer", "minimum": 2, "maximum": 12},
            "steps": {"type": "integer", "minimum": 1},
            "dt": {"type": "number", "exclusiveMinimum": 0},
        }),
    },
}

DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "output": {"dir": "out"},
    "model": {"n": 8, "v_nn": 1.0, "mu": 5.0, "delta": 0.0, "boundary": "periodic"},
    "drive": {"kind": "delta", "eta": 0.04, "amplitude": 0.05, "omega0": 1.5, "sigma": 0.625,
              "n_sigma": 6.0},
    "run": {"t_max": 80.0, "dt": 0.05, "method": "auxiliary_parity", "backend": "statevector",
            "propagator": "trotter", "exact_drive": False, "sample_every": 1, "shots": 0,
            "tau": 20.0, "pad": 4, "momenta": [], "site": 0, "odd_part": True,
            "verify": False, "tolerance": 0.05},
    "noise": {"presets": ["p1=0.1%,p2=10%"], "shots": 8000, "batches": 3, "seeds": 20,
              "window": 0.3, "band": [0.0, 10.0]},
    "compress": {"n": 8, "steps": 40, "dt": 0.05},
}


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def validate(raw: dict) -> dict:
    """Schema-check ``raw`` and return the completed configuration."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path)
        raise ConfigError(err.message, path)
    cfg = _merge(DEFAULTS, raw)
    _check_semantics(cfg)
    return cfg


def _check_semantics(cfg: dict):
    m, r = cfg["model"], cfg["run"]
    steps = r["t_max"] / r["dt"]
    if abs(steps - round(steps)) > 1e-9:
        raise ConfigError("t_max must be a multiple of dt", "run/t_max")
    if round(steps) % r["sample_every"]:
        raise ConfigError("sample_every must divide t_max / dt", "run/sample_every")
    for j in r["momenta"]:
        if j >= m["n"]:
            raise ConfigError(f"momentum index {j} >= n", "run/momenta")
    if r["site"] >= m["n"]:
        raise ConfigError("site outside the chain", "run/site")
    lo, hi = cfg["noise"]["band"]
    if lo >= hi:
        raise ConfigError("band must be increasing", "noise/band")


def load(path: str | Path) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"not valid TOML: {exc}") from None
    return validate(raw)


# Where results go and how many threads compute them never changes a result.
EXECUTION_KEYS = ("output", "threads")


def result_view(cfg: dict) -> dict:
    """``cfg`` without the execution-only keys."""
    return {k: v for k, v in cfg.items() if k not in EXECUTION_KEYS}


def config_hash(cfg: dict) -> str:
    text = json.dumps(result_view(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def deltas(cfg: dict) -> list[float]:
    d = cfg["model"]["delta"]
    return [float(x) for x in d] if isinstance(d, list) else [float(d)]
