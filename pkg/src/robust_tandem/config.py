"""Experiment configuration: JSON parsing, validation and figure presets."""

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .engine import ChainConfig, EpsSchedule, schedule_from_dict
from .exceptions import ConfigError
from .models import model_from_dict
from .rules import Priors

OBJECTIVES = ("finite-dd", "asymptotic-dd", "unknown-sl")

DEFAULTS = {
    "model": {"kind": "exponential_means", "m0": 1.0, "m1": 2.0},
    "pi0": 0.5,
    "eps": {"eps0": 0.01, "eps1": 0.01},
    "rule": "social",
    "N": 30,
    "n_samples": 100000,
    "seed": 0,
    "objective": "unknown-sl",
    "contamination": None,
}

PRESETS = {
    "fig-rules": {
        "model": {"kind": "exponential_means", "m0": 1.0, "m1": 2.0},
        "pi0": 0.5,
        "eps": {"eps0": 0.01, "eps1": 0.01},
        "N": 30,
        "rules": {
            "phi_A": {"t1": "lower", "t0": 5.0, "p": 1.0, "q": 0.0},
            "phi_B": {"t1": "lower", "t0": 1.1, "p": 1.0, "q": 0.0},
        },
        "rule": {"t1": "lower", "t0": 5.0, "p": 1.0, "q": 0.0},
    },
    "fig-mean": {
        "model": {"kind": "exponential_means", "m0": 1.0, "m1": 2.0},
        "pi0": 0.5,
        "eps": {"eps0": 0.01, "eps1": 0.01},
        "sweep": {"param": "m1", "start": 1.2, "stop": 4.0, "num": 15},
    },
    "fig-eps": {
        "model": {"kind": "exponential_means", "m0": 1.0, "m1": 2.0},
        "pi0": 0.5,
        "eps": {"eps0": 0.0, "eps1": 0.0},
        "sweep": {"param": "eps", "start": 0.0, "stop": 0.3, "num": 16},
    },
}


@dataclass
class ExperimentConfig:
    raw: dict
    chain: ChainConfig
    rule: object
    objective: str
    n_samples: int
    seed: int
    contamination: Optional[list] = None
    preset: Optional[str] = None
    extras: dict = field(default_factory=dict)

    @property
    def priors(self) -> Priors:
        return self.chain.priors

    @property
    def schedule(self) -> EpsSchedule:
        return self.chain.eps_schedule


def _field(raw, name, conv, ctx=None):
    try:
        return conv(raw[name])
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        where = f"{ctx}.{name}" if ctx else name
        raise ConfigError(f"field '{where}': {exc}") from None


def _int(v):
    if isinstance(v, bool) or not float(v).is_integer():
        raise ValueError(f"expected an integer, got {v!r}")
    return int(v)


def _parse_rule(v):
    if isinstance(v, dict):
        for key in ("t1", "t0"):
            if key not in v:
                raise ValueError(f"explicit rule needs '{key}'")
            t = v[key]
            if not (isinstance(t, (int, float)) or t in ("lower", "upper", "inf")):
                raise ValueError(f"rule.{key} must be a number, 'lower', 'upper' or 'inf'")
        return dict(v)
    if not isinstance(v, str):
        raise ValueError("rule must be an object or a string")
    if v == "social":
        return v
    if v.startswith("optimize:"):
        obj = v.split(":", 1)[1]
        if obj not in OBJECTIVES:
            raise ValueError(f"unknown objective {obj!r}; expected one of {OBJECTIVES}")
        return v
    if v.startswith("phi-delta:"):
        d = float(v.split(":", 1)[1])
        if not 0.0 < d < 1.0:
            raise ValueError("phi-delta level must lie in (0, 1)")
        return v
    raise ValueError(f"unknown rule spec {v!r}")


def resolve(raw: dict, preset: Optional[str] = None, seed: Optional[int] = None) -> ExperimentConfig:
    """Merge defaults, preset and user config (later wins), then validate."""
    merged = copy.deepcopy(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
        merged.update(copy.deepcopy(PRESETS[preset]))
    merged.update(copy.deepcopy(raw or {}))
    if seed is not None:
        merged["seed"] = int(seed)
    if preset is not None:
        merged["preset"] = preset

    if isinstance(merged.get("priors"), dict) and "pi0" in merged["priors"]:
        merged["pi0"] = merged["priors"]["pi0"]
    merged.pop("priors", None)
    model = _field(merged, "model", model_from_dict)
    priors = _field(merged, "pi0", Priors)
    schedule = _field(merged, "eps", schedule_from_dict)
    N = _field(merged, "N", _int)
    if N < 1:
        raise ConfigError("field 'N': must be >= 1")
    try:
        chain = ChainConfig(model, N, priors, schedule)
    except ValueError as exc:
        raise ConfigError(f"field 'N': {exc}") from None
    rule = _field(merged, "rule", _parse_rule)
    objective = _field(merged, "objective", str)
    if objective not in OBJECTIVES:
        raise ConfigError(f"field 'objective': unknown objective {objective!r}; expected one of {OBJECTIVES}")
    n_samples = _field(merged, "n_samples", _int)
    if n_samples < 1:
        raise ConfigError("field 'n_samples': must be >= 1")
    seed_v = _field(merged, "seed", _int)
    if seed_v < 0 or seed_v >= 2**64:
        raise ConfigError("field 'seed': must be an unsigned 64-bit integer")
    extras ={k: merged[k] for k in ("rules", "sweep") if k in merged}
    if "rules" in extras:
        for name, r in extras["rules"].items():
            _field(extras["rules"], name, _parse_rule, "rules")
    return ExperimentConfig(merged, chain, rule, objective, n_samples, seed_v,
                            merged.get("contamination"), preset, extras)


def load(path: Optional[str], preset: Optional[str] = None, seed: Optional[int] = None) -> ExperimentConfig:
    raw = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top-level JSON value must be an object")
        preset = preset or raw.pop("preset", None)
    return resolve(raw, preset, seed)


def fmt(x) -> str:
    """CSV float format: 12 significant digits, ``inf`` spelled out."""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"
