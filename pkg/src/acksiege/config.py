"""JSON experiment configuration: schema, parsing, object builders.

A config document has sections ``system`` (plant and noise matrices),
``channel`` (low-power arrival rate), ``energy`` (per-slot levels and the
average budget, exact rationals as numbers or "p/q" strings), ``detector``
(online-schedule parameters; ``mu`` may be omitted to request calibration),
``attacker`` (either a budget ``beta`` or an explicit coprime duty cycle
``r``/``t``), ``sim`` (Monte Carlo shape) and ``analysis`` (grid and series
knobs).  Matrices are row-major with declared dimensions; scalars may be
written as plain numbers.

:func:`config_sha256` hashes the canonical serialization of the effective
document so emitted artifacts can state exactly which configuration produced
them.
"""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction

import numpy as np
import jsonschema

from .attack import AttackerConfig, reduce_beta
from .errors import ConfigError
from .lds_core import SystemModel
from .montecarlo import SimConfig
from .schedule import DetectorConfig, EnergyModel, calibrate_mu, reduce_energy_budget

__all__ = [
    "SCHEMA",
    "load_config",
    "config_sha256",
    "build_system",
    "build_energy",
    "build_detector",
    "build_attacker",
    "build_sim_config",
]

_MATRIX = {
    "oneOf": [
        {"type": "number"},
        {
            "type": "object",
            "required": ["rows", "cols", "data"],
            "additionalProperties": False,
            "properties": {
                "rows": {"type": "integer", "minimum": 1},
                "cols": {"type": "integer", "minimum": 1},
                "data": {"type": "array", "items": {"type": "number"}},
            },
        },
    ]
}

_RATIONAL = {
    "oneOf": [
        {"type": "number", "exclusiveMinimum": 0},
        {"type": "string", "pattern": r"^[0-9]+(/[0-9]+)?$"},
    ]
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["system", "channel", "energy", "detector", "sim"],
    "additionalProperties": False,
    "properties": {
        "system": {
            "type": "object",
            "required": ["A", "C", "Q", "R", "Pi0"],
            "additionalProperties": False,
            "properties": {k: _MATRIX for k in ("A", "C", "Q", "R", "Pi0")},
        },
        "channel": {
            "type": "object",
            "required": ["lambda"],
            "additionalProperties": False,
            "properties": {
                "lambda": {
                    "type": "number",
                    "exclusiveMinimum": 0,
                    "exclusiveMaximum": 1,
                }
            },
        },
        "energy": {
            "type": "object",
            "required": ["delta_high", "delta_low", "psi"],
            "additionalProperties": False,
            "properties": {
                "delta_high": _RATIONAL,
                "delta_low": _RATIONAL,
                "psi": _RATIONAL,
            },
        },
        "detector": {
            "type": "object",
            "required": ["z0", "L"],
            "additionalProperties": False,
            "properties": {
                "z0": {"type": "integer", "minimum": 1},
                "mu": {"type": "number", "minimum": 0, "maximum": 1},
                "L": {"type": "integer", "minimum": 2},
            },
        },
        "attacker": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "beta": {"oneOf": [
                    {"type": "number", "minimum": 0, "maximum": 1},
                    {"type": "string", "pattern": r"^[0-9]+(/[0-9]+)?$"},
                ]},
                "r": {"type": "integer", "minimum": 0},
                "t": {"type": "integer", "minimum": 1},
                "enabled": {"type": "boolean"},
            },
            "oneOf": [
                {"required": ["beta"], "not": {"anyOf": [
                    {"required": ["r"]}, {"required": ["t"]}]}},
                {"required": ["r", "t"], "not": {"required": ["beta"]}},
            ],
        },
        "sim": {
            "type": "object",
            "required": ["horizon", "runs", "seed"],
            "additionalProperties": False,
            "properties": {
                "horizon": {"type": "integer", "minimum": 1},
                "runs": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "mode": {"enum": ["covariance", "trajectory"]},
                "schedule": {"enum": ["offline", "online"]},
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_max": {"type": "integer", "minimum": 2},
                "tail_tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}


def load_config(path: str) -> dict:
    """Read and schema-validate a JSON config file.

    Raises ConfigError on malformed JSON or schema violations; I/O errors
    propagate as OSError.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    validate_config(doc)
    return doc


def validate_config(doc: dict) -> None:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config schema violation at {path}: {exc.message}") from exc


def config_sha256(doc: dict) -> str:
    """Hash of the canonical (sorted, compact) JSON serialization."""
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _parse_matrix(v, name: str) -> np.ndarray:
    if isinstance(v, (int, float)):
        return np.array([[float(v)]])
    data = np.asarray(v["data"], dtype=np.float64)
    rows, cols = v["rows"], v["cols"]
    if data.size != rows * cols:
        raise ConfigError(
            f"system.{name}: expected {rows * cols} entries for a "
            f"{rows}x{cols} matrix, got {data.size}"
        )
    return data.reshape(rows, cols)


def _parse_rational(v, name: str) -> Fraction:
    try:
        return Fraction(v)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{name}: cannot parse rational from {v!r}") from exc


def build_system(doc: dict) -> SystemModel:
    sy = doc["system"]
    return SystemModel(
        A=_parse_matrix(sy["A"], "A"),
        C=_parse_matrix(sy["C"], "C"),
        Q=_parse_matrix(sy["Q"], "Q"),
        R=_parse_matrix(sy["R"], "R"),
        Pi0=_parse_matrix(sy["Pi0"], "Pi0"),
        lam=doc["channel"]["lambda"],
    )


def build_energy(doc: dict) -> EnergyModel:
    en = doc["energy"]
    return reduce_energy_budget(
        _parse_rational(en["delta_high"], "energy.delta_high"),
        _parse_rational(en["delta_low"], "energy.delta_low"),
        _parse_rational(en["psi"], "energy.psi"),
    )


def build_detector(doc: dict, model: SystemModel, em: EnergyModel) -> DetectorConfig:
    """Detector from the config, calibrating mu when it is omitted."""
    de = doc["detector"]
    if "mu" in de:
        return DetectorConfig(z0=de["z0"], mu=de["mu"], L=de["L"])
    return calibrate_mu(model, em, z0=de["z0"], L=de["L"])


def build_attacker(doc: dict) -> AttackerConfig:
    at = doc.get("attacker")
    if at is None:
        return reduce_beta(0)
    enabled = at.get("enabled", True)
    if "beta" in at:
        cfg = reduce_beta(_parse_rational(at["beta"], "attacker.beta"))
        if not enabled:
            cfg = AttackerConfig(r=cfg.r, t=cfg.t, enabled=False)
        return cfg
    r, t = at["r"], at["t"]
    if r > t:
        raise ConfigError(f"attacker duty cycle needs r <= t, got ({r}, {t})")
    if 0 < r < t and np.gcd(r, t) != 1:
        raise ConfigError(
            f"attacker duty cycle (r, t) = ({r}, {t}) must be coprime; "
            f"state beta as a fraction if you meant the reduced budget"
        )
    return AttackerConfig(r=r, t=t, enabled=enabled and r > 0)


def build_sim_config(
    doc: dict,
    model: SystemModel,
    em: EnergyModel,
    detector: DetectorConfig | None,
    attacker: AttackerConfig | None,
    schedule_kind: str | None = None,
) -> SimConfig:
    si = doc["sim"]
    return SimConfig(
        model=model,
        energy=em,
        schedule_kind=schedule_kind or si.get("schedule", "online"),
        horizon=si["horizon"],
        runs=si["runs"],
        seed=si["seed"],
        detector=detector,
        attacker=attacker,
        mode=si.get("mode", "covariance"),
    )
