"""Scenario configuration: JSON schema, validation and model construction."""
from __future__ import annotations

import hashlib
import json
import math

import numpy as np
from jsonschema import Draft202012Validator
from scipy import stats

from .errors import DomainError
from .mc_oracle import McConfig
from .models import (Empirical, GaussianClaims, MarketModel, StandardNormal, UnivariateClaim, build_asset,
                     driver_from_skew)

SCHEMA_VERSION = 1

_NUM = {"type": "number"}
_MATRIX = {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 1}, "minItems": 1}
_GRID = {
    "oneOf": [
        {"type": "array", "items": {"oneOf": [_NUM, {"type": "array", "items": _NUM}]}, "minItems": 1},
        {
            "type": "object",
            "properties": {"start": _NUM, "stop": _NUM, "num": {"type": "integer", "minimum": 1}},
            "required": ["start", "stop", "num"],
            "additionalProperties": False,
        },
    ]
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["assets", "claims"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "assets": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["vol_kind", "sigma"],
                "properties": {
                    "vol_kind": {"enum": ["normal", "lognormal"]},
                    "sigma": {"type": "number", "minimum": 0},
                    "driver": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["law"],
                        "properties": {
                            "law": {"enum": ["standard_normal", "shifted_lognormal", "empirical"]},
                            "skew": _NUM,
                            "samples": {"type": "array", "items": _NUM, "minItems": 10},
                        },
                    },
                },
            },
        },
        "asset_corr": _MATRIX,
        "allow_nonpositive": {"type": "boolean"},
        "claims": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["gaussian", "student_t"]},
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "cov": _MATRIX,
                "df": {"type": "number", "exclusiveMinimum": 4},
                "scale": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "mc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_samples": {"type": "integer", "minimum": 100},
                "seed": {"type": "integer", "minimum": 0},
                "n_chunks": {"type": "integer", "minimum": 1},
                "n_batches": {"type": "integer", "minimum": 2},
                "tail_tilt": {"type": "number", "minimum": 0, "maximum": 1.5},
            },
        },
        "phi_grid": _GRID,
        "measures": {"type": "array", "items": {"enum": ["var", "es"]}, "minItems": 1},
        "orders": {"type": "array", "items": {"enum": [2, 3, 4]}},
        "optimize": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sigmas": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "skews": {"type": "array", "items": _NUM, "minItems": 1},
                "bounds": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
            },
        },
        "scr": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "phi_star": {"type": ["number", "null"]},
                "literal_mismatch": {"type": "boolean"},
                "understate_threshold": {"type": "number", "minimum": 0},
            },
        },
        "validate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "checks": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 11}},
                "n_samples": {"type": "integer", "minimum": 100},
                "overrides": {"type": "object", "additionalProperties": {"type": "object"}},
            },
        },
    },
}


class ConfigError(ValueError):
    """Configuration does not match the schema or describes an invalid model."""


def validate_config(cfg):
    errors = sorted(Draft202012Validator(SCHEMA).iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        lines = [f"{'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines))
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return validate_config(cfg)


def config_hash(cfg):
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _driver(spec):
    if spec is None or spec["law"] == "standard_normal":
        return StandardNormal()
    if spec["law"] == "shifted_lognormal":
        if "skew" not in spec:
            raise ConfigError("shifted_lognormal driver needs 'skew'")
        return driver_from_skew(spec["skew"])
    if "samples" not in spec:
        raise ConfigError("empirical driver needs 'samples'")
    return Empirical(spec["samples"])


def student_t_claim(df, scale=1.0):
    """Centered Student-t claim with analytic density derivatives up to third order."""
    if df <= 4:
        raise DomainError("df must exceed 4 so that the fourth moment is finite")
    a = df * scale ** 2
    p = -(df + 1) / 2.0
    const = math.exp(math.lgamma((df + 1) / 2) - math.lgamma(df / 2)) / math.sqrt(df * math.pi) / scale

    def parts(x):
        x = np.asarray(x, dtype=float)
        g = 1.0 + x * x / a
        return x, g, 2.0 * x / a, 2.0 / a

    def f0(x):
        _, g, _, _ = parts(x)
        return const * g ** p

    def f1(x):
        _, g, g1, _ = parts(x)
        return const * p * g ** (p - 1) * g1

    def f2(x):
        _, g, g1, g2 = parts(x)
        return const * p * ((p - 1) * g ** (p - 2) * g1 ** 2 + g ** (p - 1) * g2)

    def f3(x):
        _, g, g1, g2 = parts(x)
        return const * p * ((p - 1) * (p - 2) * g ** (p - 3) * g1 ** 3 + 3 * (p - 1) * g ** (p - 2) * g1 * g2)

    sd = scale * math.sqrt(df / (df - 2))
    return UnivariateClaim([f0, f1, f2, f3], lambda rng, size: scale * rng.standard_t(df, size),
                           sf=lambda y: stats.t.sf(np.asarray(y) / scale, df), scale=sd, name="student_t")


def claims_from_config(spec, n):
    if spec["kind"] == "gaussian":
        if "cov" in spec:
            return GaussianClaims(spec["cov"])
        if "sigma" in spec:
            return GaussianClaims(np.eye(n) * spec["sigma"] ** 2)
        raise ConfigError("gaussian claims need 'sigma' or 'cov'")
    if n != 1:
        raise ConfigError("student_t claims are univariate")
    if "df" not in spec:
        raise ConfigError("student_t claims need 'df'")
    return student_t_claim(spec["df"], spec.get("scale", 1.0))


def model_from_config(cfg):
    try:
        assets = tuple(build_asset(a["vol_kind"], a["sigma"], _driver(a.get("driver"))) for a in cfg["assets"])
        claims = claims_from_config(cfg["claims"], len(assets))
        return MarketModel(assets, claims, cfg.get("asset_corr"), cfg.get("allow_nonpositive", False))
    except DomainError as exc:
        raise ConfigError(f"invalid model: {exc}") from exc


def mc_from_config(cfg, seed=None, jobs=None):
    mc = dict(cfg.get("mc", {}))
    if seed is not None:
        mc["seed"] = seed
    try:
        return McConfig(alpha=cfg.get("alpha", 0.005), jobs=jobs, **mc)
    except DomainError as exc:
        raise ConfigError(f"invalid mc settings: {exc}") from exc


def phi_grid_from_config(cfg, default=(0.4, 1.6, 25)):
    spec = cfg.get("phi_grid")
    if spec is None:
        return np.linspace(*default[:2], default[2])
    if isinstance(spec, dict):
        return np.linspace(spec["start"], spec["stop"], spec["num"])
    return np.asarray(spec, dtype=float)
