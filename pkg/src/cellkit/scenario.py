"""Scenario files: JSON descriptions of a window, a cell and its centers.

A minimal scenario::

    {"name": "twoballs-p3", "p": 3,
     "window": {"lo": 0, "hi": 4, "N": 4},
     "cell": {"kind": "small", "n": 1, "m": 1, "lambda": "p^0 * (1)",
              "gamma": {"s": 0}},
     "sigma": {"s": [{"center": "0", "radius": 1},
                     {"center": "p^0 * (1)", "radius": 1}]}}

``sigma`` may instead be ``{"translate_by": "f", "balls": [...]}``, meaning
``Sigma_s = f(s) + ball`` for each listed ball, with ``f`` an opaque table
``{"opaque": true, "values": {s: "<padic>"}}``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Dict, List, Optional

import jsonschema

from .cells import CellCondition, ClassicalCell, ClusteredCell
from .errors import CellkitError, ScenarioError
from .oracle import QuotientWindow
from .padic import PadicNumber, parse_padic
from .trees import Ball, MultiBall

_INT_TABLE = {"type": "object", "additionalProperties": {"type": "integer"}}
_BALL = {
    "type": "object",
    "required": ["center", "radius"],
    "properties": {"center": {"type": "string"}, "radius": {"type": "integer"}},
    "additionalProperties": False,
}
_CELL = {
    "type": "object",
    "required": ["kind", "n", "m", "lambda"],
    "properties": {
        "kind": {"enum": ["small", "large"]},
        "n": {"type": "integer", "minimum": 1},
        "m": {"type": "integer", "minimum": 1},
        "lambda": {"type": "string"},
        "alpha": _INT_TABLE,
        "beta": _INT_TABLE,
        "gamma": _INT_TABLE,
    },
    "additionalProperties": False,
}
_SIGMA = {
    "oneOf": [
        {"type": "object",
         "required": ["translate_by", "balls"],
         "properties": {"translate_by": {"const": "f"},
                        "balls": {"type": "array", "items": _BALL}},
         "additionalProperties": False},
        {"type": "object",
         "not": {"required": ["translate_by"]},
         "additionalProperties": {"type": "array", "items": _BALL}},
    ]
}
_PART = {
    "oneOf": [
        {"type": "object", "required": ["type", "cell", "sigma"],
         "properties": {"type": {"const": "clustered"}, "cell": _CELL, "sigma": _SIGMA},
         "additionalProperties": False},
        {"type": "object", "required": ["type", "cell", "center"],
         "properties": {"type": {"const": "classical"}, "cell": _CELL,
                        "center": {"type": "object", "additionalProperties": {"type": "string"}}},
         "additionalProperties": False},
    ]
}
SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["name", "p", "window", "sigma"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "p": {"type": "integer", "minimum": 2},
        "window": {
            "type": "object",
            "required": ["lo", "N"],
            "properties": {"lo": {"type": "integer"}, "hi": {"type": "integer"},
                           "N": {"type": "integer"}},
            "additionalProperties": False,
        },
        "base": {"type": "array", "items": {"type": "string"}, "uniqueItems": True},
        "cell": _CELL,
        "sigma": _SIGMA,
        "f": {
            "type": "object",
            "required": ["opaque", "values"],
            "properties": {"opaque": {"type": "boolean"},
                           "values": {"type": "object",
                                      "additionalProperties": {"type": "string"}}},
            "additionalProperties": False,
        },
        "parts": {"type": "array", "items": _PART},
        "options": {
            "type": "object",
            "properties": {
                "ac1_pick": {"oneOf": [{"const": "smallest"}, {"type": "integer", "minimum": 1}]},
                "max_iter": {"type": "integer", "minimum": 1},
                "strict_ac1": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


@dataclass
class Scenario:
    name: str
    p: int
    window: QuotientWindow
    base: List[str]
    sigma: MultiBall
    cell: Optional[ClusteredCell]
    parts: list
    f: Optional[Dict[str, PadicNumber]]
    options: dict
    sha256: str
    raw: dict = field(repr=False)


def _exact(text, p) -> Fraction:
    try:
        return parse_padic(text, p, prec=64).to_fraction()
    except ValueError as e:
        raise ScenarioError(str(e)) from None


def _lambda(text, p, m) -> PadicNumber:
    x = _exact(text, p)
    if x == 0:
        raise ScenarioError("lambda must be nonzero")
    return PadicNumber.from_rational(p, x, m)


def _condition(d, p, base) -> CellCondition:
    for name in ("alpha", "beta", "gamma"):
        t = d.get(name)
        if t is not None:
            missing = [s for s in base if s not in t]
            if missing:
                raise ScenarioError(f"cell table {name} lacks base points {missing}")
    if d["kind"] == "small" and "gamma" not in d:
        raise ScenarioError("small cell needs a gamma table")
    if d["kind"] == "large" and "gamma" in d:
        raise ScenarioError("large cell takes alpha/beta, not gamma")
    if d["kind"] == "large":
        for s in base:
            a, b = d.get("alpha", {}).get(s), d.get("beta", {}).get(s)
            if a is not None and b is not None and not a + 1 < b:
                raise ScenarioError(f"empty order window alpha={a}, beta={b} at {s}")

    def sub(t):
        return None if t is None else {s: t[s] for s in base}

    return CellCondition(d["kind"], d["n"], d["m"], _lambda(d["lambda"], p, d["m"]),
                         alpha=sub(d.get("alpha")), beta=sub(d.get("beta")),
                         gamma=sub(d.get("gamma")))


def _sigma(d, p, base, f) -> MultiBall:
    if "translate_by" in d:
        if f is None:
            raise ScenarioError("sigma translates by f but no f table is given")
        fibers = {s: [Ball(_exact(b["center"], p) + f[s], b["radius"], p) for b in d["balls"]]
                  for s in base}
    else:
        extra = sorted(set(d) - set(base))
        if extra:
            raise ScenarioError(f"sigma names unknown base points {extra}")
        missing = [s for s in base if s not in d]
        if missing:
            raise ScenarioError(f"sigma lacks base points {missing}")
        fibers = {s: [Ball(_exact(b["center"], p), b["radius"], p) for b in d[s]] for s in base}
    try:
        return MultiBall(p, fibers)
    except ValueError as e:
        raise ScenarioError(f"invalid multi-ball: {e}") from None


def scenario_hash(raw: dict) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True).encode()).hexdigest()


def parse_scenario(raw: dict) -> Scenario:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(map(str, e.absolute_path)) or "<root>"
        raise ScenarioError(f"schema violation at {where}: {e.message}") from None
    p = raw["p"]
    w = raw["window"]
    try:
        window = QuotientWindow(p, w["lo"], w.get("hi", w["N"]), w["N"])
    except ValueError as e:
        raise ScenarioError(str(e)) from None
    f = None
    if "f" in raw:
        f = {s: _exact(v, p) for s, v in raw["f"]["values"].items()}
    sig = raw["sigma"]
    if "base" in raw:
        base = list(raw["base"])
    elif "translate_by" in sig:
        base = sorted(f) if f else []
    else:
        base = list(sig)
    if f is not None:
        missing = [s for s in base if s not in f]
        if missing:
            raise ScenarioError(f"f lacks base points {missing}")
    try:
        sigma = _sigma(sig, p, base, f)
        cell = None
        if "cell" in raw:
            cell = ClusteredCell(_condition(raw["cell"], p, base), sigma)
        parts = []
        for d in raw.get("parts", []):
            cond = _condition(d["cell"], p, base)
            if d["type"] == "classical":
                missing = [s for s in base if s not in d["center"]]
                if missing:
                    raise ScenarioError(f"classical part lacks centers for {missing}")
                centers = {s: PadicNumber.from_absolute(p, _exact(d["center"][s], p), window.N + 1)
                           for s in base}
                parts.append(ClassicalCell(cond, centers))
            else:
                parts.append(ClusteredCell(cond, _sigma(d["sigma"], p, base, f)))
    except CellkitError as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(f"invalid scenario data: {e}") from None
    except ValueError as e:
        raise ScenarioError(f"invalid scenario data: {e}") from None
    fp = None if f is None else {s: PadicNumber.from_absolute(p, x, window.N + 1) for s, x in f.items()}
    return Scenario(raw["name"], p, window, base, sigma, cell, parts, fp,
                    dict(raw.get("options", {})), scenario_hash(raw), raw)


def load_scenario(path) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: not valid JSON ({e})") from None
    except OSError as e:
        raise ScenarioError(f"{path}: {e.strerror}") from None
    return parse_scenario(raw)


def shipped_scenarios() -> Dict[str, object]:
    """Paths of the scenario corpus bundled with the package, by file stem."""
    root = resources.files("cellkit") / "scenarios"
    out = {}
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            out[entry.name[:-5]] = entry
    return out
