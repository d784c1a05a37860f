"""JSON experiment configs: schema, validation with line numbers, and object construction.

A config looks like::

    {
      "manifold": {"name": "sphere", "params": {"r": 1.0}},
      "field": "height",
      "quadrature": {"nodes": 64, "tol": 1e-3, "max_nodes": 256},
      "t": [0.25, 1, 4, 16],
      "expected_chi": 2,
      "critical_points": [{"patch": 1, "u": ["pi/2", "pi/2"], "index": 2}],
      "strata": [{"m": 1, "patch": 0, "embed": ["pi/2", "s1"],
                  "domain": [[0, "2*pi"]], "periodic": [true]}]
    }

Numbers may be given as expression strings (``"pi/2"``).  Stratum embeddings
are expressions in ``s1..sm``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .expr import compile_expression, evaluate_constant
from .geometry import ManifoldSpec, builtin_catalog, user_manifold
from .morse import CriticalPointDecl, CriticalStratum

NUMBER = {"anyOf": [{"type": "number"}, {"type": "string"}]}
FIELD = {
    "anyOf": [
        {"type": "string"},
        {"type": "null"},
        {
            "type": "object",
            "properties": {
                "expr": {"type": "string"},
                "sum": {"type": "array"},
                "factors": {"type": "array"},
            },
            "additionalProperties": False,
            "minProperties": 1,
            "maxProperties": 1,
        },
    ]
}
MANIFOLD: dict = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "params": {"type": "object"},
        "factors": {"type": "array", "items": {"$ref": "#/$defs/manifold"}, "minItems": 2},
        "metric": {"type": "array", "items": {"type": "array", "items": {"type": "string"}}},
        "domain": {"type": "array", "items": {"type": "array", "items": NUMBER, "minItems": 2, "maxItems": 2}},
        "periodic": {"type": "array", "items": {"type": "boolean"}},
        "rules": {"type": "array", "items": {"enum": ["periodic", "legendre", "legendre_cos"]}},
    },
    "required": ["name"],
    "additionalProperties": False,
}
SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"manifold": MANIFOLD},
    "type": "object",
    "properties": {
        "manifold": {"$ref": "#/$defs/manifold"},
        "field": FIELD,
        "quadrature": {
            "type": "object",
            "properties": {
                "nodes": {"type": "integer", "minimum": 2},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_nodes": {"type": "integer", "minimum": 2},
            },
            "additionalProperties": False,
        },
        "t": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "stationary_phase": {
            "type": "object",
            "properties": {
                "t": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "nodes": {"type": "integer", "minimum": 2},
            },
            "additionalProperties": False,
        },
        "expected_chi": {"type": "integer"},
        "critical_points": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "patch": {"type": "integer", "minimum": 0},
                    "u": {"type": "array", "items": NUMBER, "minItems": 1},
                    "index": {"type": "integer", "minimum": 0},
                },
                "required": ["u"],
                "additionalProperties": False,
            },
        },
        "strata": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string"},
                    "m": {"type": "integer", "minimum": 0},
                    "patch": {"type": "integer", "minimum": 0},
                    "embed": {"type": "array", "items": {"type": "string"}},
                    "point": {"type": "array", "items": NUMBER},
                    "domain": {"type": "array", "items": {"type": "array", "items": NUMBER, "minItems": 2, "maxItems": 2}},
                    "periodic": {"type": "array", "items": {"type": "boolean"}},
                    "rules": {"type": "array", "items": {"enum": ["periodic", "legendre", "legendre_cos"]}},
                    "nu": {"type": "integer", "minimum": 0},
                    "chi": {"type": "integer"},
                },
                "required": ["m"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["manifold"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


def _line_of(text: str, path: list) -> int | None:
    """Best-effort line number of a JSON path: follow the object keys in order through the text."""
    pos = 0
    found = None
    for key in path:
        if not isinstance(key, str):
            continue
        i = text.find(json.dumps(key), pos)
        if i < 0:
            break
        pos = i + 1
        found = text.count("\n", 0, i) + 1
    return found


def validate(doc: Any, text: str | None = None) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if not errors:
        _check_semantics(doc)
        return
    lines = []
    for err in errors:
        path = list(err.absolute_path)
        where = "/".join(map(str, path)) or "<root>"
        line = _line_of(text, path) if text is not None else None
        prefix = f"line {line}: " if line is not None else ""
        lines.append(f"{prefix}{where}: {err.message}")
    raise ConfigError("invalid config:\n  " + "\n  ".join(lines))


def _check_semantics(doc: dict) -> None:
    t = doc.get("t")
    if t is not None and any(b <= a for a, b in zip(t, t[1:])):
        raise ConfigError("t must be strictly increasing")
    sp = doc.get("stationary_phase", {}).get("t")
    if sp is not None and any(b <= a for a, b in zip(sp, sp[1:])):
        raise ConfigError("stationary_phase.t must be strictly increasing")


def load(path: str | Path) -> dict:
    text = Path(path).read_text()
    return loads(text)


def loads(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    validate(doc, text)
    return doc


def _numbers(values) -> list[float]:
    try:
        return [evaluate_constant(v) for v in values]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_manifold(m: dict) -> ManifoldSpec:
    name = m["name"]
    if name == "user":
        missing = [k for k in ("metric", "domain", "periodic") if k not in m]
        if missing:
            raise ConfigError(f"user manifold needs {missing}")
        dom = [_numbers(d) for d in m["domain"]]
        return user_manifold(
            m["metric"], [d[0] for d in dom], [d[1] for d in dom], m["periodic"], m.get("rules")
        )
    if name == "product":
        if "factors" not in m:
            raise ConfigError("product manifold needs 'factors'")
        return builtin_catalog("product", factors=[build_manifold(f) for f in m["factors"]])
    try:
        return builtin_catalog(name, **m.get("params", {}))
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name}: {exc}") from None


def build_points(doc: dict) -> list[CriticalPointDecl]:
    return [
        CriticalPointDecl(_numbers(p["u"]), p.get("patch", 0), p.get("index"))
        for p in doc.get("critical_points", [])
    ]


def build_strata(doc: dict, spec: ManifoldSpec) -> list[CriticalStratum]:
    out = []
    for k, s in enumerate(doc.get("strata", [])):
        m = s["m"]
        name = s.get("name", f"C{k}")
        patch = s.get("patch", 0)
        if patch >= len(spec.patches):
            raise ConfigError(f"stratum {name}: no patch {patch}")
        n = spec.patches[patch].n
        if m == 0:
            if "point" not in s:
                raise ConfigError(f"stratum {name}: m = 0 needs 'point'")
            out.append(CriticalStratum(0, patch, point=_numbers(s["point"]), nu=s.get("nu"), chi=s.get("chi"), name=name))
            continue
        if "embed" not in s or "domain" not in s:
            raise ConfigError(f"stratum {name}: m = {m} needs 'embed' and 'domain'")
        if len(s["embed"]) != n or len(s["domain"]) != m:
            raise ConfigError(f"stratum {name}: embed needs {n} expressions and domain {m} intervals")
        names = [f"s{i + 1}" for i in range(m)]
        comps = [compile_expression(e, names) for e in s["embed"]]

        def embed(x, comps=comps, names=names):
            x = np.atleast_2d(x)
            env = {nm: x[:, i] for i, nm in enumerate(names)}
            return np.stack([c(env) for c in comps], axis=-1)

        dom = [_numbers(d) for d in s["domain"]]
        out.append(
            CriticalStratum(
                m,
                patch,
                embed=embed,
                lower=[d[0] for d in dom],
                upper=[d[1] for d in dom],
                periodic=s.get("periodic", [False] * m),
                rules=s.get("rules"),
                nu=s.get("nu"),
                chi=s.get("chi"),
                name=name,
            )
        )
    return out


@dataclass
class Experiment:
    doc: dict
    spec: ManifoldSpec
    field: Any
    nodes: int | None
    tol: float
    max_nodes: int
    t: list[float]

    @classmethod
    def from_doc(cls, doc: dict, nodes: int | None = None, t: list[float] | None = None, tol: float | None = None):
        spec = build_manifold(doc["manifold"])
        q = doc.get("quadrature", {})
        t_list = t if t is not None else doc.get("t", [])
        if t is not None:
            if not t or any(v <= 0 for v in t) or any(b <= a for a, b in zip(t, t[1:])):
                raise ConfigError("--t must be a non-empty, strictly increasing list of positive numbers")
        return cls(
            doc,
            spec,
            doc.get("field"),
            nodes if nodes is not None else q.get("nodes"),
            tol if tol is not None else q.get("tol", 1e-3),
            q.get("max_nodes", 256),
            list(t_list),
        )
