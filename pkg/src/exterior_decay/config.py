"""Run configuration: JSON documents validated against a schema.

The schema shipped here is the single source of truth; ``docs/config.md``
describes it in prose and the fixtures under ``fixtures/`` are complete
examples.  Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from . import maps
from .errors import ConfigError, InvalidInputError
from .problem_model import GammaSpec, ProblemSpec

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

_DECAY = {
    "type": "object",
    "properties": {"K": {"type": "number", "minimum": 0}, "rho": _NUM, "start": _NUM},
    "required": ["K", "rho"],
    "additionalProperties": False,
}

FUNCTION_SCHEMA: dict = {
    "oneOf": [
        _NUM,
        {
            "type": "object",
            "properties": {
                "kind": {"enum": ["constant", "power", "log_power", "sum", "product", "table"]},
                "c": _NUM,
                "e": _NUM,
                "d": _NUM,
                "terms": {"type": "array", "items": {"$ref": "#/$defs/function"}, "minItems": 1},
                "factors": {"type": "array", "items": {"$ref": "#/$defs/function"}, "minItems": 1},
                "x": {"type": "array", "items": _NUM, "minItems": 2},
                "y": {"type": "array", "items": _NUM, "minItems": 2},
                "rule": {"enum": ["linear", "pchip", "loglog"]},
                "decay": _DECAY,
                "finite_support": {"type": "boolean"},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
    ]
}

_RADIAL = {
    "oneOf": [
        {"const": 0},
        {
            "type": "object",
            "properties": {
                "kind": {"enum": ["zero", "linear", "separable"]},
                "a": {"$ref": "#/$defs/function"},
                "terms": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {"a": {"$ref": "#/$defs/function"}, "sigma": _POS},
                        "required": ["a"],
                        "additionalProperties": False,
                    },
                },
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
    ]
}

_GAMMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["zero", "lipschitz", "integral", "linear", "emden_fowler"]},
        "k": {"type": "number", "minimum": 0},
        "f": {"$ref": "#/$defs/function"},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"function": FUNCTION_SCHEMA},
    "type": "object",
    "properties": {
        "problem": {
            "type": "object",
            "properties": {
                "n": {"type": "integer"},
                "R": _NUM,
                "u0": _NUM,
                "varsigma": _NUM,
                "p": _NUM,
                "m": _RADIAL,
                "g": {"$ref": "#/$defs/function"},
                "q_minus": {"$ref": "#/$defs/function"},
                "q_plus": {"$ref": "#/$defs/function"},
                "gamma": _GAMMA,
                "form": {"enum": ["auto", "linear", "emden_fowler", "general"]},
            },
            "required": ["n", "R", "u0", "varsigma", "p", "m"],
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "properties": {
                "N": {"type": "integer", "minimum": 64, "maximum": 1_000_000},
                "tmax_mult": {"type": "number", "minimum": 100},
            },
            "additionalProperties": False,
        },
        "solver": {
            "type": "object",
            "properties": {
                "tol": _POS,
                "max_iter": {"type": "integer", "minimum": 1, "maximum": 100_000},
                "damping": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "projection": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "checker": {
            "type": "object",
            "properties": {
                "k": {"type": "integer", "minimum": 0, "maximum": 1000},
                "seed": {"type": "integer", "minimum": 0},
                "monotone": {"enum": [None, "nonincreasing", "nondecreasing"]},
            },
            "additionalProperties": False,
        },
        "outputs": {
            "type": "object",
            "properties": {
                "report": {"type": "string", "minLength": 1},
                "series": {"type": "string", "minLength": 1},
                "plot": {"type": "string", "minLength": 1},
            },
            "additionalProperties": False,
        },
    },
    "required": ["problem"],
    "additionalProperties": False,
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


@dataclass
class GridConfig:
    N: int = 4096
    tmax_mult: float = 1e6


@dataclass
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 200
    damping: float = 1.0
    projection: bool = True


@dataclass
class CheckerConfig:
    k: int = 8
    seed: int = 0
    monotone: str | None = None


@dataclass
class OutputConfig:
    report: str = "report.json"
    series: str = "series.tsv"
    plot: str = "plot.dat"


@dataclass
class RunConfig:
    problem: ProblemSpec
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    checker: CheckerConfig = field(default_factory=CheckerConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        P = self.problem
        return {
            "problem": problem_to_dict(P),
            "grid": vars(self.grid).copy(),
            "solver": vars(self.solver).copy(),
            "checker": vars(self.checker).copy(),
            "outputs": vars(self.outputs).copy(),
        }


def problem_to_dict(P: ProblemSpec) -> dict:
    return {
        "n": P.n,
        "R": P.R,
        "u0": P.u0,
        "varsigma": P.varsigma,
        "p": P.p,
        "m": P.m.to_dict(),
        "g": P.g.to_dict(),
        "q_minus": P.q_minus.to_dict(),
        "q_plus": P.q_plus.to_dict(),
        "gamma": P.gamma.to_dict(),
        "form": P.form,
    }


def _path(parts) -> str:
    return "/".join(str(p) for p in parts) or "<root>"


def _physical(doc: dict) -> None:
    """Readable errors for the standing assumptions, before object construction."""
    n, R, u0, vs, p = (doc[k] for k in ("n", "R", "u0", "varsigma", "p"))
    if n < 3:
        raise ConfigError(f"dimension n = {n} violates the condition n >= 3", "problem/n")
    for key, v in (("R", R), ("u0", u0), ("varsigma", vs), ("p", p)):
        if not v > 0:
            raise ConfigError(f"{key} = {v} violates the condition {key} > 0", f"problem/{key}")
    t0 = (n - 2) * R ** (n - 2)
    if u0 / t0 > vs:
        raise ConfigError(
            f"u0/t0 = {u0 / t0:.6g} > varsigma = {vs:.6g} violates the condition u0/t0 <= varsigma "
            f"(t0 = (n-2) R^(n-2) = {t0:.6g})",
            "problem/u0",
        )


def _function(doc: Any, where: str) -> maps.ScalarMap:
    try:
        return maps.from_dict(doc)
    except (InvalidInputError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid function: {exc}", where) from exc


def build_problem(doc: dict, monotone: str | None = None) -> ProblemSpec:
    _physical(doc)
    try:
        m = maps.radial_from_dict(doc["m"])
    except (InvalidInputError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid m: {exc}", "problem/m") from exc
    kw: dict = {}
    for key in ("g", "q_minus", "q_plus"):
        if key in doc:
            kw[key] = _function(doc[key], f"problem/{key}")
    if "gamma" in doc:
        gd = doc["gamma"]
        f = _function(gd["f"], "problem/gamma/f") if "f" in gd else None
        try:
            kw["gamma"] = GammaSpec(gd["kind"], float(gd.get("k", 0.0)), f)
        except InvalidInputError as exc:
            raise ConfigError(str(exc), "problem/gamma") from exc
    try:
        return ProblemSpec(
            int(doc["n"]),
            float(doc["R"]),
            float(doc["u0"]),
            float(doc["varsigma"]),
            float(doc["p"]),
            m,
            form=doc.get("form", "auto"),
            monotone=monotone,
            **kw,
        )
    except InvalidInputError as exc:
        raise ConfigError(str(exc), "problem") from exc


def parse_config(document: dict | str) -> RunConfig:
    """Validate a configuration document (a dict or JSON text) and fill defaults."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"not valid JSON: {exc}") from exc
    errors = sorted(_VALIDATOR.iter_errors(document), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(e.message, _path(e.absolute_path))
    checker = CheckerConfig(**document.get("checker", {}))
    return RunConfig(
        build_problem(document["problem"], checker.monotone),
        GridConfig(**document.get("grid", {})),
        SolverConfig(**document.get("solver", {})),
        checker,
        OutputConfig(**document.get("outputs", {})),
    )


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    return parse_config(text)
