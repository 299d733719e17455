"""Declarative scenarios: parse, validate, run, and serialise reports.

A scenario is one JSON file naming cubes, regions, fields, mappings,
interval functions and a list of checks.  Everything is resolved and
built at load time, so a scenario that loads will run; any problem is a
:class:`ScenarioError` carrying the path of the offending field.  The full
format is documented in ``README.md``.
"""

from __future__ import annotations

import concurrent.futures
import copy
import csv
import io
import json
import math
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import fields as fl
from . import interval_functions as ifn
from . import verifier as vf
from .density import reference_density
from .geometry import Cube, GeometryError, Parallelepiped, Region
from .quadrature import QuadratureSpec
from .report import CheckReport

__all__ = [
    "ScenarioError",
    "Scenario",
    "CheckOutcome",
    "RunReport",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
    "emit_report",
    "report_to_dict",
    "dumps_report",
    "csv_rows",
    "bundled_scenarios",
    "bundled_path",
    "apply_overrides",
    "WORKERS_ENV",
]

WORKERS_ENV = "CUBEFTC_WORKERS"


class ScenarioError(ValueError):
    def __init__(self, where: str, message: str):
        self.where = where
        super().__init__(f"{where}: {message}")


# --------------------------------------------------------------------------
# overrides


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply ``a.b.0.c=value`` assignments; values are JSON literals or bare strings."""
    raw = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise ScenarioError(f"override {item!r}", "expected key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node: Any = raw
        for i, p in enumerate(parts):
            last = i == len(parts) - 1
            if isinstance(node, list):
                try:
                    idx = int(p)
                    node[idx]
                except (ValueError, IndexError):
                    raise ScenarioError(f"override {key}", f"no list element {p!r}") from None
                if last:
                    node[idx] = _parse_value(value)
                else:
                    node = node[idx]
            elif isinstance(node, dict):
                if last:
                    node[p] = _parse_value(value)
                else:
                    if p not in node:
                        raise ScenarioError(f"override {key}", f"no field {p!r}")
                    node = node[p]
            else:
                raise ScenarioError(f"override {key}", f"cannot descend into {p!r}")
    return raw


# --------------------------------------------------------------------------
# model


@dataclass
class CheckSpec:
    id: str
    op: str
    expect_fail: bool
    run: Callable[[], CheckReport] = field(repr=False)


@dataclass
class Scenario:
    name: str
    description: str
    dim: int
    seed: int | None
    checks: list[CheckSpec]
    raw: dict = field(repr=False)
    overrides: list[str] = field(default_factory=list)


@dataclass
class CheckOutcome:
    id: str
    op: str
    expect_fail: bool
    report: CheckReport

    @property
    def ok(self) -> bool:
        return self.report.passed != self.expect_fail


@dataclass
class RunReport:
    scenario: str
    description: str
    checks: list[CheckOutcome]
    wall_time: float
    seed_record: dict

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)


# --------------------------------------------------------------------------
# parsing helpers


class _Ctx:
    def __init__(self, raw: dict):
        self.raw = raw
        self.dim = 0
        self.seed: int | None = None
        self.cubes: dict[str, Cube] = {}
        self.regions: dict[str, Region] = {}
        self.fields: dict[str, Any] = {}
        self.vectors: dict[str, fl.VectorField] = {}
        self.mappings: dict[str, fl.Mapping] = {}
        self.lines: dict[str, ifn.Line2D] = {}
        self.functions: dict[str, ifn.IntervalFunction] = {}


def _req(d: dict, key: str, where: str):
    if not isinstance(d, dict):
        raise ScenarioError(where, "expected an object")
    if key not in d:
        raise ScenarioError(f"{where}.{key}", "missing required field")
    return d[key]


def _num(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(where, f"expected a number, got {v!r}")
    return float(v)


def _int(v, where: str, lo: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        if isinstance(v, float) and v.is_integer():
            v = int(v)
        else:
            raise ScenarioError(where, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ScenarioError(where, f"must be >= {lo}")
    return int(v)


def _scalar(v, where: str):
    if isinstance(v, list):
        if len(v) != 2:
            raise ScenarioError(where, "complex numbers are [re, im]")
        return complex(_num(v[0], where), _num(v[1], where))
    return _num(v, where)


def _vector(v, where: str, n: int | None = None) -> list[float]:
    if not isinstance(v, list):
        raise ScenarioError(where, "expected a list of numbers")
    out = [_num(x, f"{where}[{i}]") for i, x in enumerate(v)]
    if n is not None and len(out) != n:
        raise ScenarioError(where, f"expected {n} coordinates, got {len(out)}")
    return out


def _matrix(v, where: str) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise ScenarioError(where, "expected a list of rows")
    rows = [_vector(r, f"{where}[{i}]") for i, r in enumerate(v)]
    if len({len(r) for r in rows}) != 1:
        raise ScenarioError(where, "ragged matrix")
    return np.array(rows)


def _cube(v, where: str, ctx: _Ctx) -> Cube:
    if isinstance(v, str):
        if v not in ctx.cubes:
            raise ScenarioError(where, f"unknown cube {v!r}")
        return ctx.cubes[v]
    lower = _vector(_req(v, "lower", where), f"{where}.lower", ctx.dim)
    side = _num(_req(v, "side", where), f"{where}.side")
    try:
        return Cube(tuple(lower), side)
    except GeometryError as exc:
        raise ScenarioError(where, str(exc)) from None


def _lookup(table: dict, name, where: str, what: str):
    if not isinstance(name, str) or name not in table:
        raise ScenarioError(where, f"unknown {what} {name!r}")
    return table[name]


def _region(check: dict, where: str, ctx: _Ctx) -> Region:
    if "region" in check:
        name = check["region"]
        if isinstance(name, str) and name in ctx.regions:
            return ctx.regions[name]
        if isinstance(name, str) and name in ctx.cubes:
            return Region((ctx.cubes[name],))
        raise ScenarioError(f"{where}.region", f"unknown region {name!r}")
    if "cube" in check:
        return Region((_cube(check["cube"], f"{where}.cube", ctx),))
    raise ScenarioError(where, "needs a region or cube")


def _spec(d: dict, where: str) -> QuadratureSpec:
    nodes = _int(d.get("nodes", 8), f"{where}.nodes", 1)
    level = _int(d.get("level", 0), f"{where}.level", 0)
    return QuadratureSpec(nodes, level)


def _params(d: dict, where: str, skip: set[str]) -> dict:
    out = {}
    for k, v in d.items():
        if k in skip:
            continue
        if isinstance(v, list):
            nested = bool(v) and isinstance(v[0], list)
            out[k] = _matrix(v, f"{where}.{k}").tolist() if nested else _vector(v, f"{where}.{k}")
        elif isinstance(v, (int, float, str, bool)):
            out[k] = v
        else:
            raise ScenarioError(f"{where}.{k}", f"unsupported parameter {v!r}")
    return out


# --------------------------------------------------------------------------
# sections


def _build_field(spec, where: str, ctx: _Ctx):
    if not isinstance(spec, dict):
        raise ScenarioError(where, "field must be an object with poly, complex or registry")
    kinds = [k for k in ("poly", "complex", "registry") if k in spec]
    if len(kinds) != 1:
        raise ScenarioError(where, "field needs exactly one of poly / complex / registry")
    kind = kinds[0]
    try:
        if kind == "poly":
            dim = _int(spec.get("dim", ctx.dim), f"{where}.dim", 1)
            table = spec["poly"]
            if not isinstance(table, dict):
                raise ScenarioError(f"{where}.poly", "expected a coefficient table")
            return fl.PolyField.from_table(dim, table)
        if kind == "complex":
            table = spec["complex"]
            if not isinstance(table, dict):
                raise ScenarioError(f"{where}.complex", "expected a coefficient table")
            terms = {}
            for key, val in table.items():
                alpha = fl._parse_multi_index(key, 2)
                terms[alpha] = _scalar(val, f"{where}.complex.{key}")
            return fl.complex_poly(terms)
        params = _params(spec, where, {"registry"})
        params.setdefault("dim", ctx.dim)
        return fl.make_field(spec["registry"], **params)
    except fl.FieldError as exc:
        raise ScenarioError(f"{where}.{kind}", str(exc)) from None


def _build_vector(spec, where: str, ctx: _Ctx) -> fl.VectorField:
    try:
        if isinstance(spec, list):
            comps = [_lookup(ctx.fields, name, f"{where}[{i}]", "field") for i, name in enumerate(spec)]
            return fl.VectorField(tuple(comps))
        if isinstance(spec, dict) and "affine" in spec:
            a = spec["affine"]
            M = _matrix(_req(a, "matrix", f"{where}.affine"), f"{where}.affine.matrix")
            P = _vector(a.get("point", [0.0] * len(M)), f"{where}.affine.point", len(M))
            return fl.affine_field(M, P)
    except fl.FieldError as exc:
        raise ScenarioError(where, str(exc)) from None
    raise ScenarioError(where, "vector field must be a list of field names or {affine: ...}")


def _build_mapping(spec, where: str, ctx: _Ctx) -> fl.Mapping:
    if not isinstance(spec, dict):
        raise ScenarioError(where, "mapping must be an object")
    name = _req(spec, "registry", where)
    params = _params(spec, where, {"registry"})
    if name == "identity":
        params.setdefault("dim", ctx.dim)
    try:
        return fl.make_mapping(name, **params)
    except fl.FieldError as exc:
        raise ScenarioError(f"{where}.registry", str(exc)) from None


def _build_line(spec, where: str) -> ifn.Line2D:
    if spec == "diagonal":
        return ifn.Line2D.diagonal()
    if not isinstance(spec, dict):
        raise ScenarioError(where, "line must be 'diagonal' or an object")
    p = _vector(_req(spec, "point", where), f"{where}.point", 2)
    d = _vector(_req(spec, "direction", where), f"{where}.direction", 2)
    t = spec.get("t_range")
    try:
        if t is None:
            return ifn.Line2D(tuple(p), tuple(d))
        return ifn.Line2D(tuple(p), tuple(d), tuple(_vector(t, f"{where}.t_range", 2)))
    except GeometryError as exc:
        raise ScenarioError(where, str(exc)) from None


_KINDS = (
    "integral",
    "flux",
    "image_measure",
    "pushforward_integral",
    "circulation",
    "complex_contour",
    "segment_length",
    "dirac",
    "linear_combination",
)


def _build_function(name: str, spec, where: str, ctx: _Ctx, building: set[str]) -> ifn.IntervalFunction:
    if name in ctx.functions:
        return ctx.functions[name]
    if name in building:
        raise ScenarioError(where, f"cyclic definition of {name!r}")
    building.add(name)
    if not isinstance(spec, dict):
        raise ScenarioError(where, "interval function must be an object")
    kind = _req(spec, "kind", where)
    if kind not in _KINDS:
        raise ScenarioError(f"{where}.kind", f"unknown kind {kind!r}; known: {list(_KINDS)}")
    qs = _spec(spec.get("quadrature", {}), f"{where}.quadrature")
    domain = _cube(spec["domain"], f"{where}.domain", ctx) if "domain" in spec else None
    F = lambda key: _lookup(ctx.fields, _req(spec, key, where), f"{where}.{key}", "field")  # noqa: E731
    try:
        if kind == "integral":
            phi = ifn.Integral(F("f"), qs, domain)
        elif kind == "flux":
            phi = ifn.Flux(_lookup(ctx.vectors, _req(spec, "F", where), f"{where}.F", "vector field"), qs, domain)
        elif kind in ("image_measure", "pushforward_integral"):
            T = _lookup(ctx.mappings, _req(spec, "T", where), f"{where}.T", "mapping")
            kw = dict(
                strategy=spec.get("strategy", "inverse-membership"),
                samples=_int(spec.get("samples", ifn.DEFAULT_SAMPLES), f"{where}.samples", 1),
                confidence=_num(spec.get("confidence", 4.0), f"{where}.confidence"),
                resolution=_int(spec.get("resolution", 256), f"{where}.resolution", 2),
                domain=domain,
            )
            if kind == "image_measure":
                phi = ifn.ImageMeasure(T, **kw)
            else:
                phi = ifn.PushforwardIntegral(T, f=F("f"), **kw)
        elif kind == "circulation":
            phi = ifn.Circulation(F("P"), F("Q"), qs, domain)
        elif kind == "complex_contour":
            phi = ifn.ComplexContour(F("f"), qs, domain)
        elif kind == "segment_length":
            phi = ifn.SegmentLength(_lookup(ctx.lines, _req(spec, "line", where), f"{where}.line", "line"), domain)
        elif kind == "dirac":
            phi = ifn.Dirac(tuple(_vector(_req(spec, "a", where), f"{where}.a", ctx.dim)), domain)
        else:
            subs = []
            for key in ("phi1", "phi2"):
                sub = _req(spec, key, where)
                if sub not in ctx.raw.get("functions", {}):
                    raise ScenarioError(f"{where}.{key}", f"unknown interval function {sub!r}")
                subs.append(_build_function(sub, ctx.raw["functions"][sub], f"functions.{sub}", ctx, building))
            phi = ifn.LinearCombination(
                _scalar(_req(spec, "alpha", where), f"{where}.alpha"),
                subs[0],
                _scalar(_req(spec, "beta", where), f"{where}.beta"),
                subs[1],
                domain,
            )
    except (ifn.DomainError, ValueError, TypeError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(where, str(exc)) from None
    if phi.dim != ctx.dim:
        raise ScenarioError(where, f"{kind} lives in dimension {phi.dim}, scenario dim is {ctx.dim}")
    ctx.functions[name] = phi
    building.discard(name)
    return phi


# --------------------------------------------------------------------------
# checks


def _seed(check: dict, where: str, ctx: _Ctx, required: bool) -> int | None:
    if "seed" in check:
        return _int(check["seed"], f"{where}.seed")
    if ctx.seed is None and required:
        raise ScenarioError(where, "stochastic check needs a seed (check-level or top-level)")
    return ctx.seed


def _function(check: dict, where: str, ctx: _Ctx) -> ifn.IntervalFunction:
    return _lookup(ctx.functions, _req(check, "function", where), f"{where}.function", "interval function")


OP_ALIASES = {"descent_check": "dyadic_descent", "density_check": "estimate_density"}
CHECK_OPS = (
    "check_additivity",
    "verify_ftc",
    "verify_bounds",
    "change_of_variables_check",
    "divergence_theorem_check",
    "affine_flux_identity",
    "green_check",
    "dbar_check",
    "mean_value_locate",
    "dyadic_descent",
    "estimate_density",
)


def _build_check(check: dict, where: str, ctx: _Ctx) -> Callable[[], CheckReport]:
    op = _req(check, "op", where)
    op = OP_ALIASES.get(op, op)
    tol = lambda default: _num(check.get("tol", default), f"{where}.tol")  # noqa: E731
    levels = lambda default: _int(check.get("levels", default), f"{where}.levels", 0)  # noqa: E731
    expected = _scalar(check["expected"], f"{where}.expected") if "expected" in check else None
    qs = _spec(check.get("quadrature", {}), f"{where}.quadrature")

    if op == "check_additivity":
        phi = _function(check, where, ctx)
        cube = _cube(_req(check, "cube", where), f"{where}.cube", ctx)
        k = _int(check.get("k", 2), f"{where}.k", 2)
        rtol = _num(check.get("rtol", 0.0), f"{where}.rtol")
        seed = _seed(check, where, ctx, phi.needs_seed)
        t = tol(1e-8)
        return lambda: ifn.check_additivity(phi, cube, k, t, rtol, seed if phi.needs_seed else None)

    if op == "verify_ftc":
        phi = _function(check, where, ctx)
        cube = _cube(_req(check, "cube", where), f"{where}.cube", ctx)
        D = _lookup(ctx.fields, check["density"], f"{where}.density", "field") if "density" in check else reference_density(phi)
        if D is None:
            raise ScenarioError(where, f"{phi.kind} has no analytic density; give 'density'")
        seed = _seed(check, where, ctx, phi.needs_seed)
        lv, t = levels(2), tol(1e-8)
        return lambda: vf.verify_ftc(phi, D, cube, lv, t, seed if phi.needs_seed else None, qs)

    if op == "verify_bounds":
        phi = _function(check, where, ctx)
        if phi.needs_seed:
            raise ScenarioError(f"{where}.function", "verify_bounds needs a deterministic interval function")
        cube = _cube(_req(check, "cube", where), f"{where}.cube", ctx)
        nodes = _int(check.get("nodes", 4), f"{where}.nodes", 1)
        lv = levels(10)
        extra = _int(check.get("extra", 16), f"{where}.extra", 0)
        seed = _seed(check, where, ctx, False) or 0
        return lambda: vf.verify_bounds(phi, cube, nodes, None, lv, extra, seed)

    if op == "change_of_variables_check":
        T = _lookup(ctx.mappings, _req(check, "mapping", where), f"{where}.mapping", "mapping")
        f = _lookup(ctx.fields, _req(check, "f", where), f"{where}.f", "field")
        if T.inverse is None:
            raise ScenarioError(f"{where}.mapping", "change of variables needs a mapping with an inverse")
        region = _region(check, where, ctx)
        samples = _int(check.get("samples", 10**6), f"{where}.samples", 1)
        seed = _seed(check, where, ctx, True)
        bidir = bool(check.get("bidirectional", True))
        strict = bool(check.get("strict", False))
        t = tol(1e-9)
        return lambda: vf.change_of_variables_check(T, f, region, samples, seed, bidir, strict, t, spec=qs)

    if op == "divergence_theorem_check":
        F = _lookup(ctx.vectors, _req(check, "F", where), f"{where}.F", "vector field")
        region = _region(check, where, ctx)
        lv, t = levels(1), tol(1e-10)
        return lambda: vf.divergence_theorem_check(F, region, t, qs, lv, expected)

    if op == "affine_flux_identity":
        t = tol(1e-12)
        if "random" in check:
            count = _int(check["random"], f"{where}.random", 1)
            seed = _seed(check, where, ctx, True)
            return lambda: _random_affine_batch(count, seed, t)
        M = _matrix(_req(check, "matrix", where), f"{where}.matrix")
        base = _vector(check.get("base", [0.0, 0.0, 0.0]), f"{where}.base", 3)
        spans = _matrix(_req(check, "spans", where), f"{where}.spans")
        point = _vector(check["point"], f"{where}.point", 3) if "point" in check else None
        try:
            P = Parallelepiped(tuple(base), tuple(map(tuple, spans.tolist())))
        except GeometryError as exc:
            raise ScenarioError(f"{where}.spans", str(exc)) from None
        if M.shape != (3, 3):
            raise ScenarioError(f"{where}.matrix", "expected a 3x3 matrix")
        return lambda: vf.affine_flux_identity(M, P, point, t)

    if op == "green_check":
        P = _lookup(ctx.fields, _req(check, "P", where), f"{where}.P", "field")
        Qf = _lookup(ctx.fields, _req(check, "Q", where), f"{where}.Q", "field")
        region = _region(check, where, ctx)
        lv, t = levels(1), tol(1e-10)
        return lambda: vf.green_check(P, Qf, region, t, qs, lv, expected)

    if op == "dbar_check":
        f = _lookup(ctx.fields, _req(check, "f", where), f"{where}.f", "field")
        region = _region(check, where, ctx)
        lv, t = levels(1), tol(1e-10)
        return lambda: vf.dbar_check(f, region, t, qs, lv, expected)

    if op in ("mean_value_locate", "dyadic_descent"):
        phi = _function(check, where, ctx)
        cube = _cube(_req(check, "cube", where), f"{where}.cube", ctx)
        depth = _int(check.get("depth", 12), f"{where}.depth", 1)
        seed = _seed(check, where, ctx, phi.needs_seed) if phi.needs_seed else None
        if op == "mean_value_locate":
            t = tol(1e-8)
            return lambda: vf.mean_value_locate(phi, cube, depth, seed, t).report(t)
        t = tol(1e-9)
        return lambda: vf.descent_check(phi, cube, depth, t, seed)

    if op == "estimate_density":
        phi = _function(check, where, ctx)
        point = _vector(_req(check, "point", where), f"{where}.point", ctx.dim)
        const = _num(check["divergent_constant"], f"{where}.divergent_constant") if "divergent_constant" in check else None
        if (expected is None) == (const is None):
            raise ScenarioError(where, "give exactly one of expected / divergent_constant")
        delta0 = _num(check["delta0"], f"{where}.delta0") if "delta0" in check else None
        lv = levels(10)
        extra = _int(check.get("extra", 16), f"{where}.extra", 0)
        seed = _seed(check, where, ctx, False) or 0
        t = tol(1e-3)
        crt = _num(check.get("constant_rtol", 0.02), f"{where}.constant_rtol")
        return lambda: vf.density_check(phi, point, expected, t, const, crt, delta0, lv, extra, seed)

    raise ScenarioError(f"{where}.op", f"unknown check op {op!r}; known: {list(CHECK_OPS)}")


def _random_affine_batch(count: int, seed: int, tol: float) -> CheckReport:
    rng = np.random.default_rng(seed)
    worst = None
    n_pass = 0
    for _ in range(count):
        while True:
            spans = rng.normal(size=(3, 3))
            if abs(np.linalg.det(spans)) > 1e-3:
                break
        M = rng.normal(size=(3, 3))
        P = Parallelepiped(tuple(rng.normal(size=3)), tuple(map(tuple, spans)))
        r = vf.affine_flux_identity(M, P, tol=tol)
        n_pass += r.passed
        if worst is None or r.abs_error - r.tol > worst.abs_error - worst.tol:
            worst = r
    worst.name = f"affine_flux_identity[{count} random]"
    worst.details["instances"] = count
    worst.details["instances_passed"] = n_pass
    return worst


# --------------------------------------------------------------------------
# entry points


def parse_scenario(raw: dict, overrides: list[str] | None = None) -> Scenario:
    overrides = list(overrides or [])
    raw = apply_overrides(raw, overrides)
    if not isinstance(raw, dict):
        raise ScenarioError("scenario", "top level must be an object")
    ctx = _Ctx(raw)
    name = _req(raw, "name", "scenario")
    ctx.dim = _int(_req(raw, "dim", "scenario"), "dim", 1)
    if "seed" in raw:
        ctx.seed = _int(raw["seed"], "seed")

    for key, spec in raw.get("cubes", {}).items():
        ctx.cubes[key] = _cube(spec, f"cubes.{key}", ctx)
    for key, spec in raw.get("regions", {}).items():
        if not isinstance(spec, list):
            raise ScenarioError(f"regions.{key}", "region must be a list of cubes")
        cells = [_cube(c, f"regions.{key}[{i}]", ctx) for i, c in enumerate(spec)]
        try:
            ctx.regions[key] = Region.of(cells)
        except GeometryError as exc:
            raise ScenarioError(f"regions.{key}", str(exc)) from None
    for key, spec in raw.get("fields", {}).items():
        ctx.fields[key] = _build_field(spec, f"fields.{key}", ctx)
    for key, spec in raw.get("vector_fields", {}).items():
        ctx.vectors[key] = _build_vector(spec, f"vector_fields.{key}", ctx)
    for key, spec in raw.get("mappings", {}).items():
        ctx.mappings[key] = _build_mapping(spec, f"mappings.{key}", ctx)
    for key, spec in raw.get("lines", {}).items():
        ctx.lines[key] = _build_line(spec, f"lines.{key}")
    for key, spec in raw.get("functions", {}).items():
        _build_function(key, spec, f"functions.{key}", ctx, set())

    default_xfail = bool(raw.get("expect_fail", False))
    checks = []
    raw_checks = raw.get("checks", [])
    if not isinstance(raw_checks, list):
        raise ScenarioError("checks", "expected a list")
    for i, check in enumerate(raw_checks):
        where = f"checks[{i}]"
        thunk = _build_check(check, where, ctx)
        cid = str(check.get("id", f"{i}:{check['op']}"))
        checks.append(CheckSpec(cid, check["op"], bool(check.get("expect_fail", default_xfail)), thunk))
    return Scenario(name, str(raw.get("description", "")), ctx.dim, ctx.seed, checks, raw, overrides)


def bundled_path(name: str) -> Path:
    p = resources.files("cubeftc") / "scenarios" / f"{name}.json"
    return Path(str(p))


def bundled_scenarios() -> list[str]:
    d = resources.files("cubeftc") / "scenarios"
    return sorted(p.name[:-5] for p in d.iterdir() if p.name.endswith(".json"))


def _read(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists() and not path.suffix:
        candidate = bundled_path(str(path))
        if candidate.exists():
            path = candidate
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(str(path), f"cannot read: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path} line {exc.lineno} column {exc.colno}", exc.msg) from None


def load_scenario(path: str | Path, overrides: list[str] | None = None) -> Scenario:
    return parse_scenario(_read(path), overrides)


def _workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))


def run_scenario(path_or_scenario, overrides: list[str] | None = None, workers: int | None = None) -> RunReport:
    """Execute every check; results keep declaration order whatever the worker count."""
    sc = path_or_scenario if isinstance(path_or_scenario, Scenario) else load_scenario(path_or_scenario, overrides)
    t0 = time.perf_counter()
    workers = workers or _workers()
    if workers > 1 and len(sc.checks) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(lambda c: c.run(), sc.checks))
    else:
        reports = [c.run() for c in sc.checks]
    outcomes = [CheckOutcome(c.id, c.op, c.expect_fail, r) for c, r in zip(sc.checks, reports)]
    return RunReport(
        sc.name,
        sc.description,
        outcomes,
        time.perf_counter() - t0,
        {"seed": sc.seed, "overrides": list(sc.overrides)},
    )


# --------------------------------------------------------------------------
# serialisation


def _plain(v):
    """JSON-ready primitives: complex -> {re, im}, non-finite floats -> strings."""
    if isinstance(v, (bool, str)) or v is None:
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": _plain(v.real), "im": _plain(v.imag)}
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _check_dict(c: CheckOutcome) -> dict:
    r = c.report
    return {
        "id": c.id,
        "op": c.op,
        "name": r.name,
        "expect_fail": c.expect_fail,
        "passed": r.passed,
        "ok": c.ok,
        "lhs": _plain(r.lhs),
        "rhs": _plain(r.rhs),
        "abs_error": _plain(r.abs_error),
        "rel_error": _plain(r.rel_error),
        "tol": _plain(r.tol),
        "sigma": _plain(r.sigma),
        "confidence": _plain(r.confidence),
        "table": [
            {"level": row.level, "lhs": _plain(row.lhs), "rhs": _plain(row.rhs), "error": _plain(row.error)}
            for row in r.table
        ],
        "details": _plain(r.details),
    }


def report_to_dict(report: RunReport, include_timing: bool = False) -> dict:
    d = {
        "scenario": report.scenario,
        "description": report.description,
        "passed": report.passed,
        "seed_record": _plain(report.seed_record),
        "checks": [_check_dict(c) for c in report.checks],
    }
    if include_timing:
        d["wall_time"] = report.wall_time
    return d


def _fmt_float(x: float) -> str:
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _dump(v, indent: int, level: int, out: list[str]) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(v, dict):
        if not v:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, x) in enumerate(v.items()):
            out.append(f"{pad}{json.dumps(k)}: ")
            _dump(x, indent, level + 1, out)
            out.append(",\n" if i < len(v) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(v, list):
        if not v:
            out.append("[]")
            return
        out.append("[\n")
        for i, x in enumerate(v):
            out.append(pad)
            _dump(x, indent, level + 1, out)
            out.append(",\n" if i < len(v) - 1 else "\n")
        out.append(end + "]")
    elif isinstance(v, float):
        out.append(_fmt_float(v))
    else:
        out.append(json.dumps(v))


def dumps_report(report: RunReport, include_timing: bool = False) -> str:
    """JSON text with floats at 17 significant digits and insertion key order."""
    out: list[str] = []
    _dump(report_to_dict(report, include_timing), 2, 0, out)
    return "".join(out) + "\n"


def _cell(v) -> str:
    if isinstance(v, complex):
        return f"{_fmt_float(v.real)}{'+' if v.imag >= 0 or math.isnan(v.imag) else '-'}{_fmt_float(abs(v.imag))}j"
    if isinstance(v, float):
        return _fmt_float(v)
    return str(v)


CSV_HEADER = ["check", "level", "lhs", "rhs", "error", "tol", "sigma", "pass"]


def csv_rows(report: RunReport) -> list[list[str]]:
    rows = [CSV_HEADER]
    for c in report.checks:
        r = c.report
        tail = [_cell(r.tol), _cell(r.sigma), str(r.passed).lower()]
        if r.table:
            for row in r.table:
                rows.append([c.id, str(row.level), _cell(row.lhs), _cell(row.rhs), _cell(row.error), *tail])
        else:
            rows.append([c.id, "", _cell(r.lhs), _cell(r.rhs), _cell(r.abs_error), *tail])
    return rows


def emit_report(report: RunReport, fmt: str = "json", path: str | Path | None = None, include_timing: bool = False) -> str:
    """Serialise ``report`` as json or csv; writes to ``path`` when given and returns the text."""
    if fmt == "json":
        text = dumps_report(report, include_timing)
    elif fmt == "csv":
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(csv_rows(report))
        text = buf.getvalue()
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text
