"""Checks of the cube form of the fundamental theorem of calculus and its corollaries.

Every function returns a :class:`~cubeftc.report.CheckReport`; a failed
identity is a report with ``passed=False``, never an exception.  The pass
rule is always ``abs_error <= tol + confidence * sigma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import fields as fl
from .density import DescentTrace, dyadic_descent, estimate_density, reference_density
from .geometry import Cube, Parallelepiped, Region, grid_partition
from .interval_functions import (
    Circulation,
    ComplexContour,
    IntervalFunction,
    Stochastic,
    derive_seed,
    line_boundary_integral,
    membership_sample,
    boundary_flux,
)
from .quadrature import DEFAULT_SPEC, QuadratureSpec, cube_rule, integrate_cube, tensor_rule
from .report import DEFAULT_CONFIDENCE, CheckReport, RefinementRow, make_report

__all__ = [
    "CheckReport",
    "verify_ftc",
    "verify_bounds",
    "change_of_variables_check",
    "divergence_theorem_check",
    "affine_flux_identity",
    "green_check",
    "dbar_check",
    "mean_value_locate",
    "MeanValueResult",
    "descent_check",
    "density_check",
]


def _confidence(phi: IntervalFunction) -> float:
    tm = phi.tolerance
    return tm.confidence if isinstance(tm, Stochastic) else DEFAULT_CONFIDENCE


def _as_region(r) -> Region:
    if isinstance(r, Region):
        return r
    if isinstance(r, Cube):
        return Region((r,))
    return Region.of(r)


def _region_integral(D: Callable, region: Region, spec: QuadratureSpec):
    total = 0.0
    for c in region.cells:
        total = total + integrate_cube(D, c, spec)
    return total


def _with_anchor(lhs, rhs, expected) -> tuple[float, dict]:
    err = abs(lhs - rhs)
    if expected is None:
        return err, {}
    anchor_err = abs(lhs - expected)
    return max(err, anchor_err), {"expected": expected, "anchor_error": anchor_err}


def verify_ftc(
    phi: IntervalFunction,
    D: Callable | None,
    cube: Cube,
    levels: int = 2,
    tol: float = 1e-8,
    seed: int | None = None,
    spec: QuadratureSpec = DEFAULT_SPEC,
    cell_k: int = 4,
) -> CheckReport:
    """``phi(Q)`` against ``int_Q D`` with a composite-level refinement table.

    ``D`` defaults to the analytic density of ``phi``.  For deterministic
    ``phi`` the per-cell residual density ``max_i |phi(Q_i) - int_{Q_i} D| / m(Q_i)``
    is recorded on ``k = cell_k/2`` and ``k = cell_k`` grids.
    """
    if D is None:
        D = reference_density(phi)
        if D is None:
            raise ValueError(f"{phi.kind} has no analytic density; pass D explicitly")
    est = phi.evaluate(cube, seed)
    table = []
    rhs = None
    for c in range(levels + 1):
        rhs = integrate_cube(D, cube, spec.refined(c))
        table.append(RefinementRow(c, est.value, rhs, abs(est.value - rhs)))
    details: dict = {"kind": phi.kind, "quadrature_nodes": spec.nodes}
    if not phi.needs_seed and cell_k >= 2:
        fine = spec.refined(levels)
        dens = {}
        for k in sorted({max(cell_k // 2, 1), cell_k}):
            worst = 0.0
            for q in grid_partition(cube, k):
                worst = max(worst, abs(phi(q) - integrate_cube(D, q, fine)) / q.measure)
            dens[str(k)] = worst
        details["cell_residual_density"] = dens
    return make_report(
        f"ftc[{phi.kind}]",
        est.value,
        rhs,
        tol=tol,
        sigma=est.sigma,
        confidence=_confidence(phi),
        table=table,
        details=details,
    )


def verify_bounds(
    phi: IntervalFunction,
    cube: Cube,
    nodes: int = 4,
    delta0: float | None = None,
    levels: int = 10,
    extra: int = 16,
    seed: int = 0,
    quad_tol: float = 1e-9,
) -> CheckReport:
    """``int_Q lower density - slack <= phi(Q) <= int_Q upper density + slack``.

    Densities are estimated at the nodes of a Gauss rule on ``Q``.  A bound
    whose density diverges at some node is reported as not checkable and
    does not count against the pass flag.
    """
    if phi.needs_seed or phi.is_stochastic:
        raise ValueError("verify_bounds needs a deterministic interval function")
    if delta0 is None:
        delta0 = 0.1 * cube.side
    pts, wts = cube_rule(cube, QuadratureSpec(nodes, 0))
    ests = [estimate_density(phi, p, delta0, levels, extra, seed) for p in pts]
    up_bad = [tuple(e.point) for e in ests if math.isinf(e.upper)]
    lo_bad = [tuple(e.point) for e in ests if math.isinf(e.lower)]
    slack = quad_tol + math.fsum(w * e.extrapolation_error for w, e in zip(wts, ests) if e.finite)
    upper_int = math.inf if up_bad else math.fsum(w * e.upper for w, e in zip(wts, ests))
    lower_int = -math.inf if lo_bad else math.fsum(w * e.lower for w, e in zip(wts, ests))
    value = phi(cube)
    violation = 0.0
    if not up_bad:
        violation = max(violation, value - upper_int)
    if not lo_bad:
        violation = max(violation, lower_int - value)
    details = {
        "kind": phi.kind,
        "upper_integral": upper_int,
        "lower_integral": lower_int,
        "upper_checkable": not up_bad,
        "lower_checkable": not lo_bad,
        "upper_status": "ok" if not up_bad else "bound not checkable at node",
        "lower_status": "ok" if not lo_bad else "bound not checkable at node",
        "nodes_divergent_upper": [list(p) for p in up_bad],
        "nodes_divergent_lower": [list(p) for p in lo_bad],
        "slack": slack,
        "nodes": len(ests),
    }
    return make_report(
        f"bounds[{phi.kind}]",
        value,
        upper_int if not up_bad else lower_int,
        tol=slack,
        abs_error=max(violation, 0.0),
        details=details,
    )


@dataclass(frozen=True)
class _Direction:
    name: str
    lhs: float
    sigma: float
    rhs: float
    hits: int
    min_weight: float


def _cov_direction(name, T: fl.Mapping, f, region: Region, samples: int, seed: int, spec: QuadratureSpec, strict: bool):
    def integrand(x):
        return f(T(x)) * np.abs(fl.jacobian_determinants(T, x))

    lhs = rhs = var = 0.0
    hits = 0
    min_w = math.inf
    for i, cell in enumerate(region.cells):
        s = seed if len(region.cells) == 1 else derive_seed(seed, i)
        mc = membership_sample(T, cell, samples, s, weight=f)
        lhs += mc.value
        var += mc.sigma**2
        hits += mc.hits
        min_w = min(min_w, mc.min_weight)
        rhs += integrate_cube(integrand, cell, spec)
    if min_w < 0 and strict:
        raise ValueError(f"integrand takes negative values on the image under {T.name}")
    return _Direction(name, lhs, math.sqrt(var), rhs, hits, min_w)


def change_of_variables_check(
    T: fl.Mapping,
    f,
    cube,
    samples: int = 10**6,
    seed: int = 0,
    bidirectional: bool = True,
    strict: bool = False,
    tol: float = 1e-9,
    confidence: float = DEFAULT_CONFIDENCE,
    spec: QuadratureSpec = DEFAULT_SPEC,
    inverse_cube=None,
) -> CheckReport:
    """``int_{T(Q)} f dy`` (Monte Carlo) against ``int_Q f(T(x)) |det dT(x)| dx`` (quadrature).

    ``cube`` may also be a cube union, handled cell by cell.  In
    bidirectional mode the same identity is checked for ``T**-1`` on
    ``inverse_cube`` (default: the same set).  That direction needs a
    differentiable inverse, so it is skipped for mappings whose Jacobian can
    vanish.  The report shows the direction with the smaller margin.
    """
    if T.inverse is None:
        raise ValueError(f"mapping {T.name!r} has no inverse")
    region = _as_region(cube)
    directions = [_cov_direction("forward", T, f, region, samples, seed, spec, strict)]
    reverse_status = "off"
    if bidirectional:
        if T.regular:
            q2 = region if inverse_cube is None else _as_region(inverse_cube)
            directions.append(_cov_direction("inverse", T.inverted(), f, q2, samples, derive_seed(seed, 1), spec, strict))
            reverse_status = "checked"
        else:
            reverse_status = "not applicable: inverse not differentiable where det dT = 0"
    details: dict = {"mapping": T.name, "reverse": reverse_status, "samples": int(samples), "cells": len(region.cells)}
    worst = None
    for d in directions:
        err = abs(d.lhs - d.rhs)
        margin = err - (tol + confidence * d.sigma)
        details[d.name] = {"lhs": d.lhs, "rhs": d.rhs, "sigma": d.sigma, "error": err, "hits": d.hits}
        if d.min_weight < 0:
            details[d.name]["note"] = "integrand changes sign; checked as a signed identity"
        if worst is None or margin > worst[0]:
            worst = (margin, d)
    d = worst[1]
    details["reported_direction"] = d.name
    return make_report(
        f"change_of_variables[{T.name}]",
        d.lhs,
        d.rhs,
        tol=tol,
        sigma=d.sigma,
        confidence=confidence,
        table=[RefinementRow(i, e.lhs, e.rhs, abs(e.lhs - e.rhs)) for i, e in enumerate(directions)],
        details=details,
    )


def divergence_theorem_check(
    F: fl.VectorField,
    region,
    tol: float = 1e-10,
    spec: QuadratureSpec = DEFAULT_SPEC,
    levels: int = 1,
    expected=None,
) -> CheckReport:
    """Boundary flux of a cube union against the integral of ``div F`` over its cells."""
    region = _as_region(region)
    div = fl.divergence_field(F)
    table = []
    lhs = rhs = 0.0
    for c in range(levels + 1):
        s = spec.refined(c)
        lhs = boundary_flux(F, region, s)
        rhs = _region_integral(div, region, s)
        table.append(RefinementRow(c, lhs, rhs, abs(lhs - rhs)))
    err, extra = _with_anchor(lhs, rhs, expected)
    return make_report(
        "divergence_theorem",
        lhs,
        rhs,
        tol=tol,
        abs_error=err,
        table=table,
        details={"cells": len(region.cells), "boundary_faces": len(region.boundary_faces()), **extra},
    )


def _face_pairs(P: Parallelepiped):
    v1, v2, v3 = (np.asarray(v) for v in P.spans)
    # cyclic, so det(a, b, w) = det(v1, v2, v3) for every pair
    return [(v1, v2, v3), (v2, v3, v1), (v3, v1, v2)]


def affine_flux_identity(
    M,
    P: Parallelepiped,
    point: Sequence[float] | None = None,
    tol: float = 1e-12,
) -> CheckReport:
    """Flux of ``M (X - point)`` through a parallelepiped, face by face.

    Each opposite pair spanned by ``(a, b)`` with third vector ``w``
    contributes ``int int det(F(p' + t1 a + t2 b + w), a, b) - det(F(p' + t1 a + t2 b), a, b)``
    over the unit square, integrated with a 2x2 Gauss rule (these integrands
    are affine in ``t``).  The total is compared with ``trace(M) det(v1, v2, v3)``
    within ``tol * max(1, |trace(M) det|)``.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3):
        raise ValueError("affine flux identity is stated for 3x3 matrices")
    base = np.asarray(P.base)
    spans = np.asarray(P.spans)
    p = base + 0.5 * spans.sum(axis=0) if point is None else np.asarray(point, dtype=float)
    t, w = tensor_rule([(0.0, 1.0), (0.0, 1.0)], QuadratureSpec(2, 0))

    def F(X):
        return (X - p) @ M.T

    pair_values = []
    closed_terms = []
    for a, b, third in _face_pairs(P):
        X0 = base + t[:, :1] * a + t[:, 1:] * b
        ab = np.broadcast_to(np.stack([a, b], axis=-1), (len(t), 3, 2))
        outer = np.linalg.det(np.concatenate([F(X0 + third)[:, :, None], ab], axis=2))
        inner = np.linalg.det(np.concatenate([F(X0)[:, :, None], ab], axis=2))
        pair_values.append(float(w @ outer) - float(w @ inner))
        closed_terms.append(float(np.linalg.det(np.stack([M @ third, a, b], axis=-1))))
    lhs = math.fsum(pair_values)
    rhs = float(np.trace(M)) * P.volume
    return make_report(
        "affine_flux_identity",
        lhs,
        rhs,
        tol=tol * max(1.0, abs(rhs)),
        details={"pair_fluxes": pair_values, "pair_closed_form": closed_terms, "trace": float(np.trace(M)), "volume": P.volume},
    )


def green_check(
    P_fld,
    Q_fld,
    region,
    tol: float = 1e-10,
    spec: QuadratureSpec = DEFAULT_SPEC,
    levels: int = 1,
    expected=None,
) -> CheckReport:
    """``oint P dx + Q dy`` against ``int (Q_x - P_y) dA``."""
    region = _as_region(region)
    kind = Circulation(P_fld, Q_fld, spec)
    curl = reference_density(kind)
    table = []
    lhs = rhs = 0.0
    for c in range(levels + 1):
        s = spec.refined(c)
        lhs = line_boundary_integral(kind, region, s)
        rhs = _region_integral(curl, region, s)
        table.append(RefinementRow(c, lhs, rhs, abs(lhs - rhs)))
    err, extra = _with_anchor(lhs, rhs, expected)
    return make_report("green", lhs, rhs, tol=tol, abs_error=err, table=table, details={"cells": len(region.cells), **extra})


def dbar_check(
    f,
    region,
    tol: float = 1e-10,
    spec: QuadratureSpec = DEFAULT_SPEC,
    levels: int = 1,
    expected=None,
) -> CheckReport:
    """``oint f dz`` against ``int 2i df/dzbar dA``; the contour is re-integrated at doubled order as an oracle."""
    region = _as_region(region)
    kind = ComplexContour(f, spec)
    density = fl.dbar_field(f)
    table = []
    lhs = rhs = 0.0
    for c in range(levels + 1):
        s = spec.refined(c)
        lhs = line_boundary_integral(kind, region, s)
        rhs = _region_integral(density, region, s)
        table.append(RefinementRow(c, lhs, rhs, abs(lhs - rhs)))
    oracle = line_boundary_integral(kind, region, QuadratureSpec(2 * spec.nodes, spec.level + levels))
    err, extra = _with_anchor(lhs, rhs, expected)
    err = max(err, abs(lhs - oracle))
    return make_report(
        "dbar",
        lhs,
        rhs,
        tol=tol,
        abs_error=err,
        table=table,
        details={"cells": len(region.cells), "edge_oracle": oracle, "oracle_error": abs(lhs - oracle), **extra},
    )


@dataclass
class MeanValueResult:
    point: tuple[float, ...]
    certified_ratio: float
    parent_ratio: float
    certified: bool
    trace: DescentTrace

    def report(self, tol: float = 1e-8) -> CheckReport:
        shortfall = max(0.0, self.parent_ratio - self.certified_ratio)
        return make_report(
            "mean_value_locate",
            self.certified_ratio,
            self.parent_ratio,
            tol=tol,
            abs_error=shortfall,
            details={
                "point": list(self.point),
                "depth": len(self.trace.levels) - 1,
                "monotonicity_violations": self.trace.monotonicity_violations,
                "additivity_defects": self.trace.additivity_defects,
            },
        )


def mean_value_locate(
    phi: IntervalFunction, cube: Cube, depth: int = 12, seed: int | None = None, tol: float = 1e-8
) -> MeanValueResult:
    """Point ``p`` in ``Q`` with descent ratio at least ``phi(Q)/m(Q)`` (within ``tol``)."""
    trace = dyadic_descent(phi, cube, depth, seed)
    parent = trace.levels[0].ratio
    final = trace.final_ratio
    return MeanValueResult(trace.limit_point, final, parent, final >= parent - tol, trace)


def descent_check(
    phi: IntervalFunction,
    cube: Cube,
    depth: int = 12,
    tol: float = 1e-9,
    seed: int | None = None,
) -> CheckReport:
    """Descent ratios must not decrease and children must sum to their parent.

    ``abs_error`` is the larger of the worst ratio drop and the worst
    relative additivity defect along the trace.
    """
    trace = dyadic_descent(phi, cube, depth, seed, tol)
    r = trace.ratios
    drops = [r[i] - r[i + 1] for i in range(len(r) - 1)]
    worst_drop = max(0.0, max(drops))
    defects = [
        lv.children_sum_defect / max(1.0, abs(prev.ratio * prev.cube.measure))
        for prev, lv in zip(trace.levels, trace.levels[1:])
    ]
    worst_defect = 0.0 if phi.needs_seed else max(defects)
    return make_report(
        f"descent[{phi.kind}]",
        r[-1],
        r[0],
        tol=tol,
        abs_error=max(worst_drop, worst_defect),
        details={
            "ratios": r,
            "limit_point": list(trace.limit_point),
            "monotonicity_violations": trace.monotonicity_violations,
            "additivity_defects": trace.additivity_defects,
            "worst_drop": worst_drop,
            "worst_defect": worst_defect,
        },
    )


def density_check(
    phi: IntervalFunction,
    x: Sequence[float],
    expected: float | None = None,
    tol: float = 1e-3,
    divergent_constant: float | None = None,
    constant_rtol: float = 0.02,
    delta0: float | None = None,
    levels: int = 10,
    extra: int = 16,
    seed: int = 0,
) -> CheckReport:
    """Compare a density ladder at ``x`` with an expected finite density or divergence constant.

    With ``expected``: both extremes must lie within ``tol`` of it.  With
    ``divergent_constant``: the upper density must be flagged divergent with
    ``max_ratio * delta`` settling within ``constant_rtol`` of the constant.
    """
    if (expected is None) == (divergent_constant is None):
        raise ValueError("give exactly one of expected / divergent_constant")
    est = estimate_density(phi, x, delta0, levels, extra, seed)
    details = {
        "upper": est.upper,
        "lower": est.lower,
        "slope": est.slope,
        "upper_constant": est.upper_constant,
        "lower_constant": est.lower_constant,
        "reliable_scale": est.ladder[est.reliable_index].scale,
        "family": est.family,
    }
    table = [RefinementRow(k, r.max_ratio, r.min_ratio, r.spread) for k, r in enumerate(est.ladder)]
    if expected is not None:
        err = max(abs(est.upper - expected), abs(est.lower - expected))
        return make_report(f"density[{phi.kind}]", est.upper, expected, tol=tol, abs_error=err, table=table, details=details)
    c = est.upper_constant
    err = math.inf if c is None else abs(c - divergent_constant)
    return make_report(
        f"divergent_density[{phi.kind}]",
        math.nan if c is None else c,
        divergent_constant,
        tol=constant_rtol * abs(divergent_constant),
        abs_error=err,
        table=table,
        details=details,
    )
