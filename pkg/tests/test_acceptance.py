"""Acceptance gate: nine criteria, each printing one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in
the terminal summary) or directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import contextlib
import io
import math
import time

import numpy as np

from cubeftc import fields as fl
from cubeftc import verifier as vf
from cubeftc.density import estimate_density
from cubeftc.fields import PolyField
from cubeftc.geometry import Cube, Parallelepiped, Region, grid_partition
from cubeftc.interval_functions import (
    Circulation,
    ComplexContour,
    Dirac,
    Flux,
    ImageMeasure,
    Integral,
    Line2D,
    LinearCombination,
    SegmentLength,
)
from cubeftc.scenario import bundled_path, bundled_scenarios, dumps_report, run_scenario

RESULTS: list[str] = []
UNIT = Cube((0.0, 0.0), 1.0)


def record(n: int, title: str, ok: bool, elapsed: float, limit: float | None, detail: str) -> None:
    timed = ok and (limit is None or elapsed < limit)
    bound = f" < {limit:g}s" if limit is not None else ""
    line = f"[criterion {n}] {'PASS' if timed else 'FAIL'} {title}: {detail} ({elapsed:.2f}s{bound})"
    RESULTS.append(line)
    print(line)
    assert ok, line
    assert limit is None or elapsed < limit, line


def rand_poly(rng, dim: int, degree: int) -> PolyField:
    terms = {}
    for alpha in np.ndindex(*([degree + 1] * dim)):
        if sum(alpha) <= degree:
            terms[alpha] = rng.uniform(-1, 1)
    return PolyField(dim, terms)


def rand_cube(rng, dim: int) -> Cube:
    return Cube(tuple(rng.uniform(-1, 1, dim)), float(rng.uniform(0.2, 1.5)))


# --------------------------------------------------------------------------


def test_criterion_1_additivity():
    t0 = time.perf_counter()
    worst = 0.0
    count = 0
    kinds = ("integral", "flux", "flux3d", "circulation", "complex_contour", "segment_length", "linear_combination")
    for kind in kinds:
        for s in range(50):
            rng = np.random.default_rng([1, kinds.index(kind), s])
            dim = 3 if kind == "flux3d" else 2
            f, g, h = (rand_poly(rng, dim, 4) for _ in range(3))
            phi = {
                "integral": lambda: Integral(f),
                "flux": lambda: Flux(fl.VectorField((f, g))),
                "flux3d": lambda: Flux(fl.VectorField((f, g, h))),
                "circulation": lambda: Circulation(f, g),
                "complex_contour": lambda: ComplexContour(f + g * 1j),
                "segment_length": lambda: SegmentLength(Line2D(tuple(rng.uniform(-1, 1, 2)), tuple(rng.normal(size=2)))),
                "linear_combination": lambda: LinearCombination(rng.normal(), Integral(f), rng.normal(), Flux(fl.VectorField((g, h)))),
            }[kind]()
            q = rand_cube(rng, dim)
            k = int(rng.integers(2, 5))
            whole = phi(q)
            parts = sum(phi(c) for c in grid_partition(q, k))
            worst = max(worst, abs(whole - parts) / (1 + abs(whole)))
            count += 1
    atom = Dirac((0.5, 0.25))
    whole = atom(UNIT)
    parts = sum(atom(c) for c in grid_partition(UNIT, 2))
    ok = worst <= 1e-8 and whole == 1.0 and parts == 2.0
    record(1, "additivity", ok, time.perf_counter() - t0, 5.0,
           f"{count} pairs, worst relative defect {worst:.2e}; dirac parts {parts:g} vs whole {whole:g}")


def test_criterion_2_density_convergence():
    t0 = time.perf_counter()
    min_slope = math.inf
    worst_err = 0.0
    for s in range(10):
        rng = np.random.default_rng([2, s])
        f = rand_poly(rng, 2, 3)
        phi = Integral(f)
        for x in rng.uniform(0.2, 0.8, size=(20, 2)):
            est = estimate_density(phi, x, levels=10)
            fx = float(f(x))
            errs = [max(abs(r.max_ratio - fx), abs(r.min_ratio - fx)) for r in est.ladder]
            err_slope = -np.polyfit(np.arange(len(errs)), np.log2(errs), 1)[0]
            min_slope = min(min_slope, est.slope, err_slope)
            worst_err = max(worst_err, errs[-1])
    ok = min_slope >= 0.9 and worst_err <= 1e-3
    record(2, "density convergence", ok, time.perf_counter() - t0, 10.0,
           f"200 ladders, min slope {min_slope:.3f}, worst final error {worst_err:.2e}")


def test_criterion_3_ftc_equality():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    f, g = rand_poly(rng, 2, 4), rand_poly(rng, 2, 4)
    q = Cube((-0.3, 0.1), 1.2)
    reports = [
        vf.verify_ftc(Integral(f), None, q, tol=1e-8),
        vf.verify_ftc(Flux(fl.VectorField((f, g))), None, q, tol=1e-8),
        vf.verify_ftc(ComplexContour(fl.complex_poly({(0, 2): 1.0, (1, 1): 0.5 - 1j})), None, q, tol=1e-8),
        vf.verify_ftc(ImageMeasure(fl.make_mapping("shear"), samples=10**6), None, UNIT, seed=31, tol=0.0),
    ]
    ok = all(r.passed for r in reports) and reports[-1].confidence == 4.0
    detail = ", ".join(f"{r.name} err {r.abs_error:.1e}/{r.budget:.1e}" for r in reports)
    record(3, "ftc equality", ok, time.perf_counter() - t0, 30.0, detail)


def test_criterion_4_dyadic_descent():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    f, g = rand_poly(rng, 2, 3), rand_poly(rng, 2, 3)
    kinds = [
        Integral(f),
        Flux(fl.VectorField((f, g))),
        Circulation(f, g),
        SegmentLength(Line2D.diagonal()),
        LinearCombination(1.5, Integral(f), -0.5, Circulation(g, f)),
    ]
    mono = [vf.descent_check(phi, UNIT, depth=12, tol=1e-9) for phi in kinds]
    certified = 0
    for s in range(20):
        r = np.random.default_rng([4, s])
        res = vf.mean_value_locate(Integral(rand_poly(r, 2, 4)), rand_cube(r, 2), depth=12)
        certified += res.certified_ratio >= res.parent_ratio - 1e-8
    ok = all(r.passed for r in mono) and certified == 20
    worst = max(r.abs_error for r in mono)
    record(4, "dyadic descent", ok, time.perf_counter() - t0, 5.0,
           f"{len(kinds)} kinds monotone at depth 12 (worst {worst:.1e}), {certified}/20 mean-value certified")


def test_criterion_5_affine_flux():
    t0 = time.perf_counter()
    passed = 0
    worst = 0.0
    for s in range(100):
        rng = np.random.default_rng([5, s])
        spans = rng.normal(size=(3, 3))
        while abs(np.linalg.det(spans)) < 1e-2:
            spans = rng.normal(size=(3, 3))
        P = Parallelepiped(tuple(rng.normal(size=3)), tuple(map(tuple, spans)))
        r = vf.affine_flux_identity(rng.normal(size=(3, 3)), P, point=rng.normal(size=3), tol=1e-12)
        passed += r.passed
        worst = max(worst, r.abs_error / max(1.0, abs(r.rhs)))
    record(5, "affine flux identity", passed == 100, time.perf_counter() - t0, 1.0,
           f"{passed}/100 within 1e-12, worst scaled error {worst:.1e}")


def test_criterion_6_change_of_variables():
    t0 = time.perf_counter()
    f = PolyField(2, {(0, 0): 1.0, (1, 1): 0.5})
    cases = [
        ("identity", fl.make_mapping("identity"), f, UNIT),
        ("linear", fl.make_mapping("linear", matrix=[[2.0, 0.5], [0.0, 3.0]]), f, UNIT),
        ("shear", fl.make_mapping("shear"), f, UNIT),
        ("cubic_degenerate", fl.make_mapping("cubic_degenerate"), PolyField.constant(2, 1.0),
         Region.of([Cube((-1.0, 0.0), 1.0), Cube((0.0, 0.0), 1.0)])),
    ]
    reports = {}
    for i, (name, T, w, q) in enumerate(cases):
        reports[name] = vf.change_of_variables_check(T, w, q, samples=10**6, seed=60 + i, tol=1e-9)
    bidir = all(reports[n].details["reverse"] == "checked" for n in ("identity", "linear", "shear"))
    cubic_rhs = reports["cubic_degenerate"].details["forward"]["rhs"]
    ok = all(r.passed for r in reports.values()) and bidir and abs(cubic_rhs - 2.0) <= 1e-10
    detail = ", ".join(f"{n} {r.abs_error:.1e}/{r.budget:.1e}" for n, r in reports.items())
    record(6, "change of variables", ok, time.perf_counter() - t0, 30.0,
           f"{detail}; cubic rhs {cubic_rhs:.15f}")


def test_criterion_7_green_dbar():
    t0 = time.perf_counter()
    worst = 0.0
    region = Region.of([UNIT, Cube((1.0, 0.0), 1.0), Cube((0.0, 1.0), 1.0)])
    all_pass = True
    for s in range(20):
        rng = np.random.default_rng([7, s])
        P, Q = rand_poly(rng, 2, 4), rand_poly(rng, 2, 4)
        g = vf.green_check(P, Q, region, tol=1e-10)
        # outward flux of the literal (-Q, P) is minus the counterclockwise circulation
        d = vf.divergence_theorem_check(fl.VectorField((-Q, P)), region, tol=1e-10)
        worst = max(worst, abs(g.lhs + d.lhs), abs(g.rhs + d.rhs))
        all_pass &= g.passed and d.passed
    dbar = [
        vf.dbar_check(fl.complex_poly({(0, 1): 1.0}), UNIT, expected=2j * UNIT.measure),
        vf.dbar_check(fl.complex_poly({(2, 0): 1.0}), UNIT, expected=0.0),
        vf.dbar_check(fl.complex_poly({(0, 2): 1.0}), UNIT),
    ]
    ok = all_pass and worst <= 1e-10 and all(r.passed for r in dbar)
    record(7, "green / dbar consistency", ok, time.perf_counter() - t0, 5.0,
           f"20 pairs, |green + flux(-Q, P)| <= {worst:.1e}; dbar zbar/z^2/zbar^2 errors "
           + "/".join(f"{r.abs_error:.0e}" for r in dbar))


def test_criterion_8_counterexample():
    t0 = time.perf_counter()
    seg = SegmentLength(Line2D.diagonal())
    on = estimate_density(seg, (0.5, 0.5))
    off = estimate_density(seg, (0.3, 0.7))
    bounds = vf.verify_bounds(seg, UNIT, levels=8)
    const = on.upper_constant
    ok = (
        on.upper_divergent
        and const is not None
        and abs(const - math.sqrt(2)) <= 0.02 * math.sqrt(2)
        and off.upper == 0.0
        and off.lower == 0.0
        and bounds.details["upper_status"] == "bound not checkable at node"
    )
    record(8, "counterexample fidelity", ok, time.perf_counter() - t0, 5.0,
           f"on-line upper {on.upper}, constant {const:.6f}; off-line {off.upper:g}/{off.lower:g}; "
           f"bounds: {bounds.details['upper_status']}")


def test_criterion_9_reproducibility(tmp_path):
    t0 = time.perf_counter()
    from cubeftc.cli import main

    same = 0
    names = bundled_scenarios()
    for name in names:
        a, b = tmp_path / f"{name}.a.json", tmp_path / f"{name}.b.json"
        with contextlib.redirect_stdout(io.StringIO()):
            main(["run", name, "--out", str(a)])
            main(["run", name, "--out", str(b)])
        same += a.read_bytes() == b.read_bytes()
    also = dumps_report(run_scenario(bundled_path("ftc_image_measure_shear"))) == (tmp_path / "ftc_image_measure_shear.a.json").read_text()
    record(9, "reproducibility", same == len(names) and also, time.perf_counter() - t0, None,
           f"{same}/{len(names)} bundled scenarios byte-identical across two runs")


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
