import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cubeftc import fields as fl
from cubeftc import interval_functions as ifn
from cubeftc.fields import PolyField
from cubeftc.geometry import Cube, Region, grid_partition
from cubeftc.interval_functions import (
    Circulation,
    ComplexContour,
    Dirac,
    Flux,
    ImageMeasure,
    Integral,
    Line2D,
    LinearCombination,
    PushforwardIntegral,
    SegmentLength,
    check_additivity,
)

from oracles import boundary_flux_closed_form, contour_polygon, diagonal_length, poly_integral

exps = st.tuples(st.integers(0, 5), st.integers(0, 5))
tables = st.dictionaries(exps, st.floats(-2, 2, allow_nan=False), min_size=1, max_size=4)
cubes2 = st.builds(lambda x, y, s: Cube((x, y), s), st.floats(-1, 1), st.floats(-1, 1), st.floats(0.05, 2))


@given(tables, cubes2)
def test_integral_matches_closed_form(table, q):
    phi = Integral(PolyField(2, table))
    assert phi(q) == pytest.approx(poly_integral(table, q.lower, q.side), rel=1e-11, abs=1e-11)


@given(tables, tables, cubes2)
def test_flux_matches_closed_form(ta, tb, q):
    F = fl.VectorField((PolyField(2, ta), PolyField(2, tb)))
    want = boundary_flux_closed_form([ta, tb], q.lower, q.side)
    assert Flux(F)(q) == pytest.approx(want, rel=1e-11, abs=1e-11)


def test_flux_3d_closed_form():
    comps = [{(2, 0, 0): 1.0}, {(0, 1, 1): 2.0}, {(1, 1, 1): -1.0}]
    F = fl.VectorField(tuple(PolyField(3, t) for t in comps))
    q = Cube((0.1, -0.2, 0.3), 0.7)
    assert Flux(F)(q) == pytest.approx(boundary_flux_closed_form(comps, q.lower, q.side), rel=1e-12)


@pytest.mark.parametrize("table", [{(0, 1): 1.0}, {(2, 0): 1.0}, {(0, 2): 1.0}, {(1, 1): 1 - 1j, (3, 0): 2.0}])
def test_complex_contour_matches_polygon_rule(table):
    f = fl.complex_poly(table)
    q = Cube((0.2, -0.4), 0.9)
    (x0, y0), s = q.lower, q.side
    corners = [(x0, y0), (x0 + s, y0), (x0 + s, y0 + s), (x0, y0 + s)]
    fz = lambda z: np.asarray(f(np.stack([z.real, z.imag], axis=-1)))
    assert ComplexContour(f)(q) == pytest.approx(contour_polygon(fz, corners), abs=1e-6)


def test_complex_contour_of_zbar_is_twice_i_area():
    phi = ComplexContour(fl.complex_poly({(0, 1): 1.0}))
    assert phi(Cube((0, 0), 1)) == pytest.approx(2j, abs=1e-14)
    assert phi(Cube((3, -2), 0.5)) == pytest.approx(0.5j, abs=1e-14)


def test_circulation_is_green():
    P = PolyField(2, {(0, 1): -1.0})
    Q = PolyField(2, {(1, 0): 1.0})
    assert Circulation(P, Q)(Cube((0.5, 0.5), 2.0)) == pytest.approx(8.0)


@given(cubes2)
def test_segment_length_diagonal(q):
    assert SegmentLength(Line2D.diagonal())(q) == pytest.approx(diagonal_length(q.lower, q.side), abs=1e-14)


def test_line_validation():
    with pytest.raises(ValueError):
        Line2D((0, 0), (0, 0))
    with pytest.raises(ValueError):
        Line2D((0, 0), (1, 0), (1.0, 0.0))
    line = Line2D((0, 0), (3, 4))
    assert line.direction == pytest.approx((0.6, 0.8))
    assert line.distance((4, -3)) == pytest.approx(5.0)


def test_dirac_fails_additivity_on_shared_face():
    r = check_additivity(Dirac((0.5, 0.3)), Cube((0, 0), 1), k=2)
    assert not r.passed
    assert (r.lhs, r.rhs) == (1.0, 2.0)


def test_dirac_passes_when_atom_is_interior_to_a_cell():
    assert check_additivity(Dirac((0.3, 0.2)), Cube((0, 0), 1), k=2).passed


def _deterministic_kinds():
    f = PolyField(2, {(2, 0): 1.0, (0, 1): 1.0})
    g = PolyField(2, {(1, 2): -1.0, (0, 0): 2.0})
    F = fl.VectorField((f, g))
    return {
        "integral": Integral(f),
        "flux": Flux(F),
        "circulation": Circulation(f, g),
        "complex_contour": ComplexContour(fl.complex_poly({(1, 2): 1.0})),
        "segment_length": SegmentLength(Line2D((0.1, 0.0), (1.0, 0.77))),
        "combination": LinearCombination(2.0, Integral(f), -1.0, Flux(F)),
    }


@pytest.mark.parametrize("name", list(_deterministic_kinds()))
@given(q=cubes2, k=st.integers(2, 4))
def test_additivity_property(name, q, k):
    phi = _deterministic_kinds()[name]
    r = check_additivity(phi, q, k, tol=1e-8, rtol=1e-8)
    assert r.passed, r


def test_stochastic_additivity_and_seed_requirement():
    T = fl.make_mapping("shear")
    phi = ImageMeasure(T, samples=100_000)
    q = Cube((0, 0), 1)
    with pytest.raises(ifn.MissingSeedError):
        phi(q)
    r = check_additivity(phi, q, 2, tol=0.0, seed=5)
    assert r.passed and r.sigma > 0


def test_image_measure_of_linear_map():
    M = [[2.0, 1.0], [0.0, 3.0]]
    phi = ImageMeasure(fl.make_mapping("linear", matrix=M), samples=400_000)
    q = Cube((0.0, 0.0), 0.5)
    est = phi.evaluate(q, seed=3)
    assert abs(est.value - 6.0 * 0.25) <= 4 * est.sigma
    # for an indicator weight sigma is the binomial standard error
    res = phi.sample(q, seed=3)
    box = np.prod(np.array(res.box_upper) - np.array(res.box_lower))
    p = res.hits / res.samples
    assert res.sigma == pytest.approx(box * math.sqrt(p * (1 - p) / res.samples), rel=1e-9)


def test_rasterize_brackets_truth():
    T = fl.make_mapping("linear", matrix=[[2.0, 0.5], [0.0, 1.5]])
    mid, half = ifn.rasterize(T, Cube((0, 0), 1), 128)
    assert abs(mid - 3.0) <= half
    mid2, half2 = ifn.rasterize(T, Cube((0, 0), 1), 256)
    assert half2 < half


def test_rasterize_additivity_within_bracket():
    phi = ImageMeasure(fl.make_mapping("shear"), strategy="rasterize", resolution=64)
    assert not phi.needs_seed
    assert check_additivity(phi, Cube((0, 0), 1), 2, tol=0.0).passed


def test_image_measure_is_reproducible():
    phi = ImageMeasure(fl.make_mapping("shear"), samples=50_000)
    q = Cube((0, 0), 1)
    assert phi(q, 11) == phi(q, 11)
    assert phi(q, 11) != phi(q, 12)


def test_pushforward_of_constant_one_equals_image_measure():
    T = fl.make_mapping("shear")
    one = PolyField.constant(2, 1.0)
    q = Cube((0, 0), 1)
    a = ImageMeasure(T, samples=100_000)(q, 4)
    b = PushforwardIntegral(T, f=one, samples=100_000)(q, 4)
    assert a == pytest.approx(b, rel=1e-12)


def test_inverse_membership_needs_inverse():
    T = fl.Mapping("fwd", 2, lambda x: x)
    with pytest.raises(ValueError):
        ImageMeasure(T)
    ImageMeasure(T, strategy="rasterize")


def test_linear_combination_sigma_and_seed():
    T = fl.make_mapping("shear")
    im = ImageMeasure(T, samples=50_000)
    integral = Integral(PolyField.constant(2, 1.0))
    combo = LinearCombination(2.0, im, -3.0, integral)
    q = Cube((0, 0), 1)
    e = combo.evaluate(q, 7)
    e1 = im.evaluate(q, 7)
    assert e.value == pytest.approx(2 * e1.value - 3.0)
    assert e.sigma == pytest.approx(2 * e1.sigma)


def test_domain_and_dimension_errors():
    phi = Integral(PolyField.constant(2, 1.0), domain=Cube((0, 0), 1))
    with pytest.raises(ifn.DomainError):
        phi(Cube((0.5, 0.5), 1))
    with pytest.raises(ifn.DomainError):
        phi(Cube((0, 0, 0), 0.5))
    with pytest.raises(ifn.DomainError):
        LinearCombination(1, phi, 1, Integral(PolyField.constant(3, 1.0)))


def test_region_boundary_integrals_cancel_internal_faces():
    f = PolyField(2, {(3, 1): 1.0, (0, 2): -2.0})
    g = PolyField(2, {(1, 1): 1.0})
    F = fl.VectorField((f, g))
    cells = grid_partition(Cube((0, 0), 1), 4)
    region = Region.of(cells)
    whole = Flux(F)(Cube((0, 0), 1))
    assert ifn.boundary_flux(F, region) == pytest.approx(whole, abs=1e-14)
    circ = Circulation(f, g)
    assert ifn.line_boundary_integral(circ, region) == pytest.approx(circ(Cube((0, 0), 1)), abs=1e-14)


def test_derive_seed_is_stable_and_distinct():
    assert ifn.derive_seed(1, 2) == ifn.derive_seed(1, 2)
    assert len({ifn.derive_seed(1, k) for k in range(100)}) == 100
