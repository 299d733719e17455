import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cubeftc import fields as fl
from cubeftc.fields import FieldError, PolyField

exps = st.tuples(st.integers(0, 4), st.integers(0, 4))
coeffs = st.floats(-3, 3, allow_nan=False)
polys2 = st.dictionaries(exps, coeffs, max_size=5).map(lambda t: PolyField(2, t))
pts2 = st.tuples(st.floats(-2, 2), st.floats(-2, 2))


def test_from_table_and_eval():
    f = PolyField.from_table(2, {"2,0": 1.0, "0,1": 1.0})
    assert fl.poly_eval(f, [0.3, 0.7]) == pytest.approx(0.79)
    assert f.degree == 2
    assert not f.is_complex


def test_from_table_complex_pairs():
    f = PolyField.from_table(2, {"1,0": [0.0, 1.0]})
    assert f.is_complex
    assert fl.poly_eval(f, [2.0, 5.0]) == pytest.approx(2j)


@pytest.mark.parametrize("key", ["2,0,1", "a,b", "-1,0", ""])
def test_malformed_multi_index(key):
    with pytest.raises(FieldError):
        PolyField.from_table(2, {key: 1.0})


def test_zero_terms_are_dropped():
    f = PolyField(2, {(1, 0): 1.0}) - PolyField(2, {(1, 0): 1.0})
    assert f.terms == ()
    assert np.all(f(np.zeros((3, 2))) == 0)


@given(polys2, polys2, pts2)
def test_arithmetic_matches_pointwise(f, g, x):
    x = np.array(x)
    assert (f + g)(x) == pytest.approx(f(x) + g(x), abs=1e-9)
    assert (f - g)(x) == pytest.approx(f(x) - g(x), abs=1e-9)
    assert (f * g)(x) == pytest.approx(f(x) * g(x), rel=1e-9, abs=1e-9)
    assert (f * 2.5)(x) == pytest.approx(2.5 * f(x), abs=1e-9)


@given(polys2, pts2, st.integers(0, 1))
def test_partial_matches_finite_difference(f, x, axis):
    x = np.array(x, dtype=float)
    h = 1e-6
    e = np.zeros(2)
    e[axis] = h
    fd = (f(x + e) - f(x - e)) / (2 * h)
    assert f.partial(axis)(x) == pytest.approx(fd, rel=1e-5, abs=1e-5)


def test_complex_poly_expansion():
    zbar2 = fl.complex_poly({(0, 2): 1.0})
    z = 0.3 + 0.8j
    assert fl.poly_eval(zbar2, [z.real, z.imag]) == pytest.approx(np.conj(z) ** 2)
    mixed = fl.complex_poly({(2, 1): 1 - 2j})
    assert fl.poly_eval(mixed, [z.real, z.imag]) == pytest.approx((1 - 2j) * z**2 * np.conj(z))


@pytest.mark.parametrize(
    "table, z, want",
    [
        ({(0, 1): 1.0}, 0.4 + 0.1j, 2j),  # 2i * d(zbar)/dzbar
        ({(2, 0): 1.0}, 0.4 + 0.1j, 0.0),  # holomorphic
        ({(0, 2): 1.0}, 0.4 + 0.1j, 4j * (0.4 - 0.1j)),
        ({(1, 1): 1.0}, 0.4 + 0.1j, 2j * (0.4 + 0.1j)),
    ],
)
def test_dbar_closed_forms(table, z, want):
    assert fl.dbar_at(fl.complex_poly(table), z) == pytest.approx(want)


def test_registry_fields_partials_agree_with_fd():
    x = np.array([[0.3, -0.4], [1.1, 0.2]])
    for name in ("sin_x_cos_y", "exp_sum", "gaussian"):
        f = fl.make_field(name)
        for axis in range(2):
            analytic = fl.partial_field(f, axis)(x)
            numeric = fl._fd_partial(f, axis, x)
            assert analytic == pytest.approx(numeric, rel=1e-6, abs=1e-8)


def test_exp_z_is_holomorphic_and_exp_zbar_is_not():
    z = 0.2 + 0.5j
    assert abs(fl.dbar_at(fl.make_field("exp_z"), z)) < 1e-7
    assert fl.dbar_at(fl.make_field("exp_zbar"), z) == pytest.approx(2j * np.exp(np.conj(z)), rel=1e-6)


def test_unknown_registry_names():
    with pytest.raises(FieldError, match="unknown field"):
        fl.make_field("nope")
    with pytest.raises(FieldError, match="unknown mapping"):
        fl.make_mapping("does_not_exist")


def test_vector_field_and_divergence():
    F = fl.VectorField((PolyField(2, {(2, 0): 1.0}), PolyField(2, {(1, 1): 3.0})))
    div = fl.divergence_field(F)
    assert isinstance(div, PolyField)
    assert fl.divergence_at(F, [0.5, 2.0]) == pytest.approx(2 * 0.5 + 3 * 0.5)
    with pytest.raises(FieldError):
        fl.VectorField((PolyField(2, {(0, 0): 1.0}),))


def test_affine_field():
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    P = np.array([0.5, -1.0])
    F = fl.affine_field(M, P)
    X = np.array([2.0, 1.0])
    assert F(X) == pytest.approx(M @ (X - P))
    assert fl.divergence_at(F, X) == pytest.approx(np.trace(M))


@pytest.mark.parametrize("name, params", [("identity", {}), ("linear", {"matrix": [[2, 1], [0, 3]]}), ("shear", {}), ("linear3d", {})])
def test_mapping_inverse_roundtrip(name, params):
    T = fl.make_mapping(name, **params)
    x = np.random.default_rng(0).uniform(-1, 1, size=(20, T.dim))
    assert T.inverse(T(x)) == pytest.approx(x, abs=1e-12)


@pytest.mark.parametrize("name, params", [("linear", {"matrix": [[2, 1], [0, 3]]}), ("shear", {}), ("cubic_degenerate", {}), ("linear3d", {})])
def test_fd_jacobian_matches_analytic(name, params):
    T = fl.make_mapping(name, **params)
    Tn = fl.make_mapping(name, numeric_jacobian=True, **params)
    x = np.random.default_rng(1).uniform(-1, 1, size=T.dim)
    a = fl.jacobian(T, x)
    n = fl.jacobian(Tn, x)
    assert a.method == "analytic" and n.method == "central-difference"
    assert n.matrix == pytest.approx(a.matrix, abs=1e-8)
    assert n.step == pytest.approx(fl.FD_STEP_FACTOR * max(1.0, float(np.max(np.abs(x)))))


def test_cubic_degenerate_det_vanishes_on_axis():
    T = fl.make_mapping("cubic_degenerate")
    assert not T.regular
    dets = fl.jacobian_determinants(T, np.array([[0.0, 0.3], [0.5, 0.1], [-1.0, 0.0]]))
    assert dets == pytest.approx([0.0, 0.75, 3.0])


def test_linear_rejects_singular():
    with pytest.raises(FieldError):
        fl.make_mapping("linear", matrix=[[1, 2], [2, 4]])
    with pytest.raises(FieldError):
        fl.make_mapping("linear")


def test_inverted_swaps_roles():
    T = fl.make_mapping("shear")
    U = T.inverted()
    x = np.array([0.4, 0.2])
    assert U(T(x)) == pytest.approx(x)
    assert fl.jacobian(U, T(x)).determinant == pytest.approx(1.0)
    # the degenerate cube map inverts as a homeomorphism, with no analytic Jacobian
    C = fl.make_mapping("cubic_degenerate").inverted()
    assert math.isclose(float(C(np.array([8.0, 1.0]))[0]), 2.0)
    assert C.analytic_jacobian is None


def test_mapping_without_inverse_cannot_invert():
    T = fl.Mapping("fwd_only", 2, lambda x: x)
    with pytest.raises(FieldError):
        T.inverted()
