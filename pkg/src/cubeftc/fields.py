"""Scalar fields, vector fields, mappings and the derivatives their densities need.

Polynomials (:class:`PolyField`) are differentiated exactly.  Anything else
enters through the named registries below, which either carry analytic
partials or fall back to central differences with step
``eps**(1/3) * max(1, |x_j|)``.

All evaluators are vectorised: they take an array of points of shape
``(..., n)`` and return values of shape ``(...)`` (scalars) or ``(..., n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping as MappingType, Sequence

import numpy as np

__all__ = [
    "PolyField",
    "RegistryField",
    "DerivedField",
    "VectorField",
    "Mapping",
    "JacobianResult",
    "FieldError",
    "FD_STEP_FACTOR",
    "poly_eval",
    "complex_poly",
    "affine_field",
    "partial_field",
    "partial_derivative",
    "central_difference_jacobian",
    "jacobian",
    "jacobian_determinants",
    "divergence_at",
    "divergence_field",
    "dbar_at",
    "dbar_field",
    "make_field",
    "make_mapping",
    "FIELD_REGISTRY",
    "MAPPING_REGISTRY",
]

FD_STEP_FACTOR = np.finfo(float).eps ** (1.0 / 3.0)


class FieldError(ValueError):
    """Dimension mismatches, unknown registry names, bad parameters."""


def _points(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != dim:
        raise FieldError(f"expected points with last axis {dim}, got shape {x.shape}")
    return x


def _clean_coeff(c) -> complex | float:
    c = complex(c)
    return c.real if c.imag == 0 else c


@dataclass(frozen=True, init=False)
class PolyField:
    """``sum_alpha c_alpha x**alpha`` with real or complex coefficients."""

    dim: int
    terms: tuple[tuple[tuple[int, ...], complex | float], ...] = ()

    def __init__(self, dim: int, terms: MappingType[Sequence[int], Any] | Sequence = ()):
        if int(dim) != dim or dim < 1:
            raise FieldError(f"polynomial dimension must be >= 1, got {dim}")
        items = terms.items() if isinstance(terms, MappingType) else terms
        acc: dict[tuple[int, ...], complex] = {}
        for alpha, c in items:
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != dim or any(a < 0 for a in alpha):
                raise FieldError(f"bad multi-index {alpha} for dim {dim}")
            acc[alpha] = acc.get(alpha, 0) + complex(c)
        cleaned = tuple(sorted((a, _clean_coeff(c)) for a, c in acc.items() if c != 0))
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "terms", cleaned)
        # evaluation caches, not dataclass fields
        cplx = any(isinstance(c, complex) for _, c in cleaned)
        object.__setattr__(self, "_complex", cplx)
        object.__setattr__(self, "_exps", np.array([a for a, _ in cleaned], dtype=np.intp).reshape(-1, self.dim))
        object.__setattr__(self, "_coefs", np.array([c for _, c in cleaned], dtype=complex if cplx else float))

    @classmethod
    def constant(cls, dim: int, c) -> "PolyField":
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def coordinate(cls, dim: int, axis: int) -> "PolyField":
        alpha = [0] * dim
        alpha[axis] = 1
        return cls(dim, {tuple(alpha): 1.0})

    @classmethod
    def from_table(cls, dim: int, table: MappingType[str, Any]) -> "PolyField":
        """Build from ``{"2,0": 1.0, ...}``; complex values may be ``[re, im]`` pairs."""
        terms = {}
        for key, value in table.items():
            terms[_parse_multi_index(key, dim)] = _parse_number(value)
        return cls(dim, terms)

    @property
    def coefficients(self) -> dict[tuple[int, ...], complex | float]:
        return dict(self.terms)

    @property
    def is_complex(self) -> bool:
        return self._complex

    @property
    def degree(self) -> int:
        """Largest per-axis exponent (what a tensor Gauss rule has to integrate)."""
        return max((max(a) for a, _ in self.terms), default=0)

    def __call__(self, x) -> np.ndarray:
        x = _points(x, self.dim)
        if not self.terms:
            return np.zeros(x.shape[:-1], dtype=self._coefs.dtype)
        # per-axis power tables, then one product per term
        top = int(self._exps.max())
        prod = None
        for j in range(self.dim):
            pw = x[..., j, None] ** np.arange(top + 1)
            col = pw[..., self._exps[:, j]]
            prod = col if prod is None else prod * col
        return prod @ self._coefs

    def partial(self, axis: int) -> "PolyField":
        terms = {}
        for alpha, c in self.terms:
            if alpha[axis]:
                beta = list(alpha)
                beta[axis] -= 1
                terms[tuple(beta)] = c * alpha[axis]
        return PolyField(self.dim, terms)

    def _coerce(self, other) -> "PolyField":
        if isinstance(other, PolyField):
            if other.dim != self.dim:
                raise FieldError(f"dimension mismatch {self.dim} vs {other.dim}")
            return other
        return PolyField.constant(self.dim, other)

    def __add__(self, other):
        other = self._coerce(other)
        return PolyField(self.dim, list(self.terms) + list(other.terms))

    __radd__ = __add__

    def __neg__(self):
        return PolyField(self.dim, [(a, -c) for a, c in self.terms])

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, PolyField):
            return PolyField(self.dim, [(a, c * other) for a, c in self.terms])
        other = self._coerce(other)
        terms: list = []
        for a, c in self.terms:
            for b, d in other.terms:
                terms.append((tuple(i + j for i, j in zip(a, b)), c * d))
        return PolyField(self.dim, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = PolyField.constant(self.dim, 1.0)
        for _ in range(int(k)):
            out = out * self
        return out


def poly_eval(f: PolyField, x) -> complex | float:
    x = np.asarray(x, dtype=float)
    if x.shape != (f.dim,):
        raise FieldError(f"point of shape {x.shape} does not match dim {f.dim}")
    v = f(x)
    return complex(v) if np.iscomplexobj(v) else float(v)


def complex_poly(table: MappingType[Sequence[int], Any]) -> PolyField:
    """``sum c_pq z**p conj(z)**q`` expanded into a polynomial in ``(x, y)``."""
    z = PolyField(2, {(1, 0): 1.0, (0, 1): 1j})
    zbar = PolyField(2, {(1, 0): 1.0, (0, 1): -1j})
    out = PolyField(2)
    for (p, q), c in table.items():
        out = out + (z ** int(p)) * (zbar ** int(q)) * complex(c)
    return out


def _parse_multi_index(key: str, dim: int | None) -> tuple[int, ...]:
    try:
        alpha = tuple(int(s) for s in str(key).split(","))
    except ValueError:
        raise FieldError(f"malformed multi-index {key!r}") from None
    if any(a < 0 for a in alpha) or (dim is not None and len(alpha) != dim):
        raise FieldError(f"malformed multi-index {key!r} for dim {dim}")
    return alpha


def _parse_number(value):
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise FieldError(f"complex coefficient must be [re, im], got {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, bool) or not isinstance(value, (int, float, complex)):
        raise FieldError(f"coefficient must be a number, got {value!r}")
    return value


@dataclass(frozen=True)
class RegistryField:
    """Named non-polynomial scalar field with optional analytic partials."""

    name: str
    dim: int
    fn: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    partials: tuple[Callable[[np.ndarray], np.ndarray], ...] | None = field(default=None, compare=False)
    is_complex: bool = False

    def __call__(self, x) -> np.ndarray:
        return self.fn(_points(x, self.dim))

    def partial(self, axis: int):
        if self.partials is None:
            return None
        return DerivedField(self.dim, self.partials[axis], f"d{axis}({self.name})", self.is_complex)


@dataclass(frozen=True)
class DerivedField:
    """Vectorised callable produced by differentiating or combining fields."""

    dim: int
    fn: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    name: str = "derived"
    is_complex: bool = False

    def __call__(self, x) -> np.ndarray:
        return self.fn(_points(x, self.dim))


def _fd_partial(f, axis: int, x: np.ndarray) -> np.ndarray:
    h = FD_STEP_FACTOR * np.maximum(1.0, np.abs(x[..., axis]))
    xp = x.copy()
    xm = x.copy()
    xp[..., axis] += h
    xm[..., axis] -= h
    return (f(xp) - f(xm)) / (xp[..., axis] - xm[..., axis])


def partial_field(f, axis: int):
    """Field of ``d f / d x_axis``: exact for polynomials, else analytic or central differences."""
    if isinstance(f, PolyField):
        return f.partial(axis)
    p = f.partial(axis) if hasattr(f, "partial") else None
    if p is not None:
        return p
    name = getattr(f, "name", "field")
    return DerivedField(f.dim, lambda x: _fd_partial(f, axis, x), f"fd{axis}({name})", getattr(f, "is_complex", False))


def partial_derivative(f, axis: int, x) -> np.ndarray:
    return partial_field(f, axis)(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class VectorField:
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise FieldError("vector field needs components")
        dims = {c.dim for c in comps}
        if len(dims) != 1:
            raise FieldError(f"vector field components have dims {sorted(dims)}")
        if dims.pop() != len(comps):
            raise FieldError("vector field must have one component per coordinate")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return len(self.components)

    def __call__(self, x) -> np.ndarray:
        x = _points(x, self.dim)
        return np.stack([c(x) for c in self.components], axis=-1)


def affine_field(M, P) -> VectorField:
    """``F(X) = M (X - P)`` with polynomial components."""
    M = np.asarray(M, dtype=float)
    P = np.asarray(P, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n) or P.shape != (n,):
        raise FieldError("affine field needs a square matrix and a matching point")
    shift = M @ P
    comps = []
    for i in range(n):
        terms = {(0,) * n: -shift[i]}
        for j in range(n):
            alpha = [0] * n
            alpha[j] = 1
            terms[tuple(alpha)] = M[i, j]
        comps.append(PolyField(n, terms))
    return VectorField(tuple(comps))


def divergence_field(F: VectorField):
    parts = [partial_field(c, i) for i, c in enumerate(F.components)]
    if all(isinstance(p, PolyField) for p in parts):
        return sum(parts[1:], parts[0])
    return DerivedField(F.dim, lambda x: sum(p(x) for p in parts), "div")


def divergence_at(F: VectorField, x) -> float:
    x = _points(x, F.dim)
    return float(divergence_field(F)(x))


def dbar_field(f):
    """``2i * df/dzbar = i f_x - f_y``: the area density of ``f dz`` around squares."""
    fx = partial_field(f, 0)
    fy = partial_field(f, 1)
    if isinstance(fx, PolyField) and isinstance(fy, PolyField):
        return fx * 1j - fy
    return DerivedField(2, lambda x: 1j * fx(x) - fy(x), "dbar", True)


def dbar_at(f, z) -> complex:
    if np.iscomplexobj(z) and np.ndim(z) == 0:
        z = [complex(z).real, complex(z).imag]
    if f.dim != 2:
        raise FieldError("dbar needs a field on the plane")
    return complex(dbar_field(f)(_points(z, 2)))


# --------------------------------------------------------------------------
# mappings


@dataclass(frozen=True)
class JacobianResult:
    matrix: np.ndarray
    determinant: float
    method: str
    step: float | None = None


@dataclass(frozen=True)
class Mapping:
    """A homeomorphism ``T`` with optional inverse and analytic Jacobian.

    ``regular`` declares that ``det dT`` never vanishes, i.e. the inverse is
    differentiable too.
    """

    name: str
    dim: int
    forward: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    inverse: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    analytic_jacobian: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    inverse_jacobian: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    regular: bool = True
    params: tuple = ()

    def __call__(self, x) -> np.ndarray:
        return self.forward(_points(x, self.dim))

    def inverted(self) -> "Mapping":
        if self.inverse is None:
            raise FieldError(f"mapping {self.name!r} has no inverse")
        return Mapping(
            f"inverse({self.name})",
            self.dim,
            self.inverse,
            self.forward,
            self.inverse_jacobian,
            self.analytic_jacobian,
            self.regular,
            self.params,
        )


def central_difference_jacobian(fn: Callable[[np.ndarray], np.ndarray], x) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians of ``fn`` at points ``x`` (shape ``(..., n)``) and the steps used per axis."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    cols = []
    steps = []
    for j in range(n):
        h = FD_STEP_FACTOR * np.maximum(1.0, np.abs(x[..., j]))
        xp = x.copy()
        xm = x.copy()
        xp[..., j] += h
        xm[..., j] -= h
        cols.append((fn(xp) - fn(xm)) / (xp[..., j] - xm[..., j])[..., None])
        steps.append(h)
    return np.stack(cols, axis=-1), np.stack(steps, axis=-1)


def jacobian(T: Mapping, x) -> JacobianResult:
    x = _points(x, T.dim)
    if x.ndim != 1:
        raise FieldError("jacobian() takes a single point; use jacobian_determinants for batches")
    if T.analytic_jacobian is not None:
        m = np.asarray(T.analytic_jacobian(x), dtype=float)
        return JacobianResult(m, float(np.linalg.det(m)), "analytic")
    m, h = central_difference_jacobian(T.forward, x)
    if not np.all(np.isfinite(m)):
        raise FieldError(f"mapping {T.name!r} failed to evaluate near {x.tolist()}")
    return JacobianResult(m, float(np.linalg.det(m)), "central-difference", float(np.max(h)))


def jacobian_determinants(T: Mapping, x) -> np.ndarray:
    """Signed ``det dT`` at a batch of points."""
    x = _points(x, T.dim)
    if T.analytic_jacobian is not None:
        m = np.asarray(T.analytic_jacobian(x), dtype=float)
    else:
        m, _ = central_difference_jacobian(T.forward, x)
    return np.linalg.det(m)


# --------------------------------------------------------------------------
# registries


def _req_dim(dim, allowed=None) -> int:
    dim = int(dim)
    if dim < 1 or (allowed is not None and dim not in allowed):
        raise FieldError(f"unsupported dimension {dim}")
    return dim


def _sin_x_cos_y(dim: int = 2) -> RegistryField:
    _req_dim(dim, {2})
    return RegistryField(
        "sin_x_cos_y",
        2,
        lambda x: np.sin(x[..., 0]) * np.cos(x[..., 1]),
        (
            lambda x: np.cos(x[..., 0]) * np.cos(x[..., 1]),
            lambda x: -np.sin(x[..., 0]) * np.sin(x[..., 1]),
        ),
    )


def _exp_sum(dim: int = 2) -> RegistryField:
    dim = _req_dim(dim)

    def f(x):
        return np.exp(np.sum(x, axis=-1))

    return RegistryField("exp_sum", dim, f, tuple(f for _ in range(dim)))


def _gaussian(dim: int = 2) -> RegistryField:
    dim = _req_dim(dim)

    def f(x):
        return np.exp(-np.sum(x * x, axis=-1))

    def d(j):
        return lambda x: -2.0 * x[..., j] * f(x)

    return RegistryField("gaussian", dim, f, tuple(d(j) for j in range(dim)))


def _exp_z(dim: int = 2) -> RegistryField:
    _req_dim(dim, {2})

    def f(x):
        return np.exp(x[..., 0] + 1j * x[..., 1])

    return RegistryField("exp_z", 2, f, (f, lambda x: 1j * f(x)), is_complex=True)


def _exp_zbar(dim: int = 2) -> RegistryField:
    _req_dim(dim, {2})

    def f(x):
        return np.exp(x[..., 0] - 1j * x[..., 1])

    return RegistryField("exp_zbar", 2, f, (f, lambda x: -1j * f(x)), is_complex=True)


FIELD_REGISTRY: dict[str, Callable[..., RegistryField]] = {
    "sin_x_cos_y": _sin_x_cos_y,
    "exp_sum": _exp_sum,
    "gaussian": _gaussian,
    "exp_z": _exp_z,
    "exp_zbar": _exp_zbar,
}


def make_field(name: str, **params) -> RegistryField:
    try:
        factory = FIELD_REGISTRY[name]
    except KeyError:
        raise FieldError(f"unknown field {name!r}; known: {sorted(FIELD_REGISTRY)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise FieldError(f"bad parameters for field {name!r}: {exc}") from None


def _identity(dim: int = 2) -> Mapping:
    dim = _req_dim(dim)
    eye = np.eye(dim)
    return Mapping(
        "identity",
        dim,
        lambda x: np.array(x, dtype=float, copy=True),
        lambda y: np.array(y, dtype=float, copy=True),
        lambda x: np.broadcast_to(eye, np.shape(x)[:-1] + (dim, dim)),
        lambda y: np.broadcast_to(eye, np.shape(y)[:-1] + (dim, dim)),
        True,
        (("dim", dim),),
    )


def _linear(matrix=None, name: str = "linear") -> Mapping:
    if matrix is None:
        raise FieldError("linear mapping needs a matrix")
    M = np.array(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.all(np.isfinite(M)):
        raise FieldError("linear mapping needs a finite square matrix")
    det = float(np.linalg.det(M))
    if det == 0.0:
        raise FieldError("linear mapping matrix is singular")
    Minv = np.linalg.inv(M)
    n = M.shape[0]
    M.setflags(write=False)
    Minv.setflags(write=False)
    return Mapping(
        name,
        n,
        lambda x: x @ M.T,
        lambda y: y @ Minv.T,
        lambda x: np.broadcast_to(M, np.shape(x)[:-1] + (n, n)),
        lambda y: np.broadcast_to(Minv, np.shape(y)[:-1] + (n, n)),
        True,
        (("matrix", tuple(map(tuple, M.tolist()))),),
    )


DEFAULT_LINEAR3D = ((2.0, 1.0, 0.0), (0.0, 1.0, 0.5), (0.5, 0.0, 1.5))


def _linear3d(matrix=DEFAULT_LINEAR3D) -> Mapping:
    T = _linear(matrix, name="linear3d")
    if T.dim != 3:
        raise FieldError("linear3d needs a 3x3 matrix")
    return T


def _shear() -> Mapping:
    def fwd(x):
        return np.stack([x[..., 0], x[..., 1] + x[..., 0] ** 2], axis=-1)

    def inv(y):
        return np.stack([y[..., 0], y[..., 1] - y[..., 0] ** 2], axis=-1)

    def jac(x):
        out = np.zeros(np.shape(x)[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 0] = 2.0 * x[..., 0]
        out[..., 1, 1] = 1.0
        return out

    def ijac(y):
        out = np.zeros(np.shape(y)[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 0] = -2.0 * y[..., 0]
        out[..., 1, 1] = 1.0
        return out

    return Mapping("shear", 2, fwd, inv, jac, ijac, True)


def _cubic_degenerate() -> Mapping:
    def fwd(x):
        return np.stack([x[..., 0] ** 3, x[..., 1]], axis=-1)

    def inv(y):
        return np.stack([np.cbrt(y[..., 0]), y[..., 1]], axis=-1)

    def jac(x):
        out = np.zeros(np.shape(x)[:-1] + (2, 2))
        out[..., 0, 0] = 3.0 * x[..., 0] ** 2
        out[..., 1, 1] = 1.0
        return out

    # the inverse is not differentiable on {y_0 = 0}
    return Mapping("cubic_degenerate", 2, fwd, inv, jac, None, False)


MAPPING_REGISTRY: dict[str, Callable[..., Mapping]] = {
    "identity": _identity,
    "linear": _linear,
    "linear3d": _linear3d,
    "shear": _shear,
    "cubic_degenerate": _cubic_degenerate,
}


def make_mapping(name: str, numeric_jacobian: bool = False, **params) -> Mapping:
    """Look up a registry mapping; ``numeric_jacobian`` drops the analytic Jacobians."""
    try:
        factory = MAPPING_REGISTRY[name]
    except KeyError:
        raise FieldError(f"unknown mapping {name!r}; known: {sorted(MAPPING_REGISTRY)}") from None
    try:
        T = factory(**params)
    except TypeError as exc:
        raise FieldError(f"bad parameters for mapping {name!r}: {exc}") from None
    if numeric_jacobian:
        T = Mapping(T.name, T.dim, T.forward, T.inverse, None, None, T.regular, T.params)
    return T
