"""Additive cube functions and the additivity auditor.

An interval function assigns a number ``phi(Q)`` to each cube ``Q`` and is
additive over finite partitions into cubes.  The concrete kinds here are:

* :class:`Integral` -- ``int_Q f``
* :class:`Flux` -- outward flux of a vector field through the boundary of ``Q``
* :class:`ImageMeasure` -- ``m(T(Q))``, by Monte Carlo or rasterisation
* :class:`PushforwardIntegral` -- ``int_{T(Q)} f``
* :class:`Circulation` -- ``oint P dx + Qc dy`` counterclockwise (plane only)
* :class:`ComplexContour` -- ``oint f dz`` counterclockwise (plane only)
* :class:`SegmentLength` -- length of ``L intersect Q`` for a line ``L``
* :class:`Dirac` -- indicator of ``a in Q``; *not* additive, kept as a counterexample
* :class:`LinearCombination` -- ``alpha*phi1 + beta*phi2``

Deterministic kinds are bit-reproducible.  Stochastic kinds need a seed and
return a standard error alongside the value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, ClassVar, NamedTuple, Sequence

import numpy as np

from .fields import Mapping, VectorField
from .geometry import Cube, GeometryError, OrientedFace, Region, faces, grid_partition
from .quadrature import DEFAULT_SPEC, QuadratureSpec, integrate_cube, integrate_face
from .report import DEFAULT_CONFIDENCE, CheckReport, make_report

__all__ = [
    "Deterministic",
    "Stochastic",
    "Estimate",
    "IntervalFunction",
    "Integral",
    "Flux",
    "ImageMeasure",
    "PushforwardIntegral",
    "Circulation",
    "ComplexContour",
    "SegmentLength",
    "Line2D",
    "Dirac",
    "LinearCombination",
    "DomainError",
    "MissingSeedError",
    "DegenerateBoxError",
    "combine",
    "evaluate",
    "derive_seed",
    "check_additivity",
    "boundary_flux",
    "line_boundary_integral",
    "MonteCarloResult",
]

DEFAULT_SAMPLES = 10**6
BOX_RESOLUTION = 32
BOX_INFLATION = 0.05
_CHUNK = 1 << 18


class DomainError(ValueError):
    pass


class MissingSeedError(ValueError):
    pass


class DegenerateBoxError(ValueError):
    pass


@dataclass(frozen=True)
class Deterministic:
    """Roundoff-level error model: ``|error| <= atol + rtol*|value|``."""

    atol: float = 0.0
    rtol: float = 1e-12

    def noise(self, est: "Estimate") -> float:
        return self.atol + self.rtol * abs(est.value)


@dataclass(frozen=True)
class Stochastic:
    samples: int = DEFAULT_SAMPLES
    confidence: float = DEFAULT_CONFIDENCE

    def noise(self, est: "Estimate") -> float:
        return self.confidence * est.sigma


class Estimate(NamedTuple):
    value: complex | float
    sigma: float = 0.0


def derive_seed(seed: int, *keys: int) -> int:
    """Independent child seed, stable across platforms."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return int(ss.generate_state(1, np.uint64)[0])


class IntervalFunction:
    kind: ClassVar[str] = "abstract"
    domain: Cube | None = None

    @property
    def dim(self) -> int:
        raise NotImplementedError

    @property
    def tolerance(self) -> Deterministic | Stochastic:
        return Deterministic()

    @property
    def needs_seed(self) -> bool:
        return False

    @property
    def is_complex(self) -> bool:
        return False

    @property
    def is_stochastic(self) -> bool:
        return isinstance(self.tolerance, Stochastic)

    def evaluate(self, cube: Cube, seed: int | None = None) -> Estimate:
        if cube.dim != self.dim:
            raise DomainError(f"{self.kind} is defined in dimension {self.dim}, cube has {cube.dim}")
        if self.domain is not None and not self.domain.contains_cube(cube, tol=1e-12):
            raise DomainError(f"cube {cube} leaves the domain {self.domain} of {self.kind}")
        if self.needs_seed and seed is None:
            raise MissingSeedError(f"{self.kind} is stochastic and needs a seed")
        return self._evaluate(cube, seed)

    def __call__(self, cube: Cube, seed: int | None = None):
        return self.evaluate(cube, seed).value

    def noise(self, est: Estimate) -> float:
        return self.tolerance.noise(est)

    def _evaluate(self, cube: Cube, seed: int | None) -> Estimate:
        raise NotImplementedError


def evaluate(phi: IntervalFunction, cube: Cube, seed: int | None = None):
    return phi(cube, seed)


# --------------------------------------------------------------------------
# deterministic kinds


@dataclass(frozen=True)
class Integral(IntervalFunction):
    f: object
    spec: QuadratureSpec = DEFAULT_SPEC
    domain: Cube | None = None
    kind: ClassVar[str] = "integral"

    @property
    def dim(self) -> int:
        return self.f.dim

    @property
    def is_complex(self) -> bool:
        return bool(getattr(self.f, "is_complex", False))

    def _evaluate(self, cube, seed):
        return Estimate(integrate_cube(self.f, cube, self.spec))


class _BoundaryKind(IntervalFunction):
    """Sum over oriented faces of ``sign * int_face g_axis``."""

    spec: QuadratureSpec

    def normal_integrand(self, axis: int) -> Callable[[np.ndarray], np.ndarray]:
        raise NotImplementedError

    def face_value(self, face: OrientedFace):
        return face.sign * integrate_face(self.normal_integrand(face.axis), face, self.spec)

    def _evaluate(self, cube, seed):
        return Estimate(_ordered_sum(self.face_value(f) for f in faces(cube)))

    def over_region(self, region: Region):
        """Boundary integral of a cube union; exactly matched shared faces are skipped."""
        if region.dim != self.dim:
            raise DomainError(f"region dim {region.dim} does not match {self.kind} dim {self.dim}")
        return _ordered_sum(self.face_value(f) for f in region.boundary_faces())


def _ordered_sum(values):
    total = 0.0
    for v in values:
        total = total + v
    return total


@dataclass(frozen=True)
class Flux(_BoundaryKind):
    F: VectorField
    spec: QuadratureSpec = DEFAULT_SPEC
    domain: Cube | None = None
    kind: ClassVar[str] = "flux"

    @property
    def dim(self) -> int:
        return self.F.dim

    @property
    def is_complex(self) -> bool:
        return any(getattr(c, "is_complex", False) for c in self.F.components)

    def normal_integrand(self, axis):
        return self.F.components[axis]


def _negated(g):
    return lambda x: -g(x)


def _scaled(g, c):
    return lambda x: c * g(x)


@dataclass(frozen=True)
class Circulation(_BoundaryKind):
    """``oint P dx + Qc dy``, counterclockwise: the flux of ``(Qc, -P)``."""

    P: object
    Qc: object
    spec: QuadratureSpec = DEFAULT_SPEC
    domain: Cube | None = None
    kind: ClassVar[str] = "circulation"

    def __post_init__(self):
        if self.P.dim != 2 or self.Qc.dim != 2:
            raise DomainError("circulation is defined in the plane")

    @property
    def dim(self) -> int:
        return 2

    @property
    def is_complex(self) -> bool:
        return bool(getattr(self.P, "is_complex", False) or getattr(self.Qc, "is_complex", False))

    def normal_integrand(self, axis):
        return self.Qc if axis == 0 else _negated(self.P)


@dataclass(frozen=True)
class ComplexContour(_BoundaryKind):
    """``oint f dz`` counterclockwise, with ``dz = dx + i dy``."""

    f: object
    spec: QuadratureSpec = DEFAULT_SPEC
    domain: Cube | None = None
    kind: ClassVar[str] = "complex_contour"

    def __post_init__(self):
        if self.f.dim != 2:
            raise DomainError("complex contour integrals need a field on the plane")

    @property
    def dim(self) -> int:
        return 2

    @property
    def is_complex(self) -> bool:
        return True

    def normal_integrand(self, axis):
        return _scaled(self.f, 1j) if axis == 0 else _negated(self.f)


@dataclass(frozen=True)
class Line2D:
    """Line ``point + t*direction`` for ``t`` in ``t_range``; direction is normalised."""

    point: tuple[float, float]
    direction: tuple[float, float]
    t_range: tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self):
        p = np.asarray(self.point, dtype=float)
        d = np.asarray(self.direction, dtype=float)
        if p.shape != (2,) or d.shape != (2,):
            raise GeometryError("Line2D needs planar point and direction")
        norm = float(np.hypot(d[0], d[1]))
        if norm == 0 or not math.isfinite(norm):
            raise GeometryError("line direction must be a nonzero finite vector")
        if norm != 1.0:
            d = d / norm
        t0, t1 = (float(t) for t in self.t_range)
        if not t0 < t1:
            raise GeometryError("line parameter range must be nonempty")
        object.__setattr__(self, "point", tuple(p.tolist()))
        object.__setattr__(self, "direction", tuple(d.tolist()))
        object.__setattr__(self, "t_range", (t0, t1))

    @classmethod
    def diagonal(cls) -> "Line2D":
        """``{(x, x) : 0 < x < 1}``."""
        return cls((0.0, 0.0), (1.0, 1.0), (0.0, math.sqrt(2.0)))

    def distance(self, x: Sequence[float]) -> float:
        """Distance from ``x`` to the (possibly bounded) line."""
        p = np.asarray(self.point)
        d = np.asarray(self.direction)
        v = np.asarray(x, dtype=float) - p
        t = float(np.clip(v @ d, *self.t_range))
        return float(np.linalg.norm(v - t * d))


@dataclass(frozen=True)
class SegmentLength(IntervalFunction):
    """Length of ``L intersect Q``, exact.

    Additive whenever ``L`` does not run inside a shared face of the
    partition (a line along a grid line would be counted twice, just as a
    Dirac atom on a shared face is).
    """

    line: Line2D
    domain: Cube | None = None
    kind: ClassVar[str] = "segment_length"

    @property
    def dim(self) -> int:
        return 2

    @property
    def tolerance(self):
        return Deterministic(atol=0.0, rtol=1e-15)

    def _evaluate(self, cube, seed):
        t0, t1 = self.line.t_range
        for p, d, lo in zip(self.line.point, self.line.direction, cube.lower):
            hi = lo + cube.side
            if d == 0.0:
                if not lo <= p <= hi:
                    return Estimate(0.0)
                continue
            ta = (lo - p) / d
            tb = (hi - p) / d
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
        return Estimate(max(0.0, t1 - t0))


@dataclass(frozen=True)
class Dirac(IntervalFunction):
    """``1`` if ``a`` lies in the closed cube, else ``0``.  Not additive."""

    a: tuple[float, ...]
    domain: Cube | None = None
    kind: ClassVar[str] = "dirac"

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in np.atleast_1d(self.a)))

    @property
    def dim(self) -> int:
        return len(self.a)

    @property
    def tolerance(self):
        return Deterministic(atol=0.0, rtol=0.0)

    def _evaluate(self, cube, seed):
        return Estimate(1.0 if cube.contains(self.a) else 0.0)


# --------------------------------------------------------------------------
# image measures


@dataclass(frozen=True)
class MonteCarloResult:
    value: float
    sigma: float
    box_lower: tuple[float, ...]
    box_upper: tuple[float, ...]
    hits: int
    samples: int
    min_weight: float


def bounding_box(T: Mapping, cube: Cube) -> tuple[np.ndarray, np.ndarray]:
    """Box around ``T(cube)`` from the image of a boundary lattice, inflated by 5% per side."""
    y = T(cube.corner_grid(BOX_RESOLUTION))
    lo = y.min(axis=0)
    hi = y.max(axis=0)
    width = hi - lo
    if not np.all(np.isfinite(width)) or np.any(width <= 0):
        raise DegenerateBoxError(f"{T.name} maps {cube} to a degenerate box")
    return lo - BOX_INFLATION * width, hi + BOX_INFLATION * width


def membership_sample(
    T: Mapping, cube: Cube, samples: int, seed: int, weight: Callable | None = None
) -> MonteCarloResult:
    """``int_{T(cube)} weight`` by uniform sampling of a box and pulling points back."""
    if T.inverse is None:
        raise ValueError(f"inverse-membership needs an inverse for mapping {T.name!r}")
    if seed is None:
        raise MissingSeedError("Monte Carlo estimate needs a seed")
    samples = int(samples)
    if samples < 1:
        raise ValueError("need at least one sample")
    lo, hi = bounding_box(T, cube)
    cl = np.asarray(cube.lower)
    cu = cl + cube.side
    rng = np.random.default_rng(seed)
    s1: list[float] = []
    s2: list[float] = []
    hits = 0
    min_w = math.inf
    done = 0
    while done < samples:
        m = min(_CHUNK, samples - done)
        y = rng.uniform(lo, hi, size=(m, cube.dim))
        x = T.inverse(y)
        inside = np.all((x >= cl) & (x <= cu), axis=1)
        hits += int(inside.sum())
        if weight is None:
            w = inside.astype(float)
        else:
            fy = np.asarray(weight(y))
            if np.iscomplexobj(fy):
                raise ValueError("Monte Carlo weights must be real")
            w = np.where(inside, fy, 0.0)
            if inside.any():
                min_w = min(min_w, float(fy[inside].min()))
        s1.append(float(w.sum()))
        s2.append(float((w * w).sum()))
        done += m
    box = float(np.prod(hi - lo))
    mean = math.fsum(s1) / samples
    var = max(math.fsum(s2) / samples - mean * mean, 0.0)
    return MonteCarloResult(
        box * mean,
        box * math.sqrt(var / samples),
        tuple(lo.tolist()),
        tuple(hi.tolist()),
        hits,
        samples,
        min_w if weight is not None else 1.0,
    )


def _dilate(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    for axis in range(mask.ndim):
        shifted = out.copy()
        shifted[tuple(slice(1, None) if a == axis else slice(None) for a in range(mask.ndim))] |= out[
            tuple(slice(None, -1) if a == axis else slice(None) for a in range(mask.ndim))
        ]
        shifted[tuple(slice(None, -1) if a == axis else slice(None) for a in range(mask.ndim))] |= out[
            tuple(slice(1, None) if a == axis else slice(None) for a in range(mask.ndim))
        ]
        out = shifted
    return out


def _cells_of(y: np.ndarray, lo: np.ndarray, width: np.ndarray, res: int) -> tuple:
    idx = np.floor((y - lo) / width * res).astype(np.int64)
    np.clip(idx, 0, res - 1, out=idx)
    return tuple(idx.T)


def rasterize(T: Mapping, cube: Cube, resolution: int = 256, weight: Callable | None = None) -> tuple[float, float]:
    """Bracket ``int_{T(cube)} weight`` on a ``resolution**n`` grid over the bounding box.

    Cells touched by the image of the boundary (dilated by one cell) form an
    uncertain band; other cells hit by mapped interior samples lie inside
    ``T(cube)``.  Returns ``(midpoint, half_width)``; ``weight`` is sampled at
    cell centres.
    """
    n = cube.dim
    res = int(resolution)
    lo, hi = bounding_box(T, cube)
    width = hi - lo
    cell = float(np.prod(width / res))
    band = np.zeros((res,) * n, dtype=bool)
    occupied = np.zeros((res,) * n, dtype=bool)

    m_face = 8 * res
    for f in faces(cube):
        axes = [np.linspace(a, b, m_face) for a, b in f.intervals()]
        if axes:
            t = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n - 1)
        else:
            t = np.zeros((1, 0))
        x = np.insert(t, f.axis, f.coordinate, axis=1)
        band[_cells_of(T(x), lo, width, res)] = True
    band = _dilate(band)

    m_in = 2 * res
    ticks = cube.lower[0] + (np.arange(m_in) + 0.5) / m_in * cube.side
    rest = [np.asarray(cube.lower[j]) + (np.arange(m_in) + 0.5) / m_in * cube.side for j in range(1, n)]
    for x0 in ticks:
        if rest:
            t = np.stack(np.meshgrid(*rest, indexing="ij"), axis=-1).reshape(-1, n - 1)
            x = np.insert(t, 0, x0, axis=1)
        else:
            x = np.array([[x0]])
        occupied[_cells_of(T(x), lo, width, res)] = True
    inside = occupied & ~band

    if weight is None:
        w_in = float(inside.sum())
        w_band = float(band.sum())
        return (w_in + 0.5 * w_band) * cell, 0.5 * w_band * cell
    centres = np.stack(np.meshgrid(*[lo[j] + (np.arange(res) + 0.5) / res * width[j] for j in range(n)], indexing="ij"), axis=-1)
    fv = np.asarray(weight(centres), dtype=float)
    w_in = math.fsum(fv[inside].tolist())
    w_band = math.fsum(fv[band].tolist())
    a_band = math.fsum(np.abs(fv[band]).tolist())
    return (w_in + 0.5 * w_band) * cell, 0.5 * a_band * cell


_STRATEGIES = ("inverse-membership", "rasterize")


@dataclass(frozen=True)
class ImageMeasure(IntervalFunction):
    """``m(T(Q))``.

    ``inverse-membership`` is a Monte Carlo estimate with standard error;
    ``rasterize`` is deterministic and reports half the width of its
    bracket as ``sigma`` (confidence multiplier 1).
    """

    T: Mapping
    strategy: str = "inverse-membership"
    samples: int = DEFAULT_SAMPLES
    confidence: float = DEFAULT_CONFIDENCE
    resolution: int = 256
    domain: Cube | None = None
    kind: ClassVar[str] = "image_measure"

    def __post_init__(self):
        if self.strategy not in _STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; use one of {_STRATEGIES}")
        if self.strategy == "inverse-membership" and self.T.inverse is None:
            raise ValueError(f"inverse-membership needs an inverse for mapping {self.T.name!r}")

    @property
    def dim(self) -> int:
        return self.T.dim

    @property
    def tolerance(self):
        if self.strategy == "rasterize":
            return Stochastic(self.resolution**self.dim, 1.0)
        return Stochastic(self.samples, self.confidence)

    @property
    def needs_seed(self) -> bool:
        return self.strategy == "inverse-membership"

    def _weight(self):
        return None

    def _evaluate(self, cube, seed):
        if self.strategy == "rasterize":
            return Estimate(*rasterize(self.T, cube, self.resolution, self._weight()))
        r = membership_sample(self.T, cube, self.samples, seed, self._weight())
        return Estimate(r.value, r.sigma)

    def sample(self, cube: Cube, seed: int) -> MonteCarloResult:
        return membership_sample(self.T, cube, self.samples, seed, self._weight())


@dataclass(frozen=True)
class PushforwardIntegral(ImageMeasure):
    """``int_{T(Q)} f dy``; ``f`` is a real field on the target space."""

    # `f` defaults to None only because dataclass field order demands it
    f: object = None
    kind: ClassVar[str] = "pushforward_integral"

    def __post_init__(self):
        super().__post_init__()
        if self.f is None:
            raise ValueError("pushforward integral needs an integrand")
        if self.f.dim != self.T.dim:
            raise DomainError("integrand and mapping dimensions differ")

    def _weight(self):
        return self.f


# --------------------------------------------------------------------------
# combinations


@dataclass(frozen=True)
class LinearCombination(IntervalFunction):
    """``alpha*phi1 + beta*phi2``; both terms see the same seed."""

    alpha: complex | float
    phi1: IntervalFunction
    beta: complex | float
    phi2: IntervalFunction
    domain: Cube | None = None
    kind: ClassVar[str] = "linear_combination"

    def __post_init__(self):
        if self.phi1.dim != self.phi2.dim:
            raise DomainError(f"cannot combine dims {self.phi1.dim} and {self.phi2.dim}")

    @property
    def dim(self) -> int:
        return self.phi1.dim

    @property
    def is_complex(self) -> bool:
        return (
            self.phi1.is_complex
            or self.phi2.is_complex
            or isinstance(self.alpha, complex)
            or isinstance(self.beta, complex)
        )

    @property
    def needs_seed(self) -> bool:
        return self.phi1.needs_seed or self.phi2.needs_seed

    @property
    def tolerance(self):
        t1, t2 = self.phi1.tolerance, self.phi2.tolerance
        stoch = [t for t in (t1, t2) if isinstance(t, Stochastic)]
        if stoch:
            return Stochastic(max(t.samples for t in stoch), max(t.confidence for t in stoch))
        a, b = abs(self.alpha), abs(self.beta)
        return Deterministic(a * t1.atol + b * t2.atol, max(t1.rtol, t2.rtol))

    def _evaluate(self, cube, seed):
        e1 = self.phi1.evaluate(cube, seed)
        e2 = self.phi2.evaluate(cube, seed)
        value = self.alpha * e1.value + self.beta * e2.value
        if isinstance(value, complex) and value.imag == 0 and not self.is_complex:
            value = value.real
        return Estimate(value, abs(self.alpha) * e1.sigma + abs(self.beta) * e2.sigma)


def combine(alpha, phi1: IntervalFunction, beta, phi2: IntervalFunction) -> LinearCombination:
    return LinearCombination(alpha, phi1, beta, phi2)


# --------------------------------------------------------------------------
# auditors and region integrals


def check_additivity(
    phi: IntervalFunction,
    cube: Cube,
    k: int = 2,
    tol: float = 1e-8,
    rtol: float = 0.0,
    seed: int | None = None,
) -> CheckReport:
    """Compare ``phi(Q)`` with the sum over the ``k**n`` grid partition.

    The threshold is ``tol + rtol*|phi(Q)|``, plus ``confidence*sigma`` for
    stochastic kinds (cells get independent derived seeds).  A failure is a
    report, not an exception.
    """
    if int(k) != k or k < 2:
        raise ValueError("additivity check needs k >= 2")
    whole = phi.evaluate(cube, seed)
    parts = grid_partition(cube, int(k))
    total = 0.0
    var = whole.sigma**2
    for i, q in enumerate(parts):
        e = phi.evaluate(q, None if seed is None else derive_seed(seed, i + 1))
        total = total + e.value
        var += e.sigma**2
    tm = phi.tolerance
    confidence = tm.confidence if isinstance(tm, Stochastic) else 0.0
    return make_report(
        f"additivity[{phi.kind}]",
        whole.value,
        total,
        tol=tol + rtol * abs(whole.value),
        sigma=math.sqrt(var),
        confidence=confidence,
        details={"k": int(k), "cells": len(parts), "kind": phi.kind},
    )


def boundary_flux(F: VectorField, region: Region, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    if not isinstance(region, Region):
        region = Region.of(region)
    return Flux(F, spec).over_region(region)


def line_boundary_integral(kind: Circulation | ComplexContour, region: Region, spec: QuadratureSpec | None = None):
    """Counterclockwise boundary integral of a cube union in the plane."""
    if not isinstance(region, Region):
        region = Region.of(region)
    if region.dim != 2:
        raise DomainError("line boundary integrals are defined in the plane")
    if not isinstance(kind, (Circulation, ComplexContour)):
        raise TypeError("kind must be a Circulation or ComplexContour")
    if spec is not None and spec != kind.spec:
        kind = type(kind)(**{**kind.__dict__, "spec": spec})
    return kind.over_region(region)
