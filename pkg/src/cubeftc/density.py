"""Upper and lower densities of interval functions, and the dyadic descent.

The upper density at ``x`` is the limsup of ``phi(Q)/m(Q)`` over cubes
containing ``x`` as their diameter shrinks.  :func:`estimate_density`
replaces "all cubes" with the finite family from
:func:`~cubeftc.geometry.cubes_containing` on a ladder of halving scales, so
its ``upper`` is a lower bound for the true upper density (and ``lower`` an
upper bound for the true lower density).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import fields as fl
from .geometry import Cube, cubes_containing, dyadic_children
from .interval_functions import (
    Circulation,
    ComplexContour,
    Dirac,
    Flux,
    ImageMeasure,
    Integral,
    IntervalFunction,
    LinearCombination,
    PushforwardIntegral,
    SegmentLength,
    derive_seed,
)

__all__ = [
    "LadderRung",
    "DensityEstimate",
    "DescentLevel",
    "DescentTrace",
    "ratio",
    "estimate_density",
    "dyadic_descent",
    "reference_density",
    "MarginError",
    "DEFAULT_LEVELS",
    "DEFAULT_EXTRA",
]

DEFAULT_LEVELS = 10
DEFAULT_EXTRA = 16
RELIABLE_NOISE_FRACTION = 0.1
DIVERGENCE_WINDOW = 3
DIVERGENCE_SPREAD = 0.1
MONOTONE_TOL = 1e-9


class MarginError(ValueError):
    """The ladder's cubes would leave the interval function's domain."""


def ratio(phi: IntervalFunction, cube: Cube, seed: int | None = None):
    return phi(cube, seed) / cube.measure


@dataclass(frozen=True)
class LadderRung:
    scale: float
    max_ratio: float
    min_ratio: float
    noise: float

    @property
    def spread(self) -> float:
        return self.max_ratio - self.min_ratio


@dataclass(frozen=True)
class DensityEstimate:
    point: tuple[float, ...]
    ladder: tuple[LadderRung, ...]
    upper: float
    lower: float
    slope: float
    reliable_index: int
    upper_constant: float | None = None
    lower_constant: float | None = None
    family: str = ""

    @property
    def upper_divergent(self) -> bool:
        return math.isinf(self.upper)

    @property
    def lower_divergent(self) -> bool:
        return math.isinf(self.lower)

    @property
    def finite(self) -> bool:
        return not (self.upper_divergent or self.lower_divergent)

    @property
    def extrapolation_error(self) -> float:
        """Bound on how far the extremes may still move below the finest reliable scale.

        Geometric tail of the last step of each extreme at the observed
        convergence rate, with the rate clamped below at 1/2.
        """
        k = self.reliable_index
        if k == 0 or not self.finite:
            return self.ladder[k].spread if self.finite else math.inf
        r = 2.0 ** (-max(self.slope, 0.5)) if math.isfinite(self.slope) else 0.0
        tail = r / (1.0 - r) if r < 1 else math.inf
        du = abs(self.ladder[k].max_ratio - self.ladder[k - 1].max_ratio)
        dl = abs(self.ladder[k].min_ratio - self.ladder[k - 1].min_ratio)
        return max(du, dl) * tail + self.ladder[k].noise


def _fit_slope(ks: Sequence[int], spreads: Sequence[float]) -> float:
    """Least-squares rate ``p`` in ``spread_k ~ C * 2**(-p*k)``."""
    pts = [(k, math.log2(s)) for k, s in zip(ks, spreads) if s > 0]
    if not pts:
        return math.inf
    if len(pts) < 2:
        return math.nan
    k = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts])
    b = np.polyfit(k, y, 1)[0]
    return float(-b)


def _stabilised(values: Sequence[float], floor: float) -> float | None:
    tail = values[-DIVERGENCE_WINDOW:]
    if len(tail) < DIVERGENCE_WINDOW:
        return None
    mags = [abs(v) for v in tail]
    if min(mags) <= floor or any(np.sign(v) != np.sign(tail[-1]) for v in tail):
        return None
    if (max(mags) - min(mags)) / max(mags) < DIVERGENCE_SPREAD:
        return float(tail[-1])
    return None


def estimate_density(
    phi: IntervalFunction,
    x: Sequence[float],
    delta0: float | None = None,
    levels: int = DEFAULT_LEVELS,
    extra: int = DEFAULT_EXTRA,
    seed: int = 0,
) -> DensityEstimate:
    """Ladder of ``max``/``min`` ratios over placements at scales ``delta0 * 2**-k``.

    ``upper``/``lower`` are the extremes at the finest reliable scale, i.e.
    the finest scale where the evaluation noise is at most 10% of the
    observed spread (the finest scale overall if the spread never clears the
    noise).  If ``max_ratio * delta`` settles to a nonzero constant over the
    last three scales the upper density is reported as ``+inf`` with that
    constant attached; likewise for the lower density.
    """
    if phi.is_complex:
        raise TypeError("density ladders need a real-valued interval function")
    x = tuple(float(v) for v in np.atleast_1d(np.asarray(x, dtype=float)))
    if len(x) != phi.dim:
        raise fl.FieldError(f"point has {len(x)} coordinates, {phi.kind} lives in dimension {phi.dim}")
    if phi.domain is not None:
        lo = np.asarray(phi.domain.lower)
        margin = float(np.min(np.minimum(np.asarray(x) - lo, lo + phi.domain.side - np.asarray(x))))
        if delta0 is None:
            delta0 = min(0.1, margin)
        if delta0 <= 0 or margin < delta0:
            raise MarginError(f"point {x} is within {margin} of the domain boundary, ladder needs {delta0}")
    elif delta0 is None:
        delta0 = 0.1
    if delta0 <= 0:
        raise ValueError("delta0 must be positive")

    rungs = []
    for k in range(levels + 1):
        delta = delta0 * 2.0**-k
        cubes = cubes_containing(x, delta, extra, seed)
        rs = []
        noise = 0.0
        for i, q in enumerate(cubes):
            s = derive_seed(seed, k, i) if phi.needs_seed else None
            est = phi.evaluate(q, s)
            rs.append(est.value / q.measure)
            noise = max(noise, phi.noise(est) / q.measure)
        rungs.append(LadderRung(delta, float(max(rs)), float(min(rs)), float(noise)))

    reliable = [k for k, r in enumerate(rungs) if r.noise <= RELIABLE_NOISE_FRACTION * r.spread]
    kr = reliable[-1] if reliable else levels
    ks = reliable if reliable else list(range(levels + 1))
    slope = _fit_slope(ks, [rungs[k].spread for k in ks])

    upper = rungs[kr].max_ratio
    lower = rungs[kr].min_ratio
    up_c = _stabilised([r.max_ratio * r.scale for r in rungs], floor=1e3 * max(r.noise * r.scale for r in rungs) + 1e-300)
    lo_c = _stabilised([r.min_ratio * r.scale for r in rungs], floor=1e3 * max(r.noise * r.scale for r in rungs) + 1e-300)
    if up_c is not None:
        upper = math.copysign(math.inf, up_c)
    if lo_c is not None:
        lower = math.copysign(math.inf, lo_c)
    return DensityEstimate(
        point=x,
        ladder=tuple(rungs),
        upper=upper,
        lower=lower,
        slope=slope,
        reliable_index=kr,
        upper_constant=up_c,
        lower_constant=lo_c,
        family=f"centered + {2 ** len(x)} corner-anchored + {extra} uniform (seed {seed})",
    )


# --------------------------------------------------------------------------
# dyadic descent


@dataclass(frozen=True)
class DescentLevel:
    cube: Cube
    ratio: float
    children_sum_defect: float = 0.0


@dataclass
class DescentTrace:
    """Cubes picked by the descent, starting with the root, and diagnostics.

    ``monotonicity_violations`` lists levels whose best child fell short of
    its parent by more than the tolerance; ``additivity_defects`` lists
    levels where the children did not sum to the parent.  Either points to a
    non-additive or noisy ``phi``.
    """

    levels: list[DescentLevel]
    limit_point: tuple[float, ...]
    monotonicity_violations: list[int] = field(default_factory=list)
    additivity_defects: list[int] = field(default_factory=list)

    @property
    def ratios(self) -> list[float]:
        return [lv.ratio for lv in self.levels]

    @property
    def final_ratio(self) -> float:
        return self.levels[-1].ratio


def dyadic_descent(
    phi: IntervalFunction,
    cube: Cube,
    depth: int,
    seed: int | None = None,
    tol: float = MONOTONE_TOL,
) -> DescentTrace:
    """Repeatedly keep the child with the largest ratio (lowest index on ties)."""
    if depth < 1:
        raise ValueError("descent depth must be >= 1")
    if phi.is_complex:
        raise TypeError("descent compares ratios and needs a real-valued interval function")
    if phi.needs_seed and seed is None:
        raise ValueError(f"{phi.kind} is stochastic and needs a seed")
    parent_val = phi(cube, seed)
    current = cube
    trace = [DescentLevel(cube, parent_val / cube.measure)]
    mono: list[int] = []
    defects: list[int] = []
    for level in range(1, depth + 1):
        kids = dyadic_children(current)
        vals = [phi(c, None if seed is None else derive_seed(seed, level, i)) for i, c in enumerate(kids)]
        best = 0
        for i in range(1, len(kids)):
            if vals[i] > vals[best]:
                best = i
        r = vals[best] / kids[best].measure
        defect = abs(math.fsum(vals) - parent_val)
        if not phi.needs_seed and defect > tol * max(1.0, abs(parent_val)) + 1e-300:
            defects.append(level)
        if r < trace[-1].ratio - tol:
            mono.append(level)
        trace.append(DescentLevel(kids[best], r, defect))
        current = kids[best]
        parent_val = vals[best]
    return DescentTrace(trace, tuple(current.center.tolist()), mono, defects)


# --------------------------------------------------------------------------
# analytic densities


def reference_density(phi: IntervalFunction) -> Callable[[np.ndarray], np.ndarray] | None:
    """Known density field of ``phi``, or ``None`` where none exists.

    integral -> f; flux -> div F; image measure -> |det dT|;
    pushforward -> f(T(x)) |det dT(x)|; complex contour -> 2i df/dzbar;
    circulation -> Qc_x - P_y.  Segment lengths and Dirac atoms have no
    finite density everywhere.
    """
    if isinstance(phi, Integral):
        return phi.f
    if isinstance(phi, Flux):
        return fl.divergence_field(phi.F)
    if isinstance(phi, PushforwardIntegral):
        T, f = phi.T, phi.f
        return fl.DerivedField(T.dim, lambda x: f(T(x)) * np.abs(fl.jacobian_determinants(T, x)), "pushforward density")
    if isinstance(phi, ImageMeasure):
        T = phi.T
        return fl.DerivedField(T.dim, lambda x: np.abs(fl.jacobian_determinants(T, x)), "|det dT|")
    if isinstance(phi, ComplexContour):
        return fl.dbar_field(phi.f)
    if isinstance(phi, Circulation):
        qx = fl.partial_field(phi.Qc, 0)
        py = fl.partial_field(phi.P, 1)
        if isinstance(qx, fl.PolyField) and isinstance(py, fl.PolyField):
            return qx - py
        return fl.DerivedField(2, lambda x: qx(x) - py(x), "curl")
    if isinstance(phi, LinearCombination):
        d1 = reference_density(phi.phi1)
        d2 = reference_density(phi.phi2)
        if d1 is None or d2 is None:
            return None
        a, b = phi.alpha, phi.beta
        if isinstance(d1, fl.PolyField) and isinstance(d2, fl.PolyField):
            return d1 * a + d2 * b
        return fl.DerivedField(phi.dim, lambda x: a * d1(x) + b * d2(x), "combination", phi.is_complex)
    if isinstance(phi, (SegmentLength, Dirac)):
        return None
    return None
