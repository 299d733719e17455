"""Axis-aligned cubes, their faces, cube unions and placement families.

Every interval function in this package is evaluated on a :class:`Cube`:
a closed set ``prod_j [lower_j, lower_j + side]`` with the same side on
every axis.  Partitions are built from cubes only (dyadic halving or a
``k``-per-axis grid), and children are always listed in lexicographic
order of their integer corner offset so that reductions are reproducible.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Cube",
    "OrientedFace",
    "Region",
    "Parallelepiped",
    "GeometryError",
    "make_cube",
    "cube_metrics",
    "dyadic_children",
    "grid_partition",
    "faces",
    "cubes_containing",
]


class GeometryError(ValueError):
    """Raised for malformed cubes, regions or parallelepipeds."""


@dataclass(frozen=True)
class Cube:
    lower: tuple[float, ...]
    side: float

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(np.asarray(self.lower, dtype=float)))
        if not lower:
            raise GeometryError("cube needs at least one coordinate")
        if not all(math.isfinite(v) for v in lower):
            raise GeometryError(f"non-finite cube corner {lower}")
        side = float(self.side)
        if not math.isfinite(side) or side <= 0:
            raise GeometryError(f"cube side must be positive and finite, got {self.side}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "side", side)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(a + self.side for a in self.lower)

    @property
    def measure(self) -> float:
        return self.side**self.dim

    @property
    def diameter(self) -> float:
        return self.side * math.sqrt(self.dim)

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.lower) + 0.5 * self.side

    def contains(self, x: Sequence[float], tol: float = 0.0) -> bool:
        """Closed containment; boundary points belong to the cube."""
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.lower)
        return bool(np.all(x >= lo - tol) and np.all(x <= lo + self.side + tol))

    def contains_cube(self, other: "Cube", tol: float = 0.0) -> bool:
        return self.contains(other.lower, tol) and self.contains(other.upper, tol)

    def interior_overlaps(self, other: "Cube") -> bool:
        """True if the interiors meet by more than rounding (a few ulps of the coordinates)."""
        for a, b in zip(self.lower, other.lower):
            hi = min(a + self.side, b + other.side)
            slack = 8 * np.finfo(float).eps * max(abs(hi), abs(a), abs(b), self.side, other.side)
            if hi - max(a, b) <= slack:
                return False
        return True

    def corner_grid(self, resolution: int) -> np.ndarray:
        """Points of a ``resolution``-per-axis lattice that lie on the boundary."""
        axes = [np.linspace(a, a + self.side, resolution) for a in self.lower]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        on_boundary = np.zeros(len(mesh), dtype=bool)
        for j, a in enumerate(self.lower):
            on_boundary |= (mesh[:, j] == a) | (mesh[:, j] == axes[j][-1])
        return mesh[on_boundary]


def make_cube(lower: Sequence[float], side: float) -> Cube:
    return Cube(tuple(lower), side)


def cube_metrics(cube: Cube) -> dict[str, float]:
    return {"measure": cube.measure, "diameter": cube.diameter}


def grid_partition(cube: Cube, k: int) -> list[Cube]:
    """Split ``cube`` into ``k**n`` equal subcubes, lexicographic by offset."""
    if int(k) != k or k < 1:
        raise GeometryError(f"grid partition needs an integer k >= 1, got {k}")
    k = int(k)
    if k == 1:
        return [cube]
    h = cube.side / k
    lo = cube.lower
    return [
        Cube(tuple(lo[j] + o * h for j, o in enumerate(offset)), h)
        for offset in itertools.product(range(k), repeat=cube.dim)
    ]


def dyadic_children(cube: Cube) -> list[Cube]:
    return grid_partition(cube, 2)


@dataclass(frozen=True)
class OrientedFace:
    """Face of ``parent`` orthogonal to ``axis``; outward normal is ``sign * e_axis``."""

    parent: Cube
    axis: int
    sign: int

    def __post_init__(self):
        if not 0 <= self.axis < self.parent.dim:
            raise GeometryError(f"face axis {self.axis} out of range for dim {self.parent.dim}")
        if self.sign not in (1, -1):
            raise GeometryError("face sign must be +1 or -1")

    @property
    def coordinate(self) -> float:
        a = self.parent.lower[self.axis]
        return a + self.parent.side if self.sign > 0 else a

    @property
    def measure(self) -> float:
        return self.parent.side ** (self.parent.dim - 1)

    @property
    def normal(self) -> np.ndarray:
        n = np.zeros(self.parent.dim)
        n[self.axis] = self.sign
        return n

    def key(self) -> tuple:
        """Geometry of the face without its orientation; equal keys mean the same face."""
        others = tuple(v for j, v in enumerate(self.parent.lower) if j != self.axis)
        return (self.axis, self.coordinate, others, self.parent.side)

    def intervals(self) -> list[tuple[float, float]]:
        """Tangential extent of the face, one interval per axis other than ``axis``."""
        s = self.parent.side
        return [(a, a + s) for j, a in enumerate(self.parent.lower) if j != self.axis]


def faces(cube: Cube) -> list[OrientedFace]:
    return [OrientedFace(cube, axis, sign) for axis in range(cube.dim) for sign in (-1, 1)]


@dataclass(frozen=True)
class Region:
    """Finite union of cubes with pairwise disjoint interiors.

    Two cell faces cancel only when they coincide exactly (same plane, same
    corner, same side) with opposite orientation, so cells should sit on a
    common lattice.
    """

    cells: tuple[Cube, ...]

    def __post_init__(self):
        cells = tuple(self.cells)
        if not cells:
            raise GeometryError("a region needs at least one cell")
        dims = {c.dim for c in cells}
        if len(dims) != 1:
            raise GeometryError(f"region cells have mixed dimensions {sorted(dims)}")
        for i, a in enumerate(cells):
            for j in range(i + 1, len(cells)):
                if a.interior_overlaps(cells[j]):
                    raise GeometryError(f"region cells {i} and {j} overlap")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def of(cls, cells: Iterable[Cube]) -> "Region":
        return cls(tuple(cells))

    @property
    def dim(self) -> int:
        return self.cells[0].dim

    @property
    def measure(self) -> float:
        return math.fsum(c.measure for c in self.cells)

    def boundary_faces(self) -> list[OrientedFace]:
        """Cell faces left after removing exactly matched opposite pairs.

        Order follows cell order, then face order within the cell.
        """
        all_faces = [f for c in self.cells for f in faces(c)]
        by_key: dict[tuple, list[int]] = {}
        for idx, f in enumerate(all_faces):
            by_key.setdefault(f.key(), []).append(idx)
        dropped: set[int] = set()
        for idxs in by_key.values():
            plus = [i for i in idxs if all_faces[i].sign > 0]
            minus = [i for i in idxs if all_faces[i].sign < 0]
            for p, m in zip(plus, minus):
                dropped.update((p, m))
        return [f for i, f in enumerate(all_faces) if i not in dropped]


@dataclass(frozen=True)
class Parallelepiped:
    """``{base + t1 v1 + t2 v2 + t3 v3 : 0 <= t_i <= 1}`` in three dimensions."""

    base: tuple[float, float, float]
    spans: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float)
        spans = np.asarray(self.spans, dtype=float)
        if base.shape != (3,) or spans.shape != (3, 3):
            raise GeometryError("parallelepiped needs a 3-vector base and three 3-vector spans")
        if not (np.all(np.isfinite(base)) and np.all(np.isfinite(spans))):
            raise GeometryError("non-finite parallelepiped data")
        if self._det(spans) == 0.0:
            raise GeometryError("degenerate parallelepiped spans")
        object.__setattr__(self, "base", tuple(base.tolist()))
        object.__setattr__(self, "spans", tuple(tuple(v) for v in spans.tolist()))

    @staticmethod
    def _det(spans: np.ndarray) -> float:
        # columns are the spanning vectors
        return float(np.linalg.det(np.asarray(spans).T))

    @property
    def volume(self) -> float:
        """Signed volume det(v1, v2, v3)."""
        return self._det(np.asarray(self.spans))


def _anchor(x: float, frac: float, side: float) -> float:
    """Lower coordinate ``x - frac*side`` nudged so that ``[lo, lo+side]`` contains ``x``."""
    lo = x - frac * side
    while lo > x:
        lo = math.nextafter(lo, -math.inf)
    while lo + side < x:
        lo = math.nextafter(lo, math.inf)
    return lo


def cubes_containing(x: Sequence[float], side: float, extra: int = 0, seed: int = 0) -> list[Cube]:
    """Placement family of side-``side`` cubes that contain ``x``.

    The list is: the centered cube, the ``2**n`` cubes having ``x`` as a
    corner (lexicographic by which corner), then ``extra`` cubes whose lower
    corner is uniform in ``[x - side, x]``.  Drawing the uniform offsets from
    ``seed`` alone means the same relative placements recur at every scale.
    """
    x = [float(v) for v in np.atleast_1d(np.asarray(x, dtype=float))]
    if side <= 0:
        raise GeometryError("placement side must be positive")
    n = len(x)
    fracs: list[Sequence[float]] = [[0.5] * n]
    fracs.extend(itertools.product((0.0, 1.0), repeat=n))
    if extra > 0:
        rng = np.random.default_rng(seed)
        fracs.extend(rng.uniform(0.0, 1.0, size=(int(extra), n)).tolist())
    return [Cube(tuple(_anchor(xj, fj, side) for xj, fj in zip(x, f)), side) for f in fracs]
