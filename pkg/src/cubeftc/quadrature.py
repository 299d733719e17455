"""Tensor-product composite Gauss-Legendre rules on cubes and cube faces."""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import Cube, OrientedFace

__all__ = ["QuadratureSpec", "DEFAULT_SPEC", "interval_rule", "tensor_rule", "integrate_cube", "integrate_face"]


@dataclass(frozen=True)
class QuadratureSpec:
    """``nodes`` Gauss-Legendre points on each of ``2**level`` panels per axis.

    At ``level == 0`` a rule is exact for per-axis degree ``<= 2*nodes - 1``.
    """

    nodes: int = 8
    level: int = 0

    def __post_init__(self):
        if int(self.nodes) != self.nodes or self.nodes < 1:
            raise ValueError(f"quadrature needs nodes >= 1, got {self.nodes}")
        if int(self.level) != self.level or self.level < 0:
            raise ValueError(f"quadrature needs level >= 0, got {self.level}")

    def refined(self, level: int) -> "QuadratureSpec":
        return QuadratureSpec(self.nodes, level)


DEFAULT_SPEC = QuadratureSpec()


@functools.lru_cache(maxsize=64)
def _reference_rule(nodes: int, level: int) -> tuple[np.ndarray, np.ndarray]:
    # rule on [0, 1]
    t, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    panels = 2**level
    offsets = np.arange(panels, dtype=float)[:, None]
    pts = ((offsets + t[None, :]) / panels).ravel()
    wts = np.tile(w / panels, panels)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def interval_rule(a: float, b: float, spec: QuadratureSpec = DEFAULT_SPEC) -> tuple[np.ndarray, np.ndarray]:
    t, w = _reference_rule(spec.nodes, spec.level)
    return a + (b - a) * t, (b - a) * w


def tensor_rule(
    intervals: Sequence[tuple[float, float]], spec: QuadratureSpec = DEFAULT_SPEC
) -> tuple[np.ndarray, np.ndarray]:
    """Points ``(m, d)`` and weights ``(m,)`` of the product rule over a box."""
    if not intervals:
        return np.zeros((1, 0)), np.ones(1)
    rules = [interval_rule(a, b, spec) for a, b in intervals]
    pts = np.stack(np.meshgrid(*[r[0] for r in rules], indexing="ij"), axis=-1).reshape(-1, len(rules))
    wts = functools.reduce(np.multiply.outer, [r[1] for r in rules]).ravel()
    return pts, wts


@functools.lru_cache(maxsize=256)
def _unit_rule(nodes: int, level: int, dim: int, skip: int = -1) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on ``[0, 1]**dim``; axis ``skip`` (if any) is pinned to 0 and carries no weight."""
    axes = [i for i in range(dim) if i != skip]
    pts, wts = tensor_rule([(0.0, 1.0)] * len(axes), QuadratureSpec(nodes, level))
    full = np.zeros((len(wts), dim))
    full[:, axes] = pts
    full.setflags(write=False)
    wts.setflags(write=False)
    return full, wts


def cube_rule(cube: Cube, spec: QuadratureSpec = DEFAULT_SPEC) -> tuple[np.ndarray, np.ndarray]:
    ref, w = _unit_rule(spec.nodes, spec.level, cube.dim)
    return np.asarray(cube.lower) + cube.side * ref, w * cube.measure


def face_rule(face: OrientedFace, spec: QuadratureSpec = DEFAULT_SPEC) -> tuple[np.ndarray, np.ndarray]:
    """Rule on a face, points embedded in the ambient space."""
    cube = face.parent
    ref, w = _unit_rule(spec.nodes, spec.level, cube.dim, face.axis)
    pts = np.asarray(cube.lower) + cube.side * ref
    pts[:, face.axis] = face.coordinate
    return pts, w * face.measure


def integrate_cube(f: Callable[[np.ndarray], np.ndarray], cube: Cube, spec: QuadratureSpec = DEFAULT_SPEC):
    pts, wts = cube_rule(cube, spec)
    return _weighted_sum(f(pts), wts)


def integrate_face(g: Callable[[np.ndarray], np.ndarray], face: OrientedFace, spec: QuadratureSpec = DEFAULT_SPEC):
    """Unsigned integral of ``g`` over ``face``; callers apply the orientation."""
    pts, wts = face_rule(face, spec)
    return _weighted_sum(g(pts), wts)


def _weighted_sum(values, wts):
    values = np.broadcast_to(np.asarray(values), wts.shape)
    total = np.dot(wts, values)
    return complex(total) if np.iscomplexobj(total) else float(total)
