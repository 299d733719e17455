"""Interval (cube) functions, their densities, and numerical checks of the
cube form of the fundamental theorem of calculus."""

from .geometry import Cube, OrientedFace, Parallelepiped, Region, cubes_containing, dyadic_children, faces, grid_partition, make_cube
from .fields import PolyField, VectorField, Mapping, affine_field, complex_poly, make_field, make_mapping
from .quadrature import QuadratureSpec
from .interval_functions import (
    Circulation,
    ComplexContour,
    Dirac,
    Flux,
    ImageMeasure,
    Integral,
    IntervalFunction,
    Line2D,
    LinearCombination,
    PushforwardIntegral,
    SegmentLength,
    check_additivity,
    combine,
)
from .density import dyadic_descent, estimate_density, reference_density
from .report import CheckReport

__all__ = [
    "Cube",
    "OrientedFace",
    "Parallelepiped",
    "Region",
    "cubes_containing",
    "dyadic_children",
    "faces",
    "grid_partition",
    "make_cube",
    "PolyField",
    "VectorField",
    "Mapping",
    "affine_field",
    "complex_poly",
    "make_field",
    "make_mapping",
    "QuadratureSpec",
    "Circulation",
    "ComplexContour",
    "Dirac",
    "Flux",
    "ImageMeasure",
    "Integral",
    "IntervalFunction",
    "Line2D",
    "LinearCombination",
    "PushforwardIntegral",
    "SegmentLength",
    "check_additivity",
    "combine",
    "dyadic_descent",
    "estimate_density",
    "reference_density",
    "CheckReport",
]

__version__ = "0.1.0"
