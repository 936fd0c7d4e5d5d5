"""Numerical dynamics of a quadratic family on complex projective space.

The package constructs and samples the trapped attractor of the family, the
balanced measure of the induced base map and its pushforward onto the
attractor, and provides estimators (entropy, Lyapunov spectra, mixing
correlations, periodic-point distributions) plus executable checkers for the
computational lemmas that pin the attractor's structure down.
"""

__version__ = "0.1.0"

from .cloud import Cloud
from .history import CylinderSet, Prehistory
from .maps import (
    BaseMap,
    ChartJacobian,
    FiberQuadratic,
    Params,
    PerturbedMap,
    diagonal_fixed_point,
    diagonal_preimage_point,
    fiber_fixed_point,
)
from .projective import ChartCoords, ProjPoint, fs_distance, normalize, point
from .trapping import default_params, default_rho, in_trap

__all__ = [
    "__version__",
    "BaseMap",
    "ChartCoords",
    "ChartJacobian",
    "Cloud",
    "CylinderSet",
    "FiberQuadratic",
    "Params",
    "PerturbedMap",
    "Prehistory",
    "ProjPoint",
    "default_params",
    "default_rho",
    "diagonal_fixed_point",
    "diagonal_preimage_point",
    "fiber_fixed_point",
    "fs_distance",
    "in_trap",
    "normalize",
    "point",
]
