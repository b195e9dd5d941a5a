"""Numerical laboratory for the Aviles-Giga energy on convex planar domains."""

from .geometry import ConvexDomain, GeometryError, best_fit_ball, disk, ellipse, rounded_polygon, stadium
from .fields import FieldError, GridSpec, Raster, ScalarField, VectorField, rasterize
from .energy import EnergyReport, aviles_giga_energy
from .entropy import EntropyPair, identity_residual, rotated_gradient
from .competitor import CompetitorParams, build_competitor
from .minimize import MinimizeError, MinimizeOptions
from .verify import TheoremReport, exponent_sweep, verify_theorem

__version__ = "0.1.0"

__all__ = [
    "ConvexDomain", "GeometryError", "best_fit_ball", "disk", "ellipse", "rounded_polygon", "stadium",
    "FieldError", "GridSpec", "Raster", "ScalarField", "VectorField", "rasterize",
    "EnergyReport", "aviles_giga_energy",
    "EntropyPair", "identity_residual", "rotated_gradient",
    "CompetitorParams", "build_competitor",
    "MinimizeError", "MinimizeOptions",
    "TheoremReport", "exponent_sweep", "verify_theorem",
]
