"""Geodesics and cut loci of cylinders of revolution dt^2 + m(t)^2 dtheta^2."""

from .cutlocus import CutKind, CutLocusDescription, classify, cut_point_on_cover, empty_on_cover
from .errors import RevcutError
from .geodesics import GeodesicTrace, integrate, jacobi_first_zero, return_point
from .oracle import build_fan, compare, empirical_cut_points, verify
from .profile import ProfileAnalysis, WarpingProfile, analyze, curvature, get_profile, xi
from .quadrature import build_phi_table, geodesic_length_l, phi, phi_upper_limit

__all__ = [
    "CutKind", "CutLocusDescription", "GeodesicTrace", "ProfileAnalysis", "RevcutError",
    "WarpingProfile", "analyze", "build_fan", "build_phi_table", "classify", "compare",
    "curvature", "cut_point_on_cover", "empirical_cut_points", "empty_on_cover",
    "geodesic_length_l", "get_profile", "integrate", "jacobi_first_zero", "phi",
    "phi_upper_limit", "return_point", "verify", "xi",
]

__version__ = "0.1.0"
