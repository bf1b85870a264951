"""Numerical laboratory for mean oscillation of step functions over shape bases."""

from .config import TOL, Tolerances
from .grid import Domain, GeneratorSpec, GridFunction, generate, make_domain, parse_generator, unit_domain
from .oscillation import (
    NormReport,
    OscillationValue,
    bmo_norm,
    mean,
    median,
    osc2_fast,
    osc_double,
    osc_inf_const,
    osc_p,
)
from .shapes import BasisSpec, Shape, box, comparability_constants, enumerate_shapes, family, parse_basis, whole

__all__ = [
    "TOL", "Tolerances", "Domain", "GeneratorSpec", "GridFunction", "generate", "make_domain",
    "parse_generator", "unit_domain", "NormReport", "OscillationValue", "bmo_norm", "mean", "median",
    "osc2_fast", "osc_double", "osc_inf_const", "osc_p", "BasisSpec", "Shape", "box",
    "comparability_constants", "enumerate_shapes", "family", "parse_basis", "whole",
]
__version__ = "0.1.0"
