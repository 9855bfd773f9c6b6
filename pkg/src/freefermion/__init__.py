"""Generic free fermions on a ring: exact independence certificates and spectral statistics."""
from .certify import HarmonicSet, certify, paper_counterexample, subset_resonance_scan
from .cyclotomic import IntPoly, cyclotomic, divisors, totient
from .model import ModelParams, dispersion, hopping_matrix, many_body_spectrum

__version__ = "0.1.0"

__all__ = [
    "HarmonicSet",
    "IntPoly",
    "ModelParams",
    "certify",
    "cyclotomic",
    "dispersion",
    "divisors",
    "hopping_matrix",
    "many_body_spectrum",
    "paper_counterexample",
    "subset_resonance_scan",
    "totient",
]
