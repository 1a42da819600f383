"""Discontinuous bisymmetric weighted quasi-sums, built exactly at finite depth."""

from .coeffs import QuadIrr, compare_combinations, enclose, refine
from .genset import (
    GeneratorFamily,
    HElem,
    HEnumeration,
    enumerate_h,
    gaps,
    make_family,
    value_enclosure,
)
from .weights import Regime, Weights

__version__ = "0.1.0"

__all__ = [
    "QuadIrr", "compare_combinations", "enclose", "refine",
    "GeneratorFamily", "HElem", "HEnumeration", "enumerate_h", "gaps", "make_family",
    "value_enclosure", "Regime", "Weights",
]
