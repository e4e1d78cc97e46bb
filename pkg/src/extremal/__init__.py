"""Extremal-distance toolkit: discrete conformal modulus, coverings,
distortion estimators, and quasihyperbolic diagnostics."""

__version__ = "0.1.0"

from . import geom, cover, modfam, distort, qhyp, sets

__all__ = ["geom", "cover", "modfam", "distort", "qhyp", "sets", "__version__"]
