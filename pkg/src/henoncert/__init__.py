"""henoncert: certified Julia set approximation and hyperbolicity
certificates for compositions of generalized complex Henon maps."""

from .dyadic import Dyadic
from .intervals import (
    BoxC2,
    ComplexRect,
    RealInterval,
    euclid_norm_enclosure,
    norm_linf_enclosure,
    precision,
)
from .henon import HenonFactor, MonicPoly, PolyDiffeo, quadratic_henon
from .mapfile import InvalidMapFile, dump_map, load_map, map_hash

__version__ = "0.1.0"

__all__ = [
    "Dyadic",
    "RealInterval",
    "ComplexRect",
    "BoxC2",
    "norm_linf_enclosure",
    "euclid_norm_enclosure",
    "precision",
    "MonicPoly",
    "HenonFactor",
    "PolyDiffeo",
    "quadratic_henon",
    "load_map",
    "dump_map",
    "map_hash",
    "InvalidMapFile",
    "__version__",
]
