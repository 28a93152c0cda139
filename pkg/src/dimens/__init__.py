"""Dyadic-tree toolkit for the local structure of measures on [0,1)^d:
entropy averages, homogeneity, porosity, conical densities, and the
verification suites that exercise them on measures of known dimension."""

from .dyadic import (
    BallMassEstimate,
    DomainError,
    DyadicCube,
    DyadicMassTree,
    ZeroMassError,
    cube_of_point,
    refine,
)
from .generators import (
    DyadicBernoulli,
    KnownDimension,
    Lebesgue,
    MeasureSpec,
    PointMass,
    PorousCantor,
    Product,
    RandomCascade,
    SelfSimilarIFS,
    build,
    parse_measure_spec,
    spec_to_json,
    theoretical_dimension,
)

__version__ = "0.1.0"

__all__ = [
    "BallMassEstimate", "DomainError", "DyadicCube", "DyadicMassTree",
    "ZeroMassError", "cube_of_point", "refine",
    "DyadicBernoulli", "KnownDimension", "Lebesgue", "MeasureSpec",
    "PointMass", "PorousCantor", "Product", "RandomCascade",
    "SelfSimilarIFS", "build", "parse_measure_spec", "spec_to_json",
    "theoretical_dimension", "__version__",
]
