"""Expected maximum deviation of empirical means in high dimension: bounds, exact values, simulation."""

from .binomial import BinomialSpec
from .constants import DEFAULT_CONSTANTS, ConcentrationConstants
from .errors import DevboundError, DivergenceError, RepresentabilityError, ResourceError, ValidationError
from .sequences import BlockView, ProbSeq, build

__all__ = [
    "BinomialSpec",
    "BlockView",
    "ConcentrationConstants",
    "DEFAULT_CONSTANTS",
    "DevboundError",
    "DivergenceError",
    "ProbSeq",
    "RepresentabilityError",
    "ResourceError",
    "ValidationError",
    "build",
]
