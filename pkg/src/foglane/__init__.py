"""Fog synthesis and lane-benchmark tooling."""
from .errors import (EvaluationError, FoglaneError, IngestionError, ParameterError, ParseError,
                     ShapeError)

__version__ = "0.1.0"

__all__ = ["FoglaneError", "ParameterError", "ShapeError", "ParseError", "IngestionError",
           "EvaluationError", "__version__"]
