"""Exception types shared across the toolkit."""


class FoglaneError(Exception):
    pass


class ParameterError(FoglaneError, ValueError):
    """An argument is outside its documented domain."""


class ShapeError(FoglaneError, ValueError):
    """Two rasters that must agree in size do not."""


class ParseError(FoglaneError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IngestionError(FoglaneError):
    """A depth or image file could not be loaded as required."""


class EvaluationError(FoglaneError):
    pass
