class GraphscError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(GraphscError, ValueError):
    pass


class PreconditionError(GraphscError, ValueError):
    pass


class UnsupportedSizeError(GraphscError, ValueError):
    pass


class MeasureTimeout(GraphscError, RuntimeError):
    pass


class ProtocolError(GraphscError, RuntimeError):
    pass


class FormatError(GraphscError, ValueError):
    pass


class FitError(GraphscError, ValueError):
    pass


class GraphParseError(GraphscError, ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class EmptyInputError(GraphscError, ValueError):
    pass
