"""Exception hierarchy shared by all modules."""


class ObstregError(Exception):
    """Base class for package errors."""


class NonFinite(ObstregError, ArithmeticError):
    pass


class DegenerateBox(ObstregError, ValueError):
    pass


class DegeneratePair(ObstregError, ValueError):
    pass


class EmptyGrid(ObstregError, ValueError):
    pass


class InfeasibleSpec(ObstregError, ValueError):
    pass


class QuadratureUnderflow(ObstregError, ArithmeticError):
    """Truncated tail of a log-substituted integral is too large relative to its value."""


class NoSuchM(ObstregError, ValueError):
    pass


class SolverFailed(ObstregError, RuntimeError):
    pass


class ParseError(ObstregError, ValueError):
    """Expression or scenario syntax error, with 1-based line/column when known."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        elif column is not None:
            where = f" (column {column})"
        super().__init__(message + where)


class ValidationError(ObstregError, ValueError):
    """A scenario field is missing or out of range; ``field`` names it."""

    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or f"invalid or missing field: {field}")
