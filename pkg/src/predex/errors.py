"""Exception hierarchy shared across the engine."""


class PredexError(Exception):
    """Base class for all engine errors."""


class ParseError(PredexError):
    """Malformed input file (CSV structure, cell that fails a hinted kind)."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class EmptyInputError(PredexError):
    """Input file contains no data rows."""


class SchemaError(PredexError):
    """Reference to a feature that does not exist, or an invalid role/kind."""


class ConfigError(PredexError):
    """Invalid configuration value (bin counts, roles, search settings)."""


class DataError(PredexError):
    """Data does not support the requested operation (too few rows, etc.)."""


class AlgebraError(PredexError):
    """Invalid predicate algebra (merge across features, shared-feature intersect)."""


class EvaluationError(PredexError):
    """Predicate references an unknown feature or an incompatible kind."""


class GrammarError(PredexError):
    """Predicate text does not conform to the grammar."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position

    def __str__(self):
        base = super().__str__()
        if self.position is not None:
            return f"{base} (at position {self.position})"
        return base


class ScoreImportError(PredexError):
    """Score side file/column is misaligned or contains non-finite values."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class InfluenceError(PredexError):
    """Influence undefined for the given selection (empty, or all rows)."""


class InsufficientDataError(PredexError):
    """A statistical comparison group is too small."""


class NumericalError(PredexError):
    """Quadrature failed to converge; carries the residual error estimate."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NoExplanationError(PredexError):
    """Search could not produce any candidate predicate."""


class UsageError(PredexError):
    """Operation called with arguments outside its contract (e.g. bad pivot)."""
