"""Exception types shared across the package."""


class TamplearnError(Exception):
    """Base class for package-specific errors."""


class UnboundVariable(TamplearnError):
    """A substitution was applied to an atom containing an unmapped variable."""


class MalformedAction(TamplearnError):
    """An action's arguments do not match its controller's signature."""


class UnknownPredicate(TamplearnError):
    """An operator or goal references a predicate the domain does not declare."""


class GenerationFailed(TamplearnError):
    """Rejection sampling could not produce a valid problem within the attempt bound."""


class OracleFailure(TamplearnError):
    """The hand-written operators could not solve a training problem."""


class DivisionByZeroData(TamplearnError):
    """Effect probabilities cannot be estimated: the preconditions never hold in the data."""


class SearchExhausted(TamplearnError):
    """The symbolic search ran out of node budget before exhausting the space."""


class FileFormatError(TamplearnError):
    """A serialized artifact (dataset, operators, config, problem) failed to parse."""
