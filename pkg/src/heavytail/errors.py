"""Exception hierarchy shared by all modules."""


class HeavyTailError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(HeavyTailError, ValueError):
    """Invalid distribution or algorithm parameters."""


class DomainError(HeavyTailError, ValueError):
    """Input outside the mathematical domain of an operation."""


class ShapeError(HeavyTailError, ValueError):
    """Mismatched or unsupported array shapes."""


class ResolutionError(HeavyTailError, ValueError):
    """Empirical sample too small to resolve the requested quantile levels."""


class NoValidPairError(HeavyTailError, ValueError):
    """No (v, u) anti-concentration pair could be certified."""


class CapError(HeavyTailError, ValueError):
    """Problem size exceeds a hard enumeration cap."""


class BudgetError(HeavyTailError, ValueError):
    """Exhaustive construction would exceed the configured budget."""


class CoverageError(HeavyTailError, LookupError):
    """A query point is not covered by the supplied net."""


class IndeterminateError(HeavyTailError, ValueError):
    """A certified bracket straddles a decision boundary."""


class NumericalError(HeavyTailError, ArithmeticError):
    """A numerical routine failed or violated its accuracy contract."""


class InvariantViolation(HeavyTailError, AssertionError):
    """A guaranteed postcondition failed; indicates a bug, never bad input."""


class ConfigError(HeavyTailError, ValueError):
    """Malformed experiment or CLI configuration."""


class IllConditionedWarning(RuntimeWarning):
    """Numerically ill-determined result (returned anyway)."""
