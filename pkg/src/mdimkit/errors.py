"""Exception types shared across the package."""


class MdimError(Exception):
    """Base class for library errors."""


class ConfigError(MdimError, ValueError):
    """Invalid system, measure, ladder or experiment configuration."""


class BudgetExceeded(MdimError):
    """An enumeration or exact search would exceed its size budget."""


class PrecisionRefusal(MdimError):
    """A shift-space comparison cannot be certified under the truncation bound."""


class ConvergenceWarning(UserWarning):
    """An iterative solver stopped at max_iter before meeting its tolerance."""
