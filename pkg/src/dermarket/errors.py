"""Exception hierarchy shared across the package."""


class MarketModelError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(MarketModelError):
    """A model constant violates its invariant (e.g. q <= 0, empty box)."""


class StateOutsideBoxError(MarketModelError):
    """An operation that requires the energy state inside its box was called
    with an out-of-range state; the caller should apply the fallback policy."""


class StateInsideBoxError(MarketModelError):
    """The fallback policy was requested for a state that is inside the box;
    in-range states must be served through the market allocation."""


class MarketClearingError(MarketModelError):
    """The clearing price bracket could not be established or refined."""


class OracleConvergenceError(MarketModelError):
    """The projected-gradient reference solver hit its iteration cap."""


class ProjectionIdentityError(MarketModelError):
    """The two evaluation orders of the nested-projection identity disagreed,
    which signals a bug in the projection arithmetic."""


class GenerationError(MarketModelError):
    """A generated population violated a construction invariant."""


class ConfigError(MarketModelError):
    """A configuration document failed to parse or validate."""
