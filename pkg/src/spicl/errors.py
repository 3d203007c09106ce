"""Exception types shared across the package."""


class ConfigError(Exception):
    """Invalid scenario configuration (bad key, malformed value, broken invariant)."""


class DivergenceError(RuntimeError):
    """Simulation state became non-finite.

    Carries the last finite time so callers can report where the run blew up.
    """

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class DelayLookupError(LookupError):
    """Requested a delayed sample outside the buffered time range."""


class RankDeficiencyError(RuntimeError):
    """Matrix treated as full row rank is numerically rank deficient."""
