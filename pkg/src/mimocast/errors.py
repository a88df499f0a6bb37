"""Exception types shared across the package."""


class MimocastError(Exception):
    """Base class for all package-specific errors."""


class InvalidConfigError(MimocastError):
    """Raised when a configuration or fading profile violates an invariant.

    Carries the full list of violations so callers can report all problems
    at once instead of fixing them one by one.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid configuration: {lines}")


class ZfInfeasibleError(MimocastError):
    """Zero-forcing requires more antennas than served streams (N > G + U)."""


class DegenerateInputError(MimocastError):
    """An input combination outside a solver's domain (e.g. empty groups)."""
