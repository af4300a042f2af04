"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class InvariantError(ValueError):
    """A data structure violates a named invariant (e.g. a transition row
    that does not sum to one)."""

    def __init__(self, invariant: str, message: str):
        super().__init__(f"[{invariant}] {message}")
        self.invariant = invariant


class ConfigError(ValueError):
    """A trainer or sweep configuration is inconsistent."""
