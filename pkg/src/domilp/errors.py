"""Exception types shared across the package."""


class ContractError(ValueError):
    """An operation was called with arguments that violate its preconditions."""


class CapacityError(RuntimeError):
    """An enumeration would exceed the configured memory budget."""


class OverflowRiskError(ValueError):
    """Some constraint could overflow the 64-bit accumulator."""

    def __init__(self, constraint: int, bound: int, limit: int):
        self.constraint = constraint
        self.bound = bound
        self.limit = limit
        super().__init__(
            f"overflow risk in constraint {constraint}: magnitude bound {bound} "
            f"exceeds limit {limit}"
        )


class InstanceFormatError(ValueError):
    """An instance document could not be parsed or failed validation."""
