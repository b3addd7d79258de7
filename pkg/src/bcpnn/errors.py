class ContractViolation(ValueError):
    """An operation was called with arguments that break its preconditions."""


class ConfigError(ValueError):
    """A parameter set is internally inconsistent or out of range."""


class IdxParseError(ValueError):
    """An IDX file could not be parsed; ``field`` names the offending part."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
