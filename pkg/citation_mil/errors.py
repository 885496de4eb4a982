"""Exceptions raised by the toolkit. The CLI maps every MilError to exit code 1."""


class MilError(Exception):
    """Base class for all toolkit errors."""


class IngestionError(MilError):
    """A data file could not be parsed."""

    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class DataIntegrityError(MilError):
    """Parsed data is internally inconsistent (e.g. mixed class flags in one bag)."""


class ContractError(MilError):
    """A precondition of an operation was violated."""


class ConfigError(MilError):
    """Invalid configuration, artifact, or command-line request."""
