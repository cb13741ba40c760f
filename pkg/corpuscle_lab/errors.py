from typing import Any


class CorpuscleError(Exception):
    """Base error carrying a detail payload and the CLI exit code."""

    exit_code: int = 1

    def __init__(self, detail: str | dict[str, Any], exit_code: int | None = None):
        super().__init__(detail if isinstance(detail, str) else detail.get("message", str(detail)))
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class ConfigError(CorpuscleError):
    """Malformed or inconsistent input (config files, schedules, polynomial documents)."""

    exit_code = 2


class NumericalError(CorpuscleError):
    """Runtime numerical failure of one of the physics modules."""

    exit_code = 3


class DomainError(NumericalError):
    """Evaluation requested outside the region where the inputs are defined."""


class AcceptanceError(CorpuscleError):
    """A selftest check failed."""

    exit_code = 4
