"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class GTMError(Exception):
    exit_code = 1


class ConfigError(GTMError, ValueError):
    """Bad parameters (m, lambda, level, band index, ...)."""

    exit_code = 4


class InvariantViolation(GTMError):
    """A checked postcondition failed (band count, oracle deviation, nesting)."""

    exit_code = 2


class BandCountError(InvariantViolation):
    pass


class PrecisionExhaustedError(GTMError):
    """Working precision was not enough, even after escalation."""

    exit_code = 3


class NotUnimodularError(GTMError, ValueError):
    exit_code = 2


class OracleCapExceeded(GTMError):
    """The literal word product was asked for a word longer than the cap."""

    exit_code = 4
