"""Exception hierarchy.

``DomainError`` subclasses signal that the inputs are well-formed but the
mathematics refuses them (washout, infeasible certificate, scheme blow-up).
The CLI maps them to exit status 1; ``ConfigError`` maps to exit status 2.
"""
from __future__ import annotations


class DomainError(Exception):
    """Valid input that the model or the analysis cannot handle."""


class WashoutError(DomainError):
    pass


class SchemeError(DomainError):
    pass


class TailError(DomainError):
    pass


class OutsideRegionError(DomainError):
    pass


class InconclusiveError(DomainError):
    pass


class BoundViolation(DomainError):
    pass


class CertificateError(DomainError):
    pass


class ConfigError(ValueError):
    """Malformed configuration: unknown keys, missing fields, bad types."""
