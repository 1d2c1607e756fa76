"""Domain error hierarchy shared across the package.

Every error the library raises on bad input or a violated protocol rule
derives from :class:`CtiShareError`, so the CLI can map all of them to
exit code 1 while genuine bugs still surface as ordinary exceptions.
"""


class CtiShareError(Exception):
    """Base class for all domain errors."""


class ConfigError(CtiShareError):
    """Scenario or CLI configuration is malformed."""
