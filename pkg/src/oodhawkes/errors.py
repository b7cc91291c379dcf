"""Exception hierarchy.

Domain errors (bad configuration, invalid data, failed estimation) derive from
:class:`OODError`; the CLI maps them to exit code 1.  I/O problems surface as
:class:`DataIOError`, which the CLI maps to exit code 2.
"""
from __future__ import annotations


class OODError(Exception):
    """Base class for domain errors."""


class TaxonomyError(OODError):
    pass


class ConfigError(OODError):
    pass


class SimulationError(OODError):
    pass


class EstimationError(OODError):
    pass


class TrainingError(OODError):
    pass


class DataIOError(OSError):
    """Read/write failure; the message always names the offending path."""
