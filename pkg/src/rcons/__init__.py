"""Recoverable consensus toolkit: type hierarchy checks, a crash-recovery runtime and its algorithms."""

__version__ = "0.1.0"
