"""
Error types shared by the simulator packages.
"""

from typing import List, Optional, Sequence


class SimulationError(Exception):
    """Base class for all simulator errors."""


class ContractViolation(SimulationError, ValueError):
    """A caller broke the precondition of a public operation."""


class InsufficientDataError(SimulationError):
    """A statistic was requested from a window without samples."""


class ConfigError(SimulationError):
    """Configuration could not be parsed or validated."""

    def __init__(self, message: str, diagnostics: Optional[Sequence[str]] = None):
        self.diagnostics: List[str] = list(diagnostics or [])
        detail = "; ".join(self.diagnostics)
        super().__init__(f"{message}: {detail}" if detail else message)


class InvariantViolation(SimulationError):
    """The simulation reached a state that must be impossible."""

    def __init__(self, message: str, trace_tail: Optional[Sequence[str]] = None):
        self.trace_tail: List[str] = list(trace_tail or [])
        super().__init__(message)


class OutputError(SimulationError):
    """Results cannot be written to the requested location."""
