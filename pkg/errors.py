from typing import Optional


class GendaugError(Exception):
    """Base class for every error raised by this package."""


class ContractViolation(GendaugError, ValueError):
    """An argument or precondition of a public operation does not hold."""


class DatasetError(GendaugError):
    """A dataset could not be built, mixed, saved or loaded."""


class DivergenceError(GendaugError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message if step is None else f"{message} (at step {step})")
        self.step = step


class ProvenanceError(GendaugError):
    """Generated and real data were mixed where they must stay apart."""


class ConfigError(GendaugError):
    """A run description could not be parsed or validated."""


class StoreError(GendaugError):
    """The sweep result store could not be opened, read or written."""
