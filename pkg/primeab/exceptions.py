"""Exception Management."""

from __future__ import annotations

from typing import Any


class ToolkitError(Exception):
    """Base error of the toolkit."""

    kind = "Toolkit"

    def __init__(self, message: str | None) -> None:
        """Init."""
        self.message = message
        super().__init__(message)

    def __str__(self) -> str:
        """Return msg."""
        return f"{self.kind}Exception : {self.message}"


class ParameterError(ToolkitError):
    """Precondition or usage violation."""

    kind = "Parameter"


class DomainError(ToolkitError):
    """Argument outside the range an evaluator covers."""

    kind = "Domain"


class IntegrandDomainError(DomainError):
    """A sampled point fell outside the domain of the integrand."""

    kind = "IntegrandDomain"

    def __init__(self, message: str | None, sample: Any = None) -> None:
        """Init."""
        self.sample = sample
        super().__init__(message)


class ResourceError(ToolkitError):
    """Requested table or range exceeds the resource guards."""

    kind = "Resource"


class ComplexityGuardError(ToolkitError):
    """Too many coordinates for partition enumeration."""

    kind = "ComplexityGuard"


class UndeterminedError(ToolkitError):
    """Sampling could not decide a classification."""

    kind = "Undetermined"


class UnsupportedStructureError(ToolkitError):
    """Decomposition uses role-reversals where they cannot be combined."""

    kind = "UnsupportedStructure"


class ReproductionFailureError(ToolkitError):
    """A computed quantity missed its published bound."""

    kind = "ReproductionFailure"

    def __init__(self, message: str | None, components: dict[str, float]) -> None:
        """Init."""
        self.components = components
        super().__init__(message)


class SearchExhaustedError(ToolkitError):
    """Representation search ran out of budget."""

    kind = "SearchExhausted"

    def __init__(self, message: str | None, n: int, bound: int) -> None:
        """Init."""
        self.n = n
        self.bound = bound
        super().__init__(message)
