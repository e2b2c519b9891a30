"""Exception hierarchy for gridwave.

Every error raised on purpose by the library derives from
:class:`GridwaveError`. Validation errors also derive from ``ValueError``
so callers that only care about bad input can keep catching the builtin.
"""

from __future__ import annotations

import difflib
from typing import Any, Iterable


class GridwaveError(Exception):
    """Base class for all gridwave errors."""


class ConfigError(GridwaveError, ValueError):
    """A configuration mapping or file could not be turned into a config."""


class GridSpecError(GridwaveError, ValueError):
    """A grid spec, generator kind or command name is invalid.

    Attributes:
        name: The offending name, when the error is about an unknown name.
        suggestions: Close matches among the known names.
    """

    def __init__(self, message: str, name: str | None = None,
                 suggestions: list[str] | None = None) -> None:
        self.name = name
        self.suggestions = suggestions or []
        if self.suggestions:
            message = f"{message} (did you mean: {', '.join(self.suggestions)}?)"
        super().__init__(message)

    @classmethod
    def unknown(cls, what: str, name: str, known: Iterable[str]) -> "GridSpecError":
        """Build the error for an unknown *name* with suggestions from *known*."""
        known = sorted(known)
        close = difflib.get_close_matches(name, known, n=3, cutoff=0.5)
        return cls(
            f"Unknown {what} '{name}'; known: {', '.join(known)}",
            name=name,
            suggestions=close,
        )


class DisconnectedGridError(GridwaveError, ValueError):
    """The surviving subgraph of a window is not connected.

    Attributes:
        n_components: Number of connected components found.
    """

    def __init__(self, n_components: int) -> None:
        self.n_components = n_components
        super().__init__(
            f"Surviving graph has {n_components} connected components; "
            "a defected grid must be connected"
        )


class WindowTooSmallError(GridwaveError, ValueError):
    """The materialized window cannot hold the requested object."""


class FieldError(GridwaveError, ValueError):
    """A field is inconsistent or outside an operation's domain."""


class UnreachableOriginError(GridwaveError):
    """A path origin cannot reach the window border.

    Attributes:
        vertex: The origin that could not be routed.
    """

    def __init__(self, vertex: tuple[int, int]) -> None:
        self.vertex = vertex
        super().__init__(f"Origin {vertex} cannot reach the window border")


class IvpBlowUpError(GridwaveError):
    """The Cauchy problem solution left the bounded regime.

    Attributes:
        x: Abscissa where the blow-up threshold was crossed.
        value: Solution value at that point.
    """

    def __init__(self, x: float, value: float) -> None:
        self.x = x
        self.value = value
        super().__init__(f"Solution blew up at x={x:.6g} (|u|={abs(value):.3g})")


class BudgetExhaustedError(GridwaveError):
    """A bounded search ended without finding what it was asked for.

    Attributes:
        result: Partial evidence gathered before the budget ran out.
    """

    def __init__(self, message: str, result: Any = None) -> None:
        self.result = result
        super().__init__(message)
