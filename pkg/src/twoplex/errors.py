"""Exception types shared across the package."""

from __future__ import annotations

__all__ = [
    "TwoplexError",
    "InvalidInput",
    "LoopContraction",
    "NotBigon",
    "LinkConnected",
    "DisconnectedLink",
    "Not2Connected",
    "NotCutVertex",
    "NotABranch",
    "NotTwoSeparator",
    "LinkNot2Connected",
    "AdjacencyNotForced",
    "DegreeTooLow",
    "NotReversible",
    "NotParaCycle",
    "PreconditionViolated",
    "OutOfImplementedRange",
    "BudgetExceeded",
    "VerificationFailed",
    "PipelineError",
    "ParseError",
]


class TwoplexError(Exception):
    """Base class for all package errors."""


class InvalidInput(TwoplexError):
    """The input complex is not valid (and not repairable by the validator)."""


class LoopContraction(TwoplexError):
    """Attempted to contract a loop edge."""


class NotBigon(TwoplexError):
    """The face is not a size-2 face on two distinct parallel edges."""


class LinkConnected(TwoplexError):
    """Vertex split requested at a vertex whose link is connected."""


class DisconnectedLink(TwoplexError):
    """An operation that needs a connected link met a disconnected one."""

    def __init__(self, vertex, message=""):
        self.vertex = vertex
        super().__init__(message or f"link at vertex {vertex} is disconnected")


class Not2Connected(TwoplexError):
    """The graph is not 2-connected."""


class NotCutVertex(TwoplexError):
    """The named node is not a cut vertex of the graph."""


class NotABranch(TwoplexError):
    """The given node set is not a branch of the link at the given node."""


class NotTwoSeparator(TwoplexError):
    """The given node pair does not separate the link."""


class LinkNot2Connected(TwoplexError):
    """A stretching operation requires a 2-connected link."""


class AdjacencyNotForced(TwoplexError):
    """The two faces are not adjacent at the edge in every planar rotation."""


class DegreeTooLow(TwoplexError):
    """Edge stretching needs face-degree at least four."""


class NotReversible(TwoplexError):
    """The edge is not reversible (contraction would not be invertible)."""


class NotParaCycle(TwoplexError):
    """The given cycle is not a para-cycle (some vertex link is not parallel)."""


class PreconditionViolated(TwoplexError):
    """A normal-form precondition (local structure) does not hold."""


class OutOfImplementedRange(TwoplexError):
    """The instance falls outside the implemented decision fragment."""


class BudgetExceeded(TwoplexError):
    """A configured resource limit was hit before the computation finished."""


class VerificationFailed(TwoplexError):
    """An independently checked result failed its verification gate."""


class PipelineError(TwoplexError):
    """An internal invariant of the decision pipeline was violated.

    This always indicates a bug (or an input outside the proven theory), never
    a property of the input complex; the pipeline refuses to guess.
    """


class ParseError(TwoplexError):
    """A complex document could not be parsed."""

    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")
