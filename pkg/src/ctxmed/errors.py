"""Exception hierarchy shared by every layer of the package."""
from __future__ import annotations


class CtxMedError(Exception):
    """Base class for all package errors."""


class ParseError(CtxMedError):
    """A descriptor, knowledge-base or scenario document is malformed."""


class AnnotationError(ParseError):
    """A part's ``context`` attribute does not follow the annotation grammar."""


class NotFound(CtxMedError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class ConsistencyError(CtxMedError):
    """The knowledge base violates one of its invariants."""


class OntologyError(CtxMedError):
    """Resolution of an annotation against the knowledge base failed."""


class UnknownConcept(OntologyError):
    pass


class UnknownTerm(OntologyError):
    pass


class IncompleteContext(OntologyError):
    pass


class ConceptMismatch(CtxMedError):
    pass


class MissingRate(CtxMedError):
    pass


class ConflictingAnnotations(OntologyError):
    pass


class ConceptNotCovered(OntologyError):
    pass


class CommunityError(CtxMedError):
    pass


class EmptyCommunity(CommunityError):
    pass


class NoBidders(CommunityError):
    pass


class NoSupportAvailable(CommunityError):
    pass


class NotRecovered(CommunityError):
    pass


class InvalidWeights(CommunityError, ValueError):
    pass


class OutOfRange(CtxMedError, ValueError):
    pass


class UnboundStep(CtxMedError):
    pass


class ScenarioError(CtxMedError):
    """Execution could not recover from a failure (no community, bidders or support)."""


class NoCommunity(CommunityError):
    pass


class ServiceFailure(CtxMedError):
    """A simulated service refused an invocation."""
