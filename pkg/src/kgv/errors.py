"""Exception types shared across the package."""


class KgvError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(KgvError):
    """A document does not conform to its schema.

    ``location`` is a human-readable anchor: a JSON field path such as
    ``entities[2].category`` or a line reference such as ``line 7``.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class ReferentialIntegrityError(KgvError):
    """A relation references an entity that is not in the graph."""


class InvalidEntity(KgvError):
    pass


class DuplicateEntity(KgvError):
    pass


class UnknownEntity(KgvError):
    pass


class DuplicateRelation(KgvError):
    pass


class PredicateKindConflict(KgvError):
    pass


class GraphFrozen(KgvError):
    """Mutation attempted on a builder after build() completed."""


class EmptyGraph(KgvError):
    """Fuzzy matching requested against a graph with no entities."""


class ServiceUnavailable(KgvError):
    """An external service could not be reached or returned a server error."""


class ProtocolError(KgvError):
    """An external service replied with a malformed payload."""


class EmptyGeneration(KgvError):
    """A generation service returned a blank reply."""


class FixtureMiss(KgvError):
    """A replay client was asked for a request absent from its fixture."""


class DimensionMismatch(KgvError):
    """An embedding service returned vectors of inconsistent length."""


class ZeroDenominator(KgvError):
    """A metric was requested with a zero denominator."""


class CountOverflow(KgvError):
    """Metric counts violate their precondition (e.g. NME + NHC > NTE)."""


class MissingGold(KgvError):
    """Gold annotations were required but absent."""


class BadRatios(KgvError):
    """Split ratios do not sum to 1."""
