"""Exception types raised across the package."""


class ManifoldronError(Exception):
    """Base class for all package errors."""


class InputError(ManifoldronError, ValueError):
    """Malformed arguments: wrong shapes, dimension mismatches, bad ranges."""


class DegenerateError(ManifoldronError):
    """A geometric primitive is rank-deficient at the configured tolerance."""


class PredicateError(DegenerateError):
    """A Delaunay predicate was evaluated on a degenerate simplex."""


class NotEnoughPoints(ManifoldronError, ValueError):
    pass


class DegenerateCloud(ManifoldronError):
    """All points are affinely dependent even after perturbation."""


class EmptyManifold(ManifoldronError):
    """Trimming removed every simplex (or the complex was empty to begin with)."""


class ModelFormatError(ManifoldronError):
    """A serialized model could not be decoded."""


class DataError(ManifoldronError, ValueError):
    """A dataset file could not be parsed or is inconsistent."""
