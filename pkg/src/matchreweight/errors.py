"""Exception types shared across the package."""


class MatchReweightError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(MatchReweightError):
    """Array shapes are inconsistent with each other."""


class InvalidMarginal(MatchReweightError):
    """A marginal has negative mass or does not sum to one."""


class NonSquare(MatchReweightError):
    """A square cost matrix was required."""


class TooLarge(MatchReweightError):
    """Instance exceeds the exhaustive-enumeration limit."""


class DegenerateInput(MatchReweightError):
    """Too few samples for the requested number of components."""


class EmptyInput(MatchReweightError):
    """An empty array where at least one element is required."""


class EmptyCluster(MatchReweightError):
    """A cluster index with no assigned points."""


class MissingClass(MatchReweightError):
    """A class label with no samples in the labeled set."""


class ZeroSourceClass(MatchReweightError):
    """A source class proportion of zero makes importance weights undefined."""


class ShapeMismatch(MatchReweightError):
    """Gradient buffers do not mirror the parameters they update."""


class NonFiniteLoss(MatchReweightError):
    """Training produced a NaN or infinite loss."""


class EmptyTestSet(MatchReweightError):
    """Evaluation requires at least one labeled sample."""


class InvalidProportions(MatchReweightError):
    """A proportion vector is not a valid simplex vector."""
