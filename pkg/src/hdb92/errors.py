"""Exception hierarchy shared by all modules."""


class HDB92Error(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(HDB92Error, ValueError):
    pass


class InvalidChannel(HDB92Error, ValueError):
    """Kraus operators that are not trace preserving."""


class InvalidState(HDB92Error, ValueError):
    """Density operator with a genuinely negative eigenvalue."""


class FormatError(HDB92Error, ValueError):
    """Input file could not be parsed."""


class InvalidStats(HDB92Error, ValueError):
    """Observed statistics violate a probability invariant."""


class InconsistentStats(HDB92Error, ValueError):
    """Statistics that no physical attack can produce (negative norms etc.)."""


class DegenerateStatistics(HDB92Error, ValueError):
    """Normalizer N is not positive: no key round can ever be conclusive."""


class NoSignChange(HDB92Error, ValueError):
    pass


class InsufficientSamples(HDB92Error, ValueError):
    """A test-round statistics cell received no trials."""
