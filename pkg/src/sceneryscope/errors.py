"""Exception hierarchy shared across the package."""


class SceneryScopeError(Exception):
    """Base class for every error raised by this package."""


class InvalidIncrementLaw(SceneryScopeError):
    """Step distribution fails one or more admissibility conditions.

    ``violations`` lists every failed condition as a short code
    ("not_normalized", "asymmetric", "periodic"), even when only the
    first one is raised.
    """

    def __init__(self, message: str, violations: tuple[str, ...] = ()):
        super().__init__(message)
        self.violations = tuple(violations)


class NotNormalized(InvalidIncrementLaw):
    """Probabilities are negative or do not sum to one."""


class Asymmetric(InvalidIncrementLaw):
    """q(z) != q(-z) for some offset z."""


class Periodic(InvalidIncrementLaw):
    """gcd of return times exceeds one."""


class EmptyScenery(SceneryScopeError):
    """No deviating site, so the support window is undefined."""


class AlphabetMismatch(SceneryScopeError):
    """Two values defined over different alphabets were combined."""


class NotCentered(SceneryScopeError):
    """Test function has a nonzero mean under the reference law."""


class InsufficientObservations(SceneryScopeError):
    """Observation stream too short for the requested estimator."""


class HorizonTooSmall(SceneryScopeError):
    """No complete averaging block fits inside the horizon."""


class NoSignal(SceneryScopeError):
    """Width detection found no statistic above threshold."""


class RankNotReached(SceneryScopeError):
    """Row cap hit before the moment matrix reached full column rank."""


class DimensionMismatch(SceneryScopeError):
    """Vector or tensor shape incompatible with the moment matrix."""


class DegenerateEndpoint(SceneryScopeError):
    """Endpoint product of site means vanishes for this test function."""


class NegativeDiscriminant(SceneryScopeError):
    """Sum/product pair inconsistent beyond the noise tolerance."""


class OddWidth(SceneryScopeError):
    """Center-site recovery requested for an odd support width."""


class AmbiguousPairing(SceneryScopeError):
    """Both pairing orientations match the cross-product value."""


class NoSeparatingFunction(SceneryScopeError):
    """Function family exhausted without separating the two endpoints."""


class InconsistentProfiles(SceneryScopeError):
    """No joint extension is consistent with the combined-function profile."""


class ConfigError(SceneryScopeError):
    """Run configuration failed validation."""
