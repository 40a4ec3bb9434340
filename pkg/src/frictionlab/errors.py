"""Exception and warning types shared across the package."""


class FrictionLabError(Exception):
    """Base class for all errors raised by this package."""


class MassNotNormalized(FrictionLabError):
    """A density or particle ensemble does not carry unit total mass."""


class TabulatedRangeExceeded(FrictionLabError):
    """Strict-range tabulated kernel evaluated outside its table."""


class DegenerateGrid(FrictionLabError):
    """Pair grid for the convexity-modulus estimate has no distinct pairs."""


class UnresolvedThermalWidth(FrictionLabError):
    """Requested thermal width is below the velocity-grid resolution."""


class MassLeakage(FrictionLabError):
    """Initial data places non-negligible mass near the phase-grid boundary."""


class CflViolation(FrictionLabError):
    """Time step violates the advective stability condition."""


class BoundaryMassLeak(FrictionLabError):
    """Mass near the truncated domain boundary exceeded its threshold."""


class RenormalizationDrift(FrictionLabError):
    """Positivity-clamp renormalization factor left its tolerance band."""


class QuantileFailure(FrictionLabError):
    """Quantile sampling requested from a degenerate distribution."""


class TooFewParticles(FrictionLabError):
    """Operation needs more particles than the ensemble provides."""


class StepTooLarge(FrictionLabError):
    """Particle time step violates its stability guard."""


class SupportTooLarge(FrictionLabError):
    """Exact discrete transport oracle guard on support size."""


class TooFewSamples(FrictionLabError):
    """Residual evaluation needs at least three equally spaced samples."""


class EmptyOverlap(FrictionLabError):
    """Grid density and particle ensemble have disjoint supports."""


class DenominatorNotPositive(FrictionLabError):
    """A bound's hypothesis fails: its denominator is not positive."""


class NonPositiveData(FrictionLabError):
    """Log-log rate fit received non-positive values."""


class HypothesisHViolated(FrictionLabError):
    """Confinement/interaction pair fails the convexity hypothesis."""


class IoFailure(FrictionLabError):
    """Filesystem output could not be written."""


class ParticleCollisionWarning(UserWarning):
    """Adjacent particles closer than the collision gap (shock indicator)."""
