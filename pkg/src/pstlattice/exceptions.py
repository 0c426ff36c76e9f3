class LatticeError(ValueError):
    """Invalid lattice, geometry or model parameters."""


class NumericalError(ArithmeticError):
    """Base class for failures of a numerical routine."""


class EigensolverError(NumericalError):
    pass


class NonUnitaryError(NumericalError):
    pass


class RevivalError(NumericalError):
    """T(2 z_f) is not a multiple of the identity (the lattice is not PST)."""


class GapCollisionError(NumericalError):
    """A perturbed waveguide gap became unphysically small."""


class DataQualityError(NumericalError):
    """Monte Carlo estimate too noisy to be trusted."""
