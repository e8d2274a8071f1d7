"""Exception hierarchy for safegain.

Two mixin bases drive the CLI exit-code mapping: problems with inputs or
model files (exit code 2) versus infeasibility or numerical breakdown
discovered while solving (exit code 3).
"""


class SafegainError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(SafegainError):
    """Bad arguments, malformed files, or violated model assumptions."""


class SolverFailure(SafegainError):
    """Infeasibility or numerical breakdown encountered at run time."""


# --- matrix kernels ---------------------------------------------------------

class NonSquare(InvalidInput):
    pass


class AsymmetricInput(InvalidInput):
    pass


class DimensionMismatch(InvalidInput):
    pass


class NonPositiveParameter(InvalidInput):
    pass


class NumericalFailure(SolverFailure):
    pass


class UnstableF(SolverFailure):
    """Discrete Lyapunov solve attempted with a non-contractive transition."""


class Overflow(SolverFailure):
    """Matrix exponential produced non-finite entries."""


class NonConvergence(SolverFailure):
    """Iteration exhausted its budget before meeting tolerance."""


# --- system model -----------------------------------------------------------

class NonPositiveDt(InvalidInput):
    pass


class UnstableClosedLoop(SolverFailure):
    """Frequency-domain norm requested for a loop with spectral radius >= 1."""


class StateOverflow(SolverFailure):
    """Simulated state norm exceeded the overflow guard."""


# --- gain synthesis ---------------------------------------------------------

class GammaInfeasible(SolverFailure):
    """The attenuation level cannot be certified for the given gain."""


class UnstableGain(SolverFailure):
    """A Riccati solve was attempted for a destabilizing gain."""


class SingularInnerMatrix(SolverFailure):
    """The inner matrix of the gain update is not positive definite."""


class InfeasibleInit(SolverFailure):
    """The supplied initial gain is not admissible for the requested level."""


class CertificateFailure(SolverFailure):
    """A computed strong-stability certificate failed its own checks."""


# --- online loop ------------------------------------------------------------

class CostBoundViolation(SolverFailure):
    """A revealed cost pair violates the declared floor or trace cap."""


class InsufficientTrace(InvalidInput):
    """Not enough recorded steps to evaluate the requested quantity."""


class HorizonBelowBurnIn(SolverFailure):
    """Bound requested for a horizon shorter than the burn-in time."""


# --- adversary --------------------------------------------------------------

class DosRequiresIdentityD(InvalidInput):
    """Input-cancelling attacks are only defined when D is the identity."""


class InadmissibleBase(InvalidInput):
    """Base cost matrices leave no slack for the configured perturbation."""


# --- model files ------------------------------------------------------------

class ParseError(InvalidInput):
    pass


class SchemaError(InvalidInput):
    pass


class AssumptionViolation(InvalidInput):
    """Model matrices violate a structural assumption (e.g. cross terms)."""


class UnstabilizableModel(InvalidInput):
    """No stabilizing gain could be certified for the model."""
