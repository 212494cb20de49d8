"""Exception hierarchy.

Configuration-type problems derive from :class:`ConfigError` and numerical
breakdowns from :class:`NumericalError`; the CLI maps these to exit codes 2
and 3 respectively.
"""


class QTDGError(Exception):
    """Base class for all package errors."""


class ContractError(QTDGError, ValueError):
    """A documented precondition was violated by the caller."""


class ConfigError(QTDGError, ValueError):
    pass


class NumericalError(QTDGError, ArithmeticError):
    pass


# mesh
class ParseError(ConfigError):
    pass


class NonConformingMesh(ConfigError):
    pass


class DegenerateElement(NumericalError):
    pass


class MixedSignFacet(ConfigError):
    """beta . n changes sign along a single boundary facet."""


class UnassignedBoundary(ConfigError):
    pass


# problem
class UnknownProblem(ConfigError, KeyError):
    def __str__(self):  # KeyError would quote the message
        return Exception.__str__(self)


class OrderTooHigh(ContractError):
    """Derivative requested beyond the declared smoothness of a field."""


class HardFailure(NumericalError):
    """K_11 is non-positive at a barycentre; the recurrence cannot divide by it."""


class MissingExactSolution(ConfigError):
    pass


# basis
class SingularLeadingCoefficient(HardFailure):
    pass


class OracleOrderTooLow(OrderTooHigh):
    pass


# assembly / solve
class UnclassifiedFacet(ConfigError):
    pass


class QuadratureUnavailable(ConfigError):
    pass


class SingularMatrix(NumericalError):
    pass


class NonMonotoneH(ContractError):
    pass
