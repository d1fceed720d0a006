"""Error hierarchy shared by every hdglm module.

``ModelSpecError`` covers bad inputs and configuration (the CLI exits with
status 1), ``NumericalError`` covers failures of the numerics themselves
(status 2).
"""


class HdglmError(Exception):
    pass


class ModelSpecError(HdglmError):
    pass


class NumericalError(HdglmError):
    pass


class InvalidLinkParameter(ModelSpecError):
    pass


class NonMonotoneLink(ModelSpecError):
    pass


class DimensionMismatch(ModelSpecError):
    pass


class InvalidData(ModelSpecError):
    pass


class InvalidCovariance(ModelSpecError):
    pass


class MissingTruth(ModelSpecError):
    pass


class OutOfRange(ModelSpecError):
    pass


class InsufficientData(ModelSpecError):
    pass


class TooFewSamples(ModelSpecError):
    pass


class InvalidRate(NumericalError):
    pass


class BracketFailure(NumericalError):
    pass


class SingularHessian(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class NegativeVariance(NumericalError):
    pass


class DegenerateSignal(NumericalError):
    pass


class OddLink(NumericalError):
    pass


class NoBracket(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class NonPositiveMu(NumericalError):
    pass


class SingularInformation(NumericalError):
    pass
