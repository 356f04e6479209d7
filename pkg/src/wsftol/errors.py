"""Exception hierarchy.

Each family carries the CLI exit code it maps to.
"""


class WsfError(Exception):
    exit_code = 1


class InputError(WsfError, ValueError):
    exit_code = 2


class DisconnectedGraph(InputError):
    pass


class NonpositiveConductance(InputError):
    pass


class SelfLoop(InputError):
    pass


class DuplicateEdge(InputError):
    pass


class InvalidParameter(InputError):
    pass


class MissingTailRule(InputError):
    pass


class NotAFlow(InputError):
    pass


class CoordinateMismatch(InputError):
    pass


class RecurrentProfile(WsfError):
    exit_code = 3


class RecurrentTail(RecurrentProfile):
    pass


class SamplerError(WsfError, RuntimeError):
    exit_code = 4


class UnsupportedDepth(SamplerError):
    pass


class ZeroSurvival(SamplerError):
    pass


class RejectionBudgetExceeded(SamplerError):
    pass


class InsufficientData(SamplerError):
    pass


class NumericalDegeneracy(SamplerError):
    pass


class DegenerateConditioning(WsfError):
    exit_code = 5


class EnumerationTooLarge(WsfError):
    exit_code = 6
