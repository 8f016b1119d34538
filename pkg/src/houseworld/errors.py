"""Exception hierarchy shared across the package."""


class HouseworldError(Exception):
    """Base class for all package errors."""


class SpecInfeasible(HouseworldError):
    """Scene spec cannot be satisfied by the object catalog."""


class ParseError(HouseworldError):
    """Malformed scene/task/corpus file; carries field diagnostics."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line


class InvariantViolation(HouseworldError):
    """A structural invariant failed; `name` identifies which one."""

    def __init__(self, name, message=""):
        super().__init__(message or name)
        self.name = name


class UnknownObject(HouseworldError):
    pass


class NoValidBinding(HouseworldError):
    pass


class ExternalUnavailable(HouseworldError):
    pass


class Unreachable(HouseworldError):
    pass


class InfeasibleGoal(HouseworldError):
    pass


class PlanExecutionFailed(HouseworldError):
    pass


class ZeroPredicted(HouseworldError):
    pass


class SceneMismatch(HouseworldError):
    pass


class IncompatiblePosition(HouseworldError):
    pass


class NoDivergenceFound(HouseworldError):
    pass


class UncorrectableState(HouseworldError):
    pass


class GrammarViolation(HouseworldError):
    pass


class ProtocolViolation(HouseworldError):
    pass


class AgentTimeout(HouseworldError):
    pass


class EndpointUnavailable(HouseworldError):
    pass


class AuthFailure(HouseworldError):
    pass
