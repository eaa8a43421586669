"""Exception hierarchy shared across the simulator."""


class RolesimError(Exception):
    """Base class for all simulator errors."""


class ScenarioError(RolesimError):
    """Invalid configuration or scenario input (CLI exit code 2)."""


class UnknownNodeReference(ScenarioError):
    pass


class NonPositiveBandwidth(ScenarioError):
    pass


class DisconnectedTopology(ScenarioError):
    pass


class TierMemoryInversion(ScenarioError):
    pass


class DuplicateLink(ScenarioError):
    pass


class InvalidSpec(ScenarioError):
    pass


class MissingStaticMap(ScenarioError):
    pass


class UnknownRole(ScenarioError):
    pass


class NoRoute(RolesimError):
    pass


class CycleDetected(RolesimError):
    pass


class NoFeasibleNode(RolesimError):
    pass


class LimitExceeded(RolesimError):
    pass


class NoData(RolesimError):
    pass
