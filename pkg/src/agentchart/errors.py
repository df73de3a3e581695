"""Exception hierarchy shared across the package."""


class AgentChartError(Exception):
    """Base class for all package errors."""


class ChartError(AgentChartError):
    """Structural problem found while building or running a statechart."""


class DuplicateId(ChartError):
    pass


class DanglingReference(ChartError):
    pass


class MalformedComposite(ChartError):
    pass


class IllegalJoin(ChartError):
    pass


class LivelockDetected(ChartError):
    """The internal event queue exceeded its bound during a macrostep."""


class UnknownDevice(AgentChartError):
    pass


class BehaviorNotConfigured(AgentChartError):
    """Agent has no enabled input or no enabled output."""


class NonFiniteInput(AgentChartError):
    pass


class NonFiniteVariable(AgentChartError):
    pass


class UnknownChannel(AgentChartError):
    pass


class UnknownVariable(AgentChartError):
    pass


class MissingContextWeight(AgentChartError):
    pass


class InvalidParams(AgentChartError):
    pass


class ConfigError(AgentChartError):
    """Scenario configuration file could not be parsed."""


class UnknownKey(ConfigError):
    pass


class RangeError(AgentChartError):
    """A configuration value is outside its permitted range."""
