"""
Exceptions raised by the flooding protocol library, simulator and harness
"""


class OutOfRange(ValueError):
    """
    An argument or parameter value is not within its valid range.
    """


class DegenerateGeometry(ValueError):
    """
    The two header locations coincide, so no forward direction is defined.
    The source case must use hexagon vertices instead.
    """


class ScenarioError(Exception):
    """
    The scenario cannot be simulated, e.g. it places fewer than two nodes.
    """


class SimulationError(Exception):
    """
    The event loop reached an inconsistent state. This is a simulator bug.
    """


class ConfigError(ValueError):
    """
    A scenario configuration file holds an unknown key or a malformed value.
    """


class UnknownPreset(KeyError):
    """
    The requested experiment preset does not exist.
    """

    def __init__(self, name: str, known: list[str]):
        self.name = name
        self.known = known
        super().__init__(f"Unknown preset {name!r}. Known presets: {', '.join(known)}")

    def __str__(self):
        return self.args[0]


class ExperimentIOError(OSError):
    """
    Writing experiment results failed after retries.
    """
