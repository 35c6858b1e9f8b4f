"""Exception types shared across the package."""


class SpotSchedError(Exception):
    """Base class for package-specific errors."""


class ConfigError(SpotSchedError):
    """A configuration value or file is invalid."""


class DagCycleError(ConfigError):
    """The workflow edge relation contains a cycle.

    ``edge`` names one (src, dst) edge that closes the cycle.
    """

    def __init__(self, edge):
        self.edge = edge
        super().__init__(f"cycle detected through edge {edge[0]!r} -> {edge[1]!r}")


class DagReferenceError(ConfigError):
    """An edge endpoint or task reference does not resolve."""


class InvalidActionError(SpotSchedError):
    """A scheduling action targeted a dead or unfit node."""


class NoFeasibleActionError(SpotSchedError):
    """Every action is masked out; there is nothing valid to select."""


class LayoutMismatchError(ConfigError):
    """A checkpoint was trained against a different cluster layout."""
