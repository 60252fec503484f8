"""Exception hierarchy shared across the package."""


class EnvDesignError(Exception):
    """Base class for all package errors."""


class ConfigError(EnvDesignError):
    """Invalid configuration: dimension mismatch, unknown key, bad value."""


class EvaluationError(EnvDesignError):
    """Exact policy evaluation is ill-posed (non-absorbing chain at gamma=1)."""


class MappingError(EnvDesignError):
    """A trajectory cannot be mapped through the dual bijection."""


class MazeError(EnvDesignError):
    """Base class for invalid maze edits."""


class OccupiedCellError(MazeError):
    """Wall placement on a cell that is already a wall."""


class ProtectedCellError(MazeError):
    """Wall placement on the start or end cell."""


class DisconnectingWallError(MazeError):
    """Wall placement that would cut every start-to-end path."""


class NoProperPolicyError(EnvDesignError):
    """The goal is unreachable, so no proper policy exists."""
