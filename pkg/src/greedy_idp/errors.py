class ConfigurationError(ValueError):
    """Unsupported or inconsistent configuration."""


class AdmissibilityError(ValueError):
    """A state left the admissible set of its system."""


class WaveSpeedError(RuntimeError):
    """A wave-speed estimate violated one of its own preconditions.

    ``where`` carries whatever locates the failure (edge, constraint index).
    """

    def __init__(self, message, where=None):
        super().__init__(message if where is None else f"{message} at {where}")
        self.where = where


class NothingToUpdate(RuntimeError):
    """Every wave speed vanishes, the solution is constant in time."""
