"""Exception hierarchy. Argument problems raise plain ``ValueError``."""


class ReverbaugError(Exception):
    """Base class for runtime failures inside the pipeline."""


class GeometryError(ReverbaugError):
    pass


class PlacementError(ReverbaugError):
    """Sampling could not place a source/receiver pair in a room."""

    def __init__(self, message, room_index=None):
        super().__init__(message)
        self.room_index = room_index


class InfeasibleAbsorptionError(ReverbaugError):
    """The requested RT60 needs absorption the room cannot have."""

    def __init__(self, message, min_rt60=None):
        super().__init__(message)
        self.min_rt60 = min_rt60


class CapabilityError(ReverbaugError):
    """A model was asked to simulate a room kind it does not support."""


class ConfigurationError(ReverbaugError):
    pass


class InsufficientDecayError(ReverbaugError):
    pass


class TrainingError(ReverbaugError):
    pass


class EvaluationError(ReverbaugError):
    pass
