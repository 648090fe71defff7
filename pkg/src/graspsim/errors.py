"""Exception types shared across the simulator."""


class GraspSimError(Exception):
    """Base class for all simulator errors."""


class NonPositiveDepth(GraspSimError):
    """A camera-frame point or depth value has z <= 0 where z > 0 is required."""


class DepthZero(GraspSimError):
    """The depth at the selected pixel is 0 (invalid sensor reading)."""


class NoGrasp(GraspSimError):
    """No pixel in the grasp map clears the minimum quality threshold."""


class ParseError(GraspSimError):
    """A document is syntactically malformed."""


class ValidationError(GraspSimError):
    """A document parsed but violates a model invariant."""


class CameraBelowTable(GraspSimError):
    """The camera pose cannot see the table plane."""


class EmptyCrop(GraspSimError):
    """A bounding box contains no pixels."""


class OutOfReach(GraspSimError):
    """A target pose lies outside the arm's reach radius."""


class SamePose(GraspSimError):
    """Pick and place poses coincide."""


class ScriptError(GraspSimError):
    """A transcript script line is malformed."""


class ProtocolError(GraspSimError):
    """A wire message violates the framing or message schema."""


class BindError(GraspSimError):
    """The server address cannot be bound."""
