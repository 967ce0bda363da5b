"""Exception types shared across the package.

Modules raise these instead of bare ValueError so callers (CLI, server)
can map failures onto exit codes and HTTP statuses without string
matching.
"""


class OttoError(Exception):
    """Base class for every error this package raises on purpose."""


class DegenerateInput(OttoError):
    """Geometry input too degenerate to build a track from."""


class InvalidWaypoint(OttoError):
    """Waypoint off the track, duplicate name, or bad kind/radius."""


class ShapeMismatch(OttoError):
    """Tensor or observation shape differs from the declared architecture."""


class BadMagic(OttoError):
    """Weight file does not start with the expected magic or is truncated."""


class VersionMismatch(OttoError):
    """Weight file version is not one this build understands."""


class NonFiniteLoss(OttoError):
    """A loss or gradient came out NaN/Inf; the update is aborted."""


class Cancelled(OttoError):
    """Training was cancelled between rollouts; partial progress is kept."""

    def __init__(self, message, episodes_completed=0):
        super().__init__(message)
        self.episodes_completed = episodes_completed


class ProgramError(OttoError):
    """A script failed static checks badly enough to refuse execution."""


class RuntimeFault(OttoError):
    """A library call failed at dispatch time (e.g. bad color literal)."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class TrackMismatch(OttoError):
    """Objective references waypoints the track does not have."""


class UnknownModel(OttoError):
    """Model id not present in the store."""


class UnknownTrack(OttoError):
    """Track id not present in the store."""


class UnknownEpisode(OttoError):
    """Episode id not present in the store."""


class ModelBusy(OttoError):
    """A second training job was requested for a model that has one running."""


class CorruptRecord(Warning):
    """A stored file failed to parse; listings skip it and warn."""
