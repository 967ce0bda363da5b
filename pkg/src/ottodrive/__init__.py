"""Self-driving toy cars: track geometry, a small RL stack, a waypoint
scripting language, and a training server."""

from .engine import (
    Action,
    Episode,
    SimEnv,
    SimParams,
    VehicleState,
    episode_from_jsonl,
    episode_to_jsonl,
    run_episode,
)
from .errors import OttoError
from .net import NetConfig, PolicyModel, PolicyNet
from .store import Store
from .track import (
    Track,
    Waypoint,
    build_track,
    builtin_rapid_tracks,
    bus_route_track,
    project,
    smooth_polyline,
)
from .trainer import TrainHyper, train

__version__ = "0.1.0"

__all__ = [
    "Action",
    "Episode",
    "NetConfig",
    "OttoError",
    "PolicyModel",
    "PolicyNet",
    "SimEnv",
    "SimParams",
    "Store",
    "Track",
    "TrainHyper",
    "VehicleState",
    "Waypoint",
    "build_track",
    "builtin_rapid_tracks",
    "bus_route_track",
    "episode_from_jsonl",
    "episode_to_jsonl",
    "project",
    "run_episode",
    "smooth_polyline",
    "train",
    "__version__",
]
