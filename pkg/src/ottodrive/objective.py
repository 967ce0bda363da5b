"""Declarative pass/fail grading of a finished episode plus its script
effects.

An objective is a named list of requirements. Each requirement kind
knows how to find its evidence in the step records and the effect log;
results carry the step index of the evidence (or None) so a UI can
jump a replay to the right moment.

The stock bus-route objective encodes the field-trip story: turn
yellow at start, stop/flash/load at three pickup stops, make a timed
flashing stop at the school, leave empty, and finish the route.
"""

import json
import math
from dataclasses import dataclass

from .engine import SimParams
from .errors import TrackMismatch

STOP_SPEED = 0.1  # below this the vehicle counts as stopped

REQUIREMENT_KINDS = ("start_color", "pickup", "dropoff_stop", "dropoff_unload", "outcome")


@dataclass(frozen=True)
class RequirementResult:
    id: str
    kind: str
    passed: bool
    step: int | None  # evidence step for replay seeking
    detail: str


@dataclass
class ObjectiveReport:
    name: str
    results: list

    @property
    def passed_count(self):
        return sum(1 for r in self.results if r.passed)

    @property
    def total(self):
        return len(self.results)

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "passedCount": self.passed_count,
            "total": self.total,
            "requirements": [
                {
                    "id": r.id,
                    "kind": r.kind,
                    "passed": r.passed,
                    "step": r.step,
                    "detail": r.detail,
                }
                for r in self.results
            ],
        }


def bus_route_objective():
    """The stock seven-requirement school-run objective."""
    return {
        "name": "school-run",
        "track": "bus-route",
        "requirements": [
            {"id": "start_color", "kind": "start_color", "color": "yellow"},
            {"id": "pickup_stop1", "kind": "pickup", "waypoint": "stop1", "maxStopDelay": 10},
            {"id": "pickup_stop2", "kind": "pickup", "waypoint": "stop2", "maxStopDelay": 10},
            {"id": "pickup_stop3", "kind": "pickup", "waypoint": "stop3", "maxStopDelay": 10},
            {
                "id": "dropoff_stop", "kind": "dropoff_stop", "waypoint": "school",
                "pauseSeconds": 2.0, "maxStopDelay": 10,
            },
            {"id": "dropoff_unload", "kind": "dropoff_unload", "waypoint": "school"},
            {"id": "outcome", "kind": "outcome", "outcome": "completed"},
        ],
    }


def load_objective(path):
    with open(path, "r", encoding="utf-8") as f:
        obj = json.load(f)
    if "requirements" not in obj or not isinstance(obj["requirements"], list):
        raise ValueError("objective file needs a 'requirements' list")
    for req in obj["requirements"]:
        if req.get("kind") not in REQUIREMENT_KINDS:
            raise ValueError(f"unknown requirement kind {req.get('kind')!r}")
    return obj


def _trigger_step(episode, waypoint):
    for rec in episode.steps:
        if waypoint in rec.events:
            return rec.t
    return None


def _stopped_step(episode, t_from, max_delay):
    # step records are dense, so rec.t equals the list index
    for rec in episode.steps[t_from:t_from + max_delay + 1]:
        if rec.state.speed < STOP_SPEED:
            return rec.t
    return None


def _calls_in_event(log, event, function):
    return [r for r in log if r.event == event and r.function == function]


def _pause_run(episode, t_from, needed):
    """First step of a run of >= needed consecutive exactly-zero rewards
    at or after t_from, else None. Paused steps score exactly 0.0."""
    run = 0
    start = None
    for rec in episode.steps[t_from:]:
        if rec.reward == 0.0:
            if run == 0:
                start = rec.t
            run += 1
            if run >= needed:
                return start
        else:
            run = 0
            start = None
    return None


def _steps_for_pause(seconds, dt):
    return int(math.ceil(seconds / dt - 1e-9))


def evaluate_objective(episode, effects, objective, track, params=None):
    """Grade one episode; returns an ObjectiveReport.

    effects may be a ScriptRuntime, an EffectReport, or None (episodes
    run without a script grade against an empty effect log).
    """
    params = params if params is not None else SimParams()
    expected_track = objective.get("track")
    if expected_track is not None and episode.track_id != expected_track:
        raise TrackMismatch(
            f"episode ran on {episode.track_id!r} but objective targets {expected_track!r}"
        )
    if track is not None and episode.track_id != track.id:
        raise TrackMismatch(
            f"episode ran on {episode.track_id!r}, not {track.id!r}"
        )
    log = [] if effects is None else list(effects.log)
    final_fx = None if effects is None else effects.effects

    results = []
    for req in objective["requirements"]:
        kind = req["kind"]
        if kind == "start_color":
            calls = [
                r for r in _calls_in_event(log, "start", "setColor")
                if r.args and r.args[0] == req["color"]
            ]
            ok = bool(calls)
            results.append(RequirementResult(
                req["id"], kind, ok,
                calls[0].t if ok else None,
                f"setColor(\"{req['color']}\") during start" if ok
                else f"no setColor(\"{req['color']}\") during start",
            ))
        elif kind == "pickup":
            wp = req["waypoint"]
            delay = int(req.get("maxStopDelay", 10))
            t_trig = _trigger_step(episode, wp)
            if t_trig is None:
                results.append(RequirementResult(
                    req["id"], kind, False, None, f"waypoint {wp!r} never triggered"))
                continue
            t_stop = _stopped_step(episode, t_trig, delay)
            flashed = bool(_calls_in_event(log, wp, "flashLights"))
            loaded = bool(_calls_in_event(log, wp, "loadPassenger"))
            ok = t_stop is not None and flashed and loaded
            missing = []
            if t_stop is None:
                missing.append(f"no stop within {delay} steps")
            if not flashed:
                missing.append("no flashLights")
            if not loaded:
                missing.append("no loadPassenger")
            results.append(RequirementResult(
                req["id"], kind, ok, t_trig,
                f"picked up at {wp!r}" if ok else f"{wp!r}: " + ", ".join(missing),
            ))
        elif kind == "dropoff_stop":
            wp = req["waypoint"]
            delay = int(req.get("maxStopDelay", 10))
            seconds = float(req.get("pauseSeconds", 2.0))
            needed = _steps_for_pause(seconds, params.dt)
            t_trig = _trigger_step(episode, wp)
            if t_trig is None:
                results.append(RequirementResult(
                    req["id"], kind, False, None, f"waypoint {wp!r} never triggered"))
                continue
            t_stop = _stopped_step(episode, t_trig, delay)
            flashed = bool(_calls_in_event(log, wp, "flashLights"))
            t_pause = _pause_run(episode, t_trig, needed)
            ok = t_stop is not None and flashed and t_pause is not None
            missing = []
            if t_stop is None:
                missing.append(f"no stop within {delay} steps")
            if not flashed:
                missing.append("no flashLights")
            if t_pause is None:
                missing.append(f"no {seconds}s pause ({needed} steps)")
            results.append(RequirementResult(
                req["id"], kind, ok, t_pause if ok else t_trig,
                f"timed stop at {wp!r}" if ok else f"{wp!r}: " + ", ".join(missing),
            ))
        elif kind == "dropoff_unload":
            wp = req["waypoint"]
            unloads = _calls_in_event(log, wp, "unloadAllPassengers")
            empty = final_fx is not None and final_fx.passengers == 0
            ok = bool(unloads) and empty
            missing = []
            if not unloads:
                missing.append(f"no unloadAllPassengers at {wp!r}")
            if not empty:
                left = "no effect state" if final_fx is None else f"{final_fx.passengers} left aboard"
                missing.append(left)
            results.append(RequirementResult(
                req["id"], kind, ok,
                unloads[0].t if unloads else None,
                f"unloaded at {wp!r}" if ok else ", ".join(missing),
            ))
        elif kind == "outcome":
            want = req["outcome"]
            ok = episode.outcome == want
            results.append(RequirementResult(
                req["id"], kind, ok,
                episode.steps[-1].t if episode.steps else None,
                f"outcome {episode.outcome}" if ok
                else f"outcome {episode.outcome}, wanted {want}",
            ))
        else:
            raise ValueError(f"unknown requirement kind {kind!r}")
    return ObjectiveReport(name=objective.get("name", "objective"), results=results)
