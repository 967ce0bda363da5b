"""Grading episodes against the school-run objective.

The end-to-end cases drive the bus route in programmed mode with three
scripts: the full solution, an empty program, and the solution minus
the unload call. Boundary behavior of the evidence finders is pinned
with small synthetic episodes.
"""

import json
import math

import pytest

from ottodrive.dsl import parse
from ottodrive.engine import (
    CenterlinePilot,
    Episode,
    SimParams,
    StepRecord,
    VehicleState,
    run_episode,
)
from ottodrive.errors import TrackMismatch
from ottodrive.interp import ScriptRuntime, effects_from_dict, effects_to_dict
from ottodrive.objective import (
    REQUIREMENT_KINDS,
    bus_route_objective,
    evaluate_objective,
    load_objective,
)
from ottodrive.track import bus_route_track

from pathlib import Path

DATA = Path(__file__).parent / "data"
REFERENCE_WPS = (
    Path(__file__).parent / "goldens" / "dsl" / "c_clean_reference.wps"
)


def drive_bus(source):
    track = bus_route_track()
    prog, diags = parse(source)
    assert not [d for d in diags if d.severity == "error"]
    runtime = ScriptRuntime(prog)
    episode = run_episode(
        CenterlinePilot(), track, seed=0, mode="programmed", script=runtime
    )
    return episode, runtime, track


def synthetic_episode(rewards, speeds=None, events=None, outcome="completed"):
    n = len(rewards)
    speeds = speeds if speeds is not None else [3.0] * n
    events = events if events is not None else [()] * n
    steps = [
        StepRecord(
            t=t,
            state=VehicleState(position=(0.0, 0.0), heading=0.0, speed=speeds[t]),
            action=0,
            reward=rewards[t],
            new_tiles=(),
            events=tuple(events[t]),
        )
        for t in range(n)
    ]
    return Episode(
        id="syn", track_id="bus-route", seed=0, steps=steps,
        total_reward=math.fsum(rewards), outcome=outcome,
        endpoint=(0.0, 0.0),
    )


class TestEndToEnd:
    def test_reference_script_passes_all_seven(self):
        episode, runtime, track = drive_bus(REFERENCE_WPS.read_text())
        report = evaluate_objective(
            episode, runtime, bus_route_objective(), track
        )
        detail = {r.id: (r.passed, r.detail) for r in report.results}
        assert report.passed, detail
        assert report.passed_count == report.total == 7
        assert runtime.effects.passengers == 0
        assert runtime.effects.color == "yellow"

    def test_reference_evidence_steps_are_seekable(self):
        episode, runtime, track = drive_bus(REFERENCE_WPS.read_text())
        report = evaluate_objective(
            episode, runtime, bus_route_objective(), track
        )
        last_t = episode.steps[-1].t
        for r in report.results:
            assert r.step is not None
            assert 0 <= r.step <= last_t
        by_id = {r.id: r.step for r in report.results}
        # stops appear in route order, school after the pickups
        assert by_id["pickup_stop1"] < by_id["pickup_stop2"]
        assert by_id["pickup_stop2"] < by_id["pickup_stop3"]
        assert by_id["pickup_stop3"] < by_id["dropoff_stop"]
        assert by_id["outcome"] == last_t

    def test_empty_script_fails_most_requirements(self):
        episode, runtime, track = drive_bus((DATA / "bus_empty.wps").read_text())
        report = evaluate_objective(
            episode, runtime, bus_route_objective(), track
        )
        failed = {r.id for r in report.results if not r.passed}
        assert len(failed) >= 5
        assert "start_color" in failed
        assert {"pickup_stop1", "pickup_stop2", "pickup_stop3"} <= failed
        assert "dropoff_unload" in failed
        # the pilot still finishes the route on its own
        by_id = {r.id: r for r in report.results}
        assert by_id["outcome"].passed

    def test_missing_unload_fails_exactly_that_requirement(self):
        episode, runtime, track = drive_bus(
            (DATA / "bus_no_unload.wps").read_text()
        )
        report = evaluate_objective(
            episode, runtime, bus_route_objective(), track
        )
        failed = [r for r in report.results if not r.passed]
        assert [r.id for r in failed] == ["dropoff_unload"]
        assert "no unloadAllPassengers" in failed[0].detail
        assert "3 left aboard" in failed[0].detail

    def test_effects_survive_serialization_for_grading(self):
        episode, runtime, track = drive_bus(REFERENCE_WPS.read_text())
        report_live = evaluate_objective(
            episode, runtime, bus_route_objective(), track
        )
        blob = json.dumps(effects_to_dict(runtime))
        restored = effects_from_dict(json.loads(blob))
        report_stored = evaluate_objective(
            episode, restored, bus_route_objective(), track
        )
        assert report_stored.to_dict() == report_live.to_dict()


class TestTrackMismatch:
    def test_objective_rejects_wrong_track(self):
        ep = synthetic_episode([0.0] * 3)
        ep.track_id = "straight"
        with pytest.raises(TrackMismatch):
            evaluate_objective(ep, None, bus_route_objective(), None)

    def test_track_argument_must_match_episode(self):
        ep = synthetic_episode([0.0] * 3)
        obj = {"name": "x", "requirements": []}
        with pytest.raises(TrackMismatch):
            evaluate_objective(ep, None, obj, _other_track())


def _other_track():
    from ottodrive.track import build_track

    pts = [(float(x), 0.0) for x in range(0, 50, 2)]
    return build_track("Other", pts, width=8.0, closed=False, track_id="other")


class TestPauseEvidence:
    def test_twenty_zero_rewards_satisfy_two_seconds(self):
        rewards = [-0.1] * 5 + [0.0] * 20 + [-0.1] * 5
        obj = {
            "name": "pause-only",
            "requirements": [{
                "id": "d", "kind": "dropoff_stop", "waypoint": "school",
                "pauseSeconds": 2.0, "maxStopDelay": 10,
            }],
        }
        ep = synthetic_episode(
            rewards, speeds=[0.0] * 30, events=[("school",)] + [()] * 29
        )
        report = evaluate_objective(ep, _fx_with_flash("school"), obj, None)
        assert report.results[0].passed
        assert report.results[0].step == 5

    def test_nineteen_zero_rewards_are_not_enough(self):
        rewards = [-0.1] * 5 + [0.0] * 19 + [-0.1] * 6
        speeds = [0.0] * 30
        ep = synthetic_episode(
            rewards, speeds=speeds, events=[("school",)] + [()] * 29
        )
        obj = {
            "name": "pause-only",
            "requirements": [{
                "id": "d", "kind": "dropoff_stop", "waypoint": "school",
                "pauseSeconds": 2.0, "maxStopDelay": 10,
            }],
        }
        report = evaluate_objective(ep, _fx_with_flash("school"), obj, None)
        assert not report.results[0].passed
        assert "pause" in report.results[0].detail

    def test_broken_run_does_not_count(self):
        rewards = [0.0] * 10 + [-0.1] + [0.0] * 10 + [-0.1] * 9
        speeds = [0.0] * 30
        ep = synthetic_episode(
            rewards, speeds=speeds, events=[("school",)] + [()] * 29
        )
        obj = {
            "name": "pause-only",
            "requirements": [{
                "id": "d", "kind": "dropoff_stop", "waypoint": "school",
                "pauseSeconds": 2.0, "maxStopDelay": 10,
            }],
        }
        report = evaluate_objective(ep, _fx_with_flash("school"), obj, None)
        assert not report.results[0].passed


def _fx_with_flash(event):
    return effects_from_dict({
        "final": {"color": "white", "passengers": 0,
                  "hornBeeps": 0, "lightFlashes": 3},
        "log": [
            {"t": 0, "event": event, "function": "flashLights",
             "args": [3], "passengers": 0, "color": "white"},
            {"t": 0, "event": event, "function": "unloadAllPassengers",
             "args": [], "passengers": 0, "color": "white"},
        ],
    })


class TestStopEvidence:
    def make_pickup_objective(self, delay=10):
        return {
            "name": "stop-only",
            "requirements": [{
                "id": "p", "kind": "pickup", "waypoint": "stop1",
                "maxStopDelay": delay,
            }],
        }

    def make_fx(self):
        return effects_from_dict({
            "final": {"color": "white", "passengers": 1,
                      "hornBeeps": 0, "lightFlashes": 3},
            "log": [
                {"t": 2, "event": "stop1", "function": "flashLights",
                 "args": [3], "passengers": 0, "color": "white"},
                {"t": 2, "event": "stop1", "function": "loadPassenger",
                 "args": [], "passengers": 1, "color": "white"},
            ],
        })

    def test_stop_on_last_allowed_step_passes(self):
        speeds = [3.0] * 12 + [0.05] + [3.0] * 7
        ep = synthetic_episode(
            [-0.1] * 20, speeds=speeds, events=[()] * 2 + [("stop1",)] + [()] * 17
        )
        report = evaluate_objective(ep, self.make_fx(), self.make_pickup_objective(), None)
        assert report.results[0].passed

    def test_stop_one_step_late_fails(self):
        speeds = [3.0] * 13 + [0.05] + [3.0] * 6
        ep = synthetic_episode(
            [-0.1] * 20, speeds=speeds, events=[()] * 2 + [("stop1",)] + [()] * 17
        )
        report = evaluate_objective(ep, self.make_fx(), self.make_pickup_objective(), None)
        assert not report.results[0].passed
        assert "no stop within 10 steps" in report.results[0].detail

    def test_never_triggered_waypoint_reports_it(self):
        ep = synthetic_episode([-0.1] * 5)
        report = evaluate_objective(ep, self.make_fx(), self.make_pickup_objective(), None)
        res = report.results[0]
        assert not res.passed
        assert res.step is None
        assert "never triggered" in res.detail


class TestObjectiveShape:
    def test_stock_objective_has_seven_requirements(self):
        obj = bus_route_objective()
        assert obj["track"] == "bus-route"
        assert len(obj["requirements"]) == 7
        assert [r["kind"] for r in obj["requirements"]] == [
            "start_color", "pickup", "pickup", "pickup",
            "dropoff_stop", "dropoff_unload", "outcome",
        ]
        for r in obj["requirements"]:
            assert r["kind"] in REQUIREMENT_KINDS

    def test_report_dict_shape(self):
        ep = synthetic_episode([-0.1] * 3, outcome="timeout")
        obj = {
            "name": "tiny",
            "requirements": [
                {"id": "o", "kind": "outcome", "outcome": "completed"}
            ],
        }
        d = evaluate_objective(ep, None, obj, None).to_dict()
        assert d == {
            "name": "tiny",
            "passed": False,
            "passedCount": 0,
            "total": 1,
            "requirements": [{
                "id": "o", "kind": "outcome", "passed": False,
                "step": 2, "detail": "outcome timeout, wanted completed",
            }],
        }

    def test_load_objective_validates(self, tmp_path):
        good = tmp_path / "good.json"
        good.write_text(json.dumps(bus_route_objective()))
        assert load_objective(good)["name"] == "school-run"

        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"name": "x"}))
        with pytest.raises(ValueError):
            load_objective(bad)

        unknown = tmp_path / "unknown.json"
        unknown.write_text(json.dumps(
            {"requirements": [{"id": "a", "kind": "teleport"}]}
        ))
        with pytest.raises(ValueError):
            load_objective(unknown)

    def test_no_effects_episode_grades_against_empty_log(self):
        ep = synthetic_episode([-0.1] * 3)
        report = evaluate_objective(
            ep, None, bus_route_objective(), None
        )
        by_id = {r.id: r for r in report.results}
        assert not by_id["start_color"].passed
        assert "no effect state" in by_id["dropoff_unload"].detail
