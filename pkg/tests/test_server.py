"""Service endpoints, the recorded protocol transcript, and the HTTP/SSE
transport.

The transcript in goldens/protocol/session.json is a scripted session
replayed against a fresh service: every request in order with its exact
status and JSON payload, including the full event backlog of a finished
training job. Everything in it is deterministic: injected clock, pinned
numpy backend, fixed seeds. Regenerate with
OTTODRIVE_RECORD_GOLDENS=1 after an intentional protocol change.

Timing-dependent behavior (busy models, live streams, cancellation,
restart recovery) is asserted structurally instead.
"""

import http.client
import json
import os
import threading
import time
from pathlib import Path

import pytest

from ottodrive import accel
from ottodrive.server import TrainingService, make_server
from ottodrive.store import Store
from ottodrive.trainer import TrainHyper

GOLDEN = Path(__file__).parent / "goldens" / "protocol" / "session.json"
REFERENCE_WPS = (
    Path(__file__).parent / "goldens" / "dsl" / "c_clean_reference.wps"
)

SMALL_HYPER = TrainHyper(horizon=64, minibatch=32)


def fixed_clock():
    return "2026-01-02T03:04:05Z"


def make_service(tmp_path, subdir="srv"):
    return TrainingService(
        Store(tmp_path / subdir, clock=fixed_clock), hyper=SMALL_HYPER
    )


@pytest.fixture
def service(tmp_path):
    return make_service(tmp_path)


@pytest.fixture
def numpy_backend():
    previous = accel.active_backend()
    accel.set_backend("numpy")
    yield
    accel.set_backend(previous)


TRACK_SPEC = {
    "name": "Proto Strip",
    "width": 8,
    "closed": False,
    "tileCount": 8,
    "centerline": [[float(x), 0.0] for x in range(0, 48, 4)],
    "waypoints": [],
}

WARN_ONLY_SOURCE = 'at "stop1" { beepHorn() }'
BAD_SOURCE = "on start { honk() }"


def scripted_session(svc):
    """Run the scripted exchange list; returns [(endpoint, body, status,
    payload)] with payloads canonicalized through JSON."""
    reference = REFERENCE_WPS.read_text()
    plan = [
        ("create_model", {"name": "pilot"}),
        ("create_model", {"name": "   "}),
        ("create_model", {}),
        ("get_model", {"id": "m1"}),
        ("get_model", {"id": "m9"}),
        ("list_models", {}),
        ("create_track", {"track": TRACK_SPEC}),
        ("create_track", {"track": {"name": "Dot", "width": 6,
                                    "centerline": [[0, 0], [0, 0], [0, 0]]}}),
        ("create_track", {"track": {"name": "NoWidth",
                                    "centerline": [[0, 0], [10, 0]]}}),
        ("get_track", {"id": "t1"}),
        ("get_track", {"id": "zzz"}),
        ("list_tracks", {}),
        ("run_test", {"model": "m1", "track": "t1", "seed": 5}),
        ("run_test", {"model": "m1", "track": "t1", "seed": 5,
                      "program_source": BAD_SOURCE}),
        ("run_test", {"model": "m1", "track": "bus-route", "seed": 6,
                      "program_source": reference}),
        ("run_test", {"model": "m1", "track": "bus-route", "seed": 6,
                      "program_source": WARN_ONLY_SOURCE}),
        ("get_episode", {"id": "m1:t1:1"}),
        ("get_episode", {"id": "m1:t1:9"}),
        ("get_episode", {"id": "bogus"}),
        ("get_overlay", {"model": "m1", "track": "t1"}),
        ("get_reward_curve", {"model": "m1", "track": "t1"}),
        ("start_training", {"model": "m1", "track": "t1", "episodes": 0}),
        ("start_training", {"model": "m1", "track": "t1",
                            "episodes": 2, "seed": 1}),
    ]
    out = []
    for endpoint, body in plan:
        status, payload = svc.handle(endpoint, body)
        out.append((endpoint, body, status, payload))
        if endpoint == "start_training" and status == 200:
            svc.wait_for_job(payload["job"], timeout=120)

    backlog, live = svc.subscribe("j1")
    assert live is None, "finished job must replay from backlog only"
    out.append(("__backlog", {"job": "j1"}, 200, {"events": backlog}))

    for endpoint, body in [
        ("cancel_training", {"job": "j1"}),
        ("cancel_training", {"job": "j9"}),
        ("get_reward_curve", {"model": "m1", "track": "t1"}),
        ("frobnicate", {}),
    ]:
        status, payload = svc.handle(endpoint, body)
        out.append((endpoint, body, status, payload))

    # busy refusal and cancellation of a live job; the quota is far too
    # large to finish, so the states seen here never race
    status, payload = svc.handle(
        "start_training", {"model": "m1", "track": "t1",
                           "episodes": 200, "seed": 9},
    )
    out.append(("start_training",
                {"model": "m1", "track": "t1", "episodes": 200, "seed": 9},
                status, payload))
    status, payload = svc.handle(
        "start_training", {"model": "m1", "track": "t1", "episodes": 1},
    )
    out.append(("start_training",
                {"model": "m1", "track": "t1", "episodes": 1},
                status, payload))
    deadline = time.monotonic() + 60
    while svc.jobs["j2"]["state"] != "running":
        assert time.monotonic() < deadline
        time.sleep(0.005)
    status, payload = svc.handle("cancel_training", {"job": "j2"})
    out.append(("cancel_training", {"job": "j2"}, status, payload))
    svc.wait_for_job("j2", timeout=120)
    out.append(("__job_state", {"job": "j2"}, 200,
                {"state": svc.jobs["j2"]["state"]}))
    return out


def canonical(rows):
    return json.dumps(
        [
            {"endpoint": e, "body": b, "status": s, "response": p}
            for e, b, s, p in rows
        ],
        sort_keys=True, indent=1,
    )


class TestProtocolTranscript:
    def test_recorded_session_replays_exactly(self, tmp_path, numpy_backend):
        rows = scripted_session(make_service(tmp_path))
        text = canonical(rows)
        if os.environ.get("OTTODRIVE_RECORD_GOLDENS") == "1":
            GOLDEN.parent.mkdir(parents=True, exist_ok=True)
            GOLDEN.write_text(text + "\n")
            pytest.skip("recorded new protocol golden")
        assert GOLDEN.exists(), "protocol golden missing; record it first"
        assert text + "\n" == GOLDEN.read_text()

    def test_transcript_invariants(self):
        rows = json.loads(GOLDEN.read_text())
        by_endpoint = {}
        for row in rows:
            by_endpoint.setdefault(row["endpoint"], []).append(row)

        assert [r["status"] for r in by_endpoint["create_model"]] == [200, 422, 422]
        assert by_endpoint["create_model"][0]["response"]["modelId"] == "m1"
        assert by_endpoint["get_model"][1]["status"] == 404
        assert by_endpoint["get_model"][1]["response"]["error"]["code"] == "UnknownId"

        track_rows = by_endpoint["create_track"]
        assert [r["status"] for r in track_rows] == [200, 422, 422]
        assert track_rows[0]["response"]["track"]["id"] == "t1"
        assert track_rows[0]["response"]["track"]["tileCount"] == 8

        bad_run = by_endpoint["run_test"][1]
        assert bad_run["status"] == 422
        diags = bad_run["response"]["error"]["diagnostics"]
        assert diags[0]["code"] == "E101"

        warn_run = by_endpoint["run_test"][3]
        assert warn_run["status"] == 200
        assert {d["code"] for d in warn_run["response"]["diagnostics"]} == {"W201"}

        scripted = by_endpoint["run_test"][2]
        assert scripted["status"] == 200
        assert scripted["response"]["episodeId"] == "m1:bus-route:1"
        assert "diagnostics" not in scripted["response"]

        replay = by_endpoint["get_episode"][0]["response"]["episode"]
        assert replay["episodeId"] == "m1:t1:1"
        assert len(replay["steps"]) == replay["steps"][-1]["t"] + 1
        assert replay["effects"] is None
        assert by_endpoint["get_episode"][1]["status"] == 404
        assert by_endpoint["get_episode"][2]["status"] == 404

        start_rows = by_endpoint["start_training"]
        assert [r["status"] for r in start_rows] == [422, 200, 200, 409]
        assert start_rows[1]["response"] == {"v": 1, "job": "j1"}
        assert start_rows[2]["response"] == {"v": 1, "job": "j2"}
        busy = start_rows[3]["response"]["error"]
        assert busy["code"] == "ModelBusy"
        assert "j2" in busy["message"]

        events = by_endpoint["__backlog"][0]["response"]["events"]
        kinds = [e["event"] for e in events]
        assert kinds == (
            ["job_started"] + ["episode_completed"] * 2 + ["job_done"]
        )
        assert [e["ordinal"] for e in events[1:3]] == [1, 2]
        assert events[-1]["episodesCompleted"] == 2
        for e in events:
            assert e["v"] == 1 and e["job"] == "j1"

        cancel_rows = by_endpoint["cancel_training"]
        assert cancel_rows[0]["response"] == {"v": 1, "job": "j1", "state": "done"}
        assert cancel_rows[1]["status"] == 404
        assert cancel_rows[2]["response"] == {"v": 1, "job": "j2", "state": "running"}
        assert by_endpoint["__job_state"][0]["response"]["state"] == "cancelled"

        curves = by_endpoint["get_reward_curve"]
        assert len(curves[0]["response"]["points"]) == 1
        assert len(curves[1]["response"]["points"]) == 3  # run_test + 2 trained
        assert by_endpoint["frobnicate"][0]["status"] == 404


class TestServiceFlows:
    def wait_until(self, predicate, timeout=30.0):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if predicate():
                return
            time.sleep(0.01)
        raise AssertionError("condition not reached in time")

    def start_long_job(self, svc, model_id="m1", episodes=400):
        status, payload = svc.handle("create_model", {"name": "busy"})
        assert status == 200
        status, payload = svc.handle(
            "start_training",
            {"model": model_id, "track": "rapid-wide-left", "episodes": episodes},
        )
        assert status == 200
        job = payload["job"]
        self.wait_until(lambda: svc.jobs[job]["state"] == "running")
        return job

    def test_model_busy_and_cancel(self, service):
        job = self.start_long_job(service)
        status, payload = service.handle(
            "start_training",
            {"model": "m1", "track": "rapid-wide-left", "episodes": 1},
        )
        assert status == 409
        assert payload["error"]["code"] == "ModelBusy"

        status, payload = service.handle("cancel_training", {"job": job})
        assert status == 200
        service.wait_for_job(job, timeout=60)
        events = service.jobs[job]["events"]
        assert events[-1]["event"] == "job_cancelled"
        assert service.jobs[job]["state"] == "cancelled"
        done = events[-1]["episodesCompleted"]
        assert 0 <= done < 400
        assert service.jobs[job]["episodesDone"] == done
        # a cancelled model accepts new work
        status, _ = service.handle(
            "start_training",
            {"model": "m1", "track": "rapid-wide-left", "episodes": 1},
        )
        assert status == 200
        service.wait_for_job("j2", timeout=120)

    def test_run_test_allowed_during_training(self, service):
        job = self.start_long_job(service)
        try:
            status, payload = service.handle(
                "run_test", {"model": "m1", "track": "rapid-wide-left", "seed": 9}
            )
            assert status == 200
            model_id, track_id, n = service.store.parse_episode_id(
                payload["episodeId"]
            )
            assert (model_id, track_id) == ("m1", "rapid-wide-left")
        finally:
            service.handle("cancel_training", {"job": job})
            service.wait_for_job(job, timeout=60)

    def test_two_models_train_concurrently(self, service):
        job1 = self.start_long_job(service, episodes=2)
        status, _ = service.handle("create_model", {"name": "second"})
        assert status == 200
        status, payload = service.handle(
            "start_training",
            {"model": "m2", "track": "rapid-wide-left", "episodes": 2},
        )
        assert status == 200
        service.wait_for_job(job1, timeout=180)
        service.wait_for_job(payload["job"], timeout=180)
        assert service.jobs[job1]["state"] == "done"
        assert service.jobs[payload["job"]]["state"] == "done"

    def test_restart_marks_running_jobs_failed(self, tmp_path):
        store = Store(tmp_path / "srv", clock=fixed_clock)
        store.save_jobs({
            "j4": {
                "job": "j4", "model": "m1", "track": "t1",
                "episodesRequested": 9, "episodesDone": 1,
                "state": "running", "seed": 0,
                "createdAt": fixed_clock(),
                "events": [
                    {"v": 1, "event": "job_started", "job": "j4",
                     "model": "m1", "track": "t1", "episodesRequested": 9},
                ],
            },
            "j5": {"job": "j5", "model": "m2", "track": "t1",
                   "episodesRequested": 1, "episodesDone": 1,
                   "state": "done", "seed": 0,
                   "createdAt": fixed_clock(),
                   "events": [{"v": 1, "event": "job_done", "job": "j5",
                               "episodesCompleted": 1}]},
        })
        svc = TrainingService(store, hyper=SMALL_HYPER)
        assert svc.jobs["j4"]["state"] == "failed"
        assert svc.jobs["j4"]["events"][-1]["event"] == "job_failed"
        assert "restarted" in svc.jobs["j4"]["events"][-1]["message"]
        assert svc.jobs["j5"]["state"] == "done"
        assert svc.jobs["j5"]["events"][-1]["event"] == "job_done"
        # recovery is persisted, so a second restart changes nothing
        again = TrainingService(store, hyper=SMALL_HYPER)
        assert again.jobs["j4"]["events"] == svc.jobs["j4"]["events"]
        backlog, live = again.subscribe("j4")
        assert live is None
        assert backlog[-1]["event"] == "job_failed"

    def test_new_job_ids_continue_after_recovery(self, tmp_path):
        store = Store(tmp_path / "srv", clock=fixed_clock)
        store.save_jobs({
            "j7": {"job": "j7", "model": "m1", "track": "t1",
                   "episodesRequested": 1, "episodesDone": 1,
                   "state": "done", "seed": 0, "createdAt": fixed_clock(),
                   "events": []},
        })
        svc = TrainingService(store, hyper=SMALL_HYPER)
        svc.handle("create_model", {"name": "n"})
        status, payload = svc.handle(
            "start_training",
            {"model": "m1", "track": "rapid-wide-left", "episodes": 1},
        )
        assert status == 200
        assert payload["job"] == "j8"
        svc.wait_for_job("j8", timeout=120)


class ServerFixture:
    def __init__(self, tmp_path):
        self.httpd = make_server(
            Store(tmp_path / "http", clock=fixed_clock), listen="127.0.0.1:0",
            hyper=SMALL_HYPER,
        )
        self.port = self.httpd.server_address[1]
        self.thread = threading.Thread(
            target=self.httpd.serve_forever, daemon=True
        )
        self.thread.start()

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()

    def post(self, endpoint, body):
        conn = http.client.HTTPConnection("127.0.0.1", self.port, timeout=60)
        conn.request(
            "POST", f"/api/{endpoint}", body=json.dumps(body).encode(),
            headers={"Content-Type": "application/json"},
        )
        resp = conn.getresponse()
        payload = json.loads(resp.read().decode())
        status = resp.status
        conn.close()
        return status, payload

    def stream_events(self, job, max_events=200):
        conn = http.client.HTTPConnection("127.0.0.1", self.port, timeout=120)
        conn.request("GET", f"/api/subscribe_events?job={job}")
        resp = conn.getresponse()
        assert resp.status == 200
        assert resp.getheader("Content-Type").startswith("text/event-stream")
        events = []
        while len(events) < max_events:
            line = resp.fp.readline()
            if not line:
                break
            line = line.decode().strip()
            if line.startswith("data: "):
                events.append(json.loads(line[len("data: "):]))
                if events[-1].get("event") in (
                    "job_done", "job_cancelled", "job_failed"
                ):
                    trailer = resp.fp.readline()
                    assert trailer.strip() == b""
                    assert resp.fp.read() == b""
                    break
        conn.close()
        return events


@pytest.fixture
def server(tmp_path):
    fx = ServerFixture(tmp_path)
    yield fx
    fx.close()


class TestHttpTransport:
    def test_post_round_trip(self, server):
        status, payload = server.post("create_model", {"name": "web"})
        assert status == 200
        assert payload["v"] == 1
        assert payload["modelId"] == "m1"
        assert payload["createdAt"] == fixed_clock()

    def test_bad_json_body(self, server):
        conn = http.client.HTTPConnection("127.0.0.1", server.port, timeout=30)
        conn.request("POST", "/api/create_model", body=b"{nope")
        resp = conn.getresponse()
        payload = json.loads(resp.read().decode())
        assert resp.status == 422
        assert payload["error"]["code"] == "ValidationFailed"
        conn.request("POST", "/api/create_model", body=b"[1,2]")
        resp = conn.getresponse()
        assert resp.status == 422
        conn.close()

    def test_unknown_paths(self, server):
        conn = http.client.HTTPConnection("127.0.0.1", server.port, timeout=30)
        conn.request("POST", "/elsewhere", body=b"{}")
        resp = conn.getresponse()
        assert resp.status == 404
        resp.read()
        conn.request("GET", "/api/anything")
        resp = conn.getresponse()
        assert resp.status == 404
        resp.read()
        conn.close()

    def test_subscribe_validation(self, server):
        conn = http.client.HTTPConnection("127.0.0.1", server.port, timeout=30)
        conn.request("GET", "/api/subscribe_events")
        resp = conn.getresponse()
        assert resp.status == 422
        resp.read()
        conn.request("GET", "/api/subscribe_events?job=j9")
        resp = conn.getresponse()
        assert resp.status == 404
        resp.read()
        conn.close()

    def test_cors_preflight(self, server):
        conn = http.client.HTTPConnection("127.0.0.1", server.port, timeout=30)
        conn.request("OPTIONS", "/api/create_model")
        resp = conn.getresponse()
        assert resp.status == 204
        assert resp.getheader("Access-Control-Allow-Origin") == "*"
        resp.read()
        conn.close()

    def test_live_stream_then_replay(self, server):
        status, _ = server.post("create_model", {"name": "web"})
        assert status == 200
        status, payload = server.post(
            "start_training",
            {"model": "m1", "track": "rapid-wide-left", "episodes": 3, "seed": 2},
        )
        assert status == 200
        job = payload["job"]

        live = server.stream_events(job)
        kinds = [e["event"] for e in live]
        assert kinds[0] == "job_started"
        assert kinds[-1] == "job_done"
        assert kinds.count("episode_completed") == 3
        ordinals = [e["ordinal"] for e in live if e["event"] == "episode_completed"]
        assert ordinals == [1, 2, 3]
        for e in live:
            if e["event"] == "episode_completed":
                assert set(e) == {
                    "v", "event", "job", "episodeId", "ordinal",
                    "totalReward", "outcome", "steps",
                }

        replay = server.stream_events(job)
        assert replay == live
