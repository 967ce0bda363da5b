"""Training service: JSON request/response API plus per-job event streams.

Transport is plain HTTP: every command is POST /api/<name> with a JSON
body, and GET /api/subscribe_events?job=J is a server-sent-event stream.
Every message, request or response or event, carries "v": 1.

One background worker thread trains one model at a time; a second
start_training on the same model is refused with ModelBusy. Each job
keeps an ordered event backlog (job_started, episode_completed per
episode, one terminal event); subscribers get the backlog first, then
live events, and the stream closes after the terminal event, so late
or reconnecting clients see the identical sequence.

The job table is persisted to the store; on restart, jobs that were
still running are marked failed (their completed episodes remain).
"""

import json
import queue
import threading
import traceback
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .dsl import compile_program, has_errors
from .engine import run_episode
from .errors import (
    Cancelled,
    DegenerateInput,
    InvalidWaypoint,
    ModelBusy,
    OttoError,
    ProgramError,
    TrackMismatch,
    UnknownEpisode,
    UnknownModel,
    UnknownTrack,
)
from .interp import ScriptRuntime, effects_to_dict
from .store import Store
from .track import build_track, smooth_polyline
from .trainer import TrainHyper, train

PROTOCOL_VERSION = 1

TERMINAL_STATES = ("done", "cancelled", "failed")


class _BadRequest(Exception):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


def _diag_dicts(diagnostics):
    return [
        {
            "severity": d.severity,
            "line": d.line,
            "column": d.column,
            "code": d.code,
            "message": d.message,
        }
        for d in diagnostics
    ]


def _field(body, name, kinds, required=True, default=None):
    if name not in body:
        if required:
            raise _BadRequest(f"missing field {name!r}")
        return default
    value = body[name]
    if kinds is not None and not isinstance(value, kinds):
        raise _BadRequest(f"field {name!r} has the wrong type")
    return value


class TrainingService:
    """Endpoint logic and job management, independent of the transport."""

    def __init__(self, store, hyper=None):
        self.store = store
        self.hyper = hyper if hyper is not None else TrainHyper()
        self.lock = threading.RLock()
        self.jobs = {}  # job id -> record dict (incl. "events" backlog)
        self.subscribers = {}  # job id -> list of queue.Queue
        self.cancel_flags = {}  # job id -> threading.Event
        self.workers = {}
        self._recover_jobs()

    # -- job persistence --

    def _recover_jobs(self):
        stored = self.store.load_jobs()
        with self.lock:
            for job_id, rec in stored.items():
                if rec.get("state") not in TERMINAL_STATES:
                    rec["state"] = "failed"
                    events = rec.setdefault("events", [])
                    if not events or events[-1].get("event") not in (
                        "job_done", "job_cancelled", "job_failed"
                    ):
                        events.append(
                            {
                                "v": PROTOCOL_VERSION,
                                "event": "job_failed",
                                "job": job_id,
                                "message": "server restarted while the job was running",
                            }
                        )
                self.jobs[job_id] = rec
            self._persist_jobs_locked()

    def _persist_jobs_locked(self):
        self.store.save_jobs(self.jobs)

    def _new_job_id_locked(self):
        best = 0
        for job_id in self.jobs:
            if job_id.startswith("j") and job_id[1:].isdigit():
                best = max(best, int(job_id[1:]))
        return f"j{best + 1}"

    def _emit(self, job_id, event):
        with self.lock:
            rec = self.jobs[job_id]
            rec["events"].append(event)
            if event["event"] == "episode_completed":
                rec["episodesDone"] = event["ordinal"]
            self._persist_jobs_locked()
            for q in self.subscribers.get(job_id, []):
                q.put(event)

    # -- endpoints --

    def create_model(self, body):
        name = _field(body, "name", str)
        if not name.strip():
            raise _BadRequest("model name must not be empty")
        with self.lock:
            model = self.store.create_model(name)
        return model.meta()

    def list_models(self, body):
        return {"models": self.store.list_models()}

    def get_model(self, body):
        model_id = _field(body, "id", str)
        model = self.store.get_model(model_id)
        return model.meta()

    def create_track(self, body):
        spec = _field(body, "track", dict)
        name = _field(spec, "name", str)
        width = _field(spec, "width", (int, float))
        closed = _field(spec, "closed", bool, required=False, default=False)
        raw = _field(spec, "centerline", list)
        waypoints = _field(spec, "waypoints", list, required=False, default=[])
        tile_count = _field(spec, "tileCount", int, required=False)
        try:
            centerline = smooth_polyline([(p[0], p[1]) for p in raw], closed=closed)
            with self.lock:
                track_id = self.store.new_track_id()
                track = build_track(
                    name, centerline, float(width), bool(closed),
                    tile_count=tile_count, waypoints=waypoints, track_id=track_id,
                )
                self.store.save_track(track)
        except (DegenerateInput, InvalidWaypoint, TypeError, IndexError) as exc:
            raise _BadRequest(f"invalid track: {exc}") from exc
        from .track import track_to_dict

        return {"track": track_to_dict(track)}

    def list_tracks(self, body):
        from .track import track_to_dict

        return {"tracks": [track_to_dict(t) for t in self.store.list_tracks()]}

    def get_track(self, body):
        track_id = _field(body, "id", str)
        from .track import track_to_dict

        return {"track": track_to_dict(self.store.get_track(track_id))}

    def start_training(self, body):
        model_id = _field(body, "model", str)
        track_id = _field(body, "track", str)
        episodes = _field(body, "episodes", int)
        seed = _field(body, "seed", int, required=False, default=0)
        if episodes <= 0:
            raise _BadRequest("episodes must be positive")
        model = self.store.get_model(model_id)
        track = self.store.get_track(track_id)
        with self.lock:
            for rec in self.jobs.values():
                if rec["model"] == model_id and rec["state"] not in TERMINAL_STATES:
                    raise ModelBusy(f"model {model_id!r} already has job {rec['job']} running")
            job_id = self._new_job_id_locked()
            rec = {
                "job": job_id,
                "model": model_id,
                "track": track_id,
                "episodesRequested": episodes,
                "episodesDone": 0,
                "state": "queued",
                "seed": seed,
                "createdAt": self.store.clock(),
                "events": [],
            }
            self.jobs[job_id] = rec
            self.subscribers.setdefault(job_id, [])
            self.cancel_flags[job_id] = threading.Event()
            self._persist_jobs_locked()
        worker = threading.Thread(
            target=self._run_job, args=(job_id, model, track, episodes, seed),
            name=f"train-{job_id}", daemon=True,
        )
        with self.lock:
            self.workers[job_id] = worker
        worker.start()
        return {"job": job_id}

    def _run_job(self, job_id, model, track, episodes, seed):
        with self.lock:
            self.jobs[job_id]["state"] = "running"
            self._persist_jobs_locked()
        self._emit(job_id, {
            "v": PROTOCOL_VERSION,
            "event": "job_started",
            "job": job_id,
            "model": model.model_id,
            "track": track.id,
            "episodesRequested": episodes,
        })

        def sink(episode, ordinal):
            with self.lock:  # ordinal assignment must not race run_test writes
                composite = self.store.put_episode(model.model_id, episode)
            self._emit(job_id, {
                "v": PROTOCOL_VERSION,
                "event": "episode_completed",
                "job": job_id,
                "episodeId": composite,
                "ordinal": ordinal,
                "totalReward": episode.total_reward,
                "outcome": episode.outcome,
                "steps": len(episode.steps),
            })

        cancel = self.cancel_flags[job_id]
        try:
            train(model, track, episodes, hyper=self.hyper,
                  episode_sink=sink, cancel_signal=cancel, seed=seed)
        except Cancelled as exc:
            self.store.save_model(model)
            self._finish_job(job_id, "cancelled", {
                "v": PROTOCOL_VERSION,
                "event": "job_cancelled",
                "job": job_id,
                "episodesCompleted": exc.episodes_completed,
            })
            return
        except Exception as exc:  # noqa: BLE001 - worker must not die silently
            self._finish_job(job_id, "failed", {
                "v": PROTOCOL_VERSION,
                "event": "job_failed",
                "job": job_id,
                "message": f"{type(exc).__name__}: {exc}",
            })
            return
        self.store.save_model(model)
        self._finish_job(job_id, "done", {
            "v": PROTOCOL_VERSION,
            "event": "job_done",
            "job": job_id,
            "episodesCompleted": episodes,
        })

    def _finish_job(self, job_id, state, terminal_event):
        with self.lock:
            self.jobs[job_id]["state"] = state
        self._emit(job_id, terminal_event)

    def cancel_training(self, body):
        job_id = _field(body, "job", str)
        with self.lock:
            if job_id not in self.jobs:
                raise UnknownEpisode(f"no job {job_id!r}")  # mapped to UnknownId/404
            state = self.jobs[job_id]["state"]
            flag = self.cancel_flags.get(job_id)
        if flag is not None:
            flag.set()
        return {"job": job_id, "state": state}

    def run_test(self, body):
        model_id = _field(body, "model", str)
        track_id = _field(body, "track", str)
        seed = _field(body, "seed", int)
        source = _field(body, "program_source", str, required=False)
        model = self.store.get_model(model_id)
        track = self.store.get_track(track_id)
        script = None
        diagnostics = []
        if source is not None:
            program, diagnostics = compile_program(source, track)
            if has_errors(diagnostics):
                raise _BadRequest("program failed checks", diagnostics=_diag_dicts(diagnostics))
            script = ScriptRuntime(program)
        episode = run_episode(
            model.net, track, seed,
            mode="programmed" if script is not None else "test",
            script=script,
        )
        effects = effects_to_dict(script) if script is not None else None
        with self.lock:
            composite = self.store.put_episode(model_id, episode, effects=effects)
        out = {
            "episodeId": composite,
            "totalReward": episode.total_reward,
            "outcome": episode.outcome,
            "steps": len(episode.steps),
        }
        if diagnostics:
            out["diagnostics"] = _diag_dicts(diagnostics)
        return out

    def get_overlay(self, body):
        model_id = _field(body, "model", str)
        track_id = _field(body, "track", str)
        episode_filter = _field(body, "filter", (str, list), required=False)
        self.store.get_model(model_id)
        self.store.get_track(track_id)
        return self.store.overlay(model_id, track_id, episode_filter)

    def get_reward_curve(self, body):
        model_id = _field(body, "model", str)
        track_id = _field(body, "track", str)
        self.store.get_model(model_id)
        self.store.get_track(track_id)
        return {
            "modelId": model_id,
            "trackId": track_id,
            "points": self.store.reward_curve(model_id, track_id),
        }

    def get_episode(self, body):
        composite = _field(body, "id", str)
        episode, effects = self.store.get_episode(composite)
        return {
            "episode": {
                "episodeId": composite,
                "id": episode.id,
                "trackId": episode.track_id,
                "seed": episode.seed,
                "outcome": episode.outcome,
                "totalReward": episode.total_reward,
                "endpoint": [episode.endpoint[0], episode.endpoint[1]],
                "steps": [
                    {
                        "t": rec.t,
                        "pos": [rec.state.position[0], rec.state.position[1]],
                        "heading": rec.state.heading,
                        "speed": rec.state.speed,
                        "action": rec.action,
                        "reward": rec.reward,
                        "newTiles": list(rec.new_tiles),
                        "events": list(rec.events),
                    }
                    for rec in episode.steps
                ],
                "effects": effects,
            }
        }

    ENDPOINTS = {
        "create_model": create_model,
        "list_models": list_models,
        "get_model": get_model,
        "create_track": create_track,
        "list_tracks": list_tracks,
        "get_track": get_track,
        "start_training": start_training,
        "cancel_training": cancel_training,
        "run_test": run_test,
        "get_overlay": get_overlay,
        "get_reward_curve": get_reward_curve,
        "get_episode": get_episode,
    }

    def handle(self, endpoint, body):
        """Dispatch one request; returns (http_status, response dict)."""
        fn = self.ENDPOINTS.get(endpoint)
        if fn is None:
            return 404, _error("UnknownId", f"no endpoint {endpoint!r}")
        try:
            payload = fn(self, body)
        except _BadRequest as exc:
            return 422, _error("ValidationFailed", str(exc), exc.diagnostics)
        except (UnknownModel, UnknownTrack, UnknownEpisode) as exc:
            return 404, _error("UnknownId", str(exc))
        except ModelBusy as exc:
            return 409, _error("ModelBusy", str(exc))
        except (DegenerateInput, InvalidWaypoint, ProgramError, TrackMismatch) as exc:
            return 422, _error("ValidationFailed", str(exc))
        except OttoError as exc:
            return 500, _error("Internal", str(exc))
        except Exception as exc:  # noqa: BLE001 - boundary
            traceback.print_exc()
            return 500, _error("Internal", f"{type(exc).__name__}: {exc}")
        out = {"v": PROTOCOL_VERSION}
        out.update(payload)
        return 200, out

    # -- event streams --

    def subscribe(self, job_id):
        """Returns (backlog snapshot, live queue or None when already terminal)."""
        with self.lock:
            if job_id not in self.jobs:
                raise UnknownEpisode(f"no job {job_id!r}")
            rec = self.jobs[job_id]
            backlog = list(rec["events"])
            if rec["state"] in TERMINAL_STATES and _has_terminal(backlog):
                return backlog, None
            q = queue.Queue()
            self.subscribers.setdefault(job_id, []).append(q)
            return backlog, q

    def unsubscribe(self, job_id, q):
        with self.lock:
            subs = self.subscribers.get(job_id, [])
            if q in subs:
                subs.remove(q)

    def wait_for_job(self, job_id, timeout=None):
        worker = self.workers.get(job_id)
        if worker is not None:
            worker.join(timeout)


def _has_terminal(events):
    return any(e.get("event") in ("job_done", "job_cancelled", "job_failed") for e in events)


def _error(code, message, diagnostics=None):
    err = {"code": code, "message": message}
    if diagnostics:
        err["diagnostics"] = diagnostics
    return {"v": PROTOCOL_VERSION, "error": err}


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    service = None  # injected by make_server

    def log_message(self, fmt, *args):  # quiet by default
        if getattr(self.service, "verbose", False):
            super().log_message(fmt, *args)

    def _cors(self):
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _send_json(self, status, payload):
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self._cors()
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_POST(self):
        parsed = urlparse(self.path)
        # drain the body before any early return or the unread bytes
        # corrupt the next request on a keep-alive connection
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b"{}"
        if not parsed.path.startswith("/api/"):
            self._send_json(404, _error("UnknownId", "unknown path"))
            return
        endpoint = parsed.path[len("/api/"):]
        try:
            body = json.loads(raw.decode("utf-8")) if raw.strip() else {}
            if not isinstance(body, dict):
                raise ValueError("body must be a JSON object")
        except ValueError as exc:
            self._send_json(422, _error("ValidationFailed", f"bad JSON body: {exc}"))
            return
        status, payload = self.service.handle(endpoint, body)
        self._send_json(status, payload)

    def do_GET(self):
        parsed = urlparse(self.path)
        if parsed.path != "/api/subscribe_events":
            self._send_json(404, _error("UnknownId", "unknown path"))
            return
        params = parse_qs(parsed.query)
        job_values = params.get("job", [])
        if not job_values:
            self._send_json(422, _error("ValidationFailed", "missing job parameter"))
            return
        job_id = job_values[0]
        try:
            backlog, live = self.service.subscribe(job_id)
        except UnknownEpisode as exc:
            self._send_json(404, _error("UnknownId", str(exc)))
            return
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", "text/event-stream; charset=utf-8")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Connection", "close")
        self.end_headers()
        try:
            for event in backlog:
                self._send_event(event)
            if _has_terminal(backlog):
                return
            while live is not None:
                event = live.get()
                self._send_event(event)
                if event.get("event") in ("job_done", "job_cancelled", "job_failed"):
                    return
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            if live is not None:
                self.service.unsubscribe(job_id, live)

    def _send_event(self, event):
        frame = f"data: {json.dumps(event)}\n\n".encode("utf-8")
        self.wfile.write(frame)
        self.wfile.flush()


def make_server(store, listen="127.0.0.1:8733", hyper=None):
    """Build a ThreadingHTTPServer bound to `listen`; caller runs it."""
    host, _, port = listen.rpartition(":")
    host = host or "127.0.0.1"
    service = TrainingService(store, hyper=hyper)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    httpd = ThreadingHTTPServer((host, int(port)), handler)
    httpd.daemon_threads = True
    httpd.service = service
    return httpd


def serve(store_root, listen="127.0.0.1:8733"):
    httpd = make_server(Store(store_root), listen=listen)
    host, port = httpd.server_address[:2]
    print(f"serving on http://{host}:{port}/api/")
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
    return 0
