"""Disk persistence for tracks, models, and recorded episodes.

Layout under one root directory:

    tracks/<track-id>.json
    models/<model-id>/weights.bin
    models/<model-id>/meta.json
    models/<model-id>/episodes/<track-id>/<n>.jsonl
    models/<model-id>/episodes/<track-id>/<n>.effects.json
    jobs.json

Every write goes through a temp file and os.replace, so a crash leaves
either the old file or the new one, never a torn one. Listings skip
files that fail to parse and emit a CorruptRecord warning instead of
failing the whole listing. The clock is injectable so tests and
protocol recordings get stable timestamps.

Episode ids are composite: "<model-id>:<track-id>:<n>" with n assigned
per (model, track) in increasing order.
"""

import datetime as _dt
import io
import json
import os
import re
import warnings
from pathlib import Path

import numpy as np

from .engine import episode_from_jsonl, episode_to_jsonl
from .errors import CorruptRecord, UnknownEpisode, UnknownModel, UnknownTrack
from .net import NetConfig, PolicyModel, PolicyNet, expected_shapes, load_weights, save_weights, seed_for_model
from .track import builtin_rapid_tracks, bus_route_track, track_from_dict, track_to_dict

_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_-]*$")
OVERLAY_MAX_POINTS = 500


def default_clock():
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _atomic_write(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode) as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def _max_numeric(names, prefix=""):
    best = 0
    for name in names:
        if prefix:
            if not name.startswith(prefix):
                continue
            tail = name[len(prefix):]
        else:
            tail = name
        if tail.isdigit():
            best = max(best, int(tail))
    return best


def builtin_tracks():
    tracks = list(builtin_rapid_tracks()) + [bus_route_track()]
    return {t.id: t for t in tracks}


class Store:
    def __init__(self, root, clock=None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "tracks").mkdir(exist_ok=True)
        (self.root / "models").mkdir(exist_ok=True)
        self.clock = clock if clock is not None else default_clock
        self._builtins = builtin_tracks()

    # -- tracks --

    def new_track_id(self):
        names = [p.stem for p in (self.root / "tracks").glob("t*.json")]
        return f"t{_max_numeric(names, 't') + 1}"

    def save_track(self, track):
        _atomic_write(
            self.root / "tracks" / f"{track.id}.json",
            json.dumps(track_to_dict(track), separators=(",", ":")) + "\n",
        )
        return track.id

    def get_track(self, track_id):
        path = self.root / "tracks" / f"{track_id}.json"
        if path.exists():
            with open(path) as f:
                return track_from_dict(json.load(f))
        if track_id in self._builtins:
            return self._builtins[track_id]
        raise UnknownTrack(f"no track {track_id!r}")

    def list_tracks(self):
        """Builtin tracks first, then stored ones in id order."""
        out = [self._builtins[k] for k in sorted(self._builtins)]
        for path in sorted((self.root / "tracks").glob("*.json")):
            try:
                with open(path) as f:
                    out.append(track_from_dict(json.load(f)))
            except Exception as exc:
                warnings.warn(f"skipping corrupt track file {path.name}: {exc}", CorruptRecord)
        return out

    # -- models --

    def new_model_id(self):
        names = [p.name for p in (self.root / "models").iterdir() if p.is_dir()]
        return f"m{_max_numeric(names, 'm') + 1}"

    def create_model(self, name, config=None):
        model_id = self.new_model_id()
        config = config if config is not None else NetConfig()
        net = PolicyNet(config=config, seed=seed_for_model(model_id, name))
        model = PolicyModel(
            net=net, model_id=model_id, name=name,
            trained_episodes=0, created_at=self.clock(),
        )
        self.save_model(model)
        return model

    def save_model(self, model):
        d = self.root / "models" / model.model_id
        d.mkdir(parents=True, exist_ok=True)
        buf = io.BytesIO()
        save_weights(model.net.params, buf)
        _atomic_write(d / "weights.bin", buf.getvalue())
        _atomic_write(d / "meta.json", json.dumps(model.meta(), separators=(",", ":")) + "\n")

    def get_model(self, model_id, config=None):
        d = self.root / "models" / model_id
        if not (d / "meta.json").exists():
            raise UnknownModel(f"no model {model_id!r}")
        with open(d / "meta.json") as f:
            meta = json.load(f)
        config = config if config is not None else NetConfig()
        params = load_weights(d / "weights.bin", expected_shapes(config))
        params = {k: np.ascontiguousarray(v, dtype=config.dtype) for k, v in params.items()}
        return PolicyModel(
            net=PolicyNet(config=config, params=params),
            model_id=meta["modelId"],
            name=meta["name"],
            trained_episodes=int(meta["trainedEpisodes"]),
            created_at=meta["createdAt"],
        )

    def list_models(self):
        out = []
        for d in sorted((self.root / "models").iterdir() if (self.root / "models").exists() else []):
            if not d.is_dir():
                continue
            try:
                with open(d / "meta.json") as f:
                    out.append(json.load(f))
            except Exception as exc:
                warnings.warn(f"skipping corrupt model entry {d.name}: {exc}", CorruptRecord)
        return out

    # -- episodes --

    def _episode_dir(self, model_id, track_id):
        return self.root / "models" / model_id / "episodes" / track_id

    def next_episode_ordinal(self, model_id, track_id):
        d = self._episode_dir(model_id, track_id)
        if not d.exists():
            return 1
        names = [p.stem for p in d.glob("*.jsonl")]
        return _max_numeric(names) + 1

    def put_episode(self, model_id, episode, effects=None):
        """Persist one episode; returns its composite id "model:track:n"."""
        if not (self.root / "models" / model_id / "meta.json").exists():
            raise UnknownModel(f"no model {model_id!r}")
        track_id = episode.track_id
        self.get_track(track_id)  # raises UnknownTrack
        n = self.next_episode_ordinal(model_id, track_id)
        d = self._episode_dir(model_id, track_id)
        _atomic_write(d / f"{n}.jsonl", episode_to_jsonl(episode))
        if effects is not None:
            _atomic_write(
                d / f"{n}.effects.json", json.dumps(effects, separators=(",", ":")) + "\n"
            )
        return f"{model_id}:{track_id}:{n}"

    def parse_episode_id(self, composite):
        parts = composite.split(":")
        if len(parts) != 3 or not parts[2].isdigit():
            raise UnknownEpisode(f"malformed episode id {composite!r}")
        return parts[0], parts[1], int(parts[2])

    def get_episode(self, composite):
        """Returns (Episode, effects dict or None)."""
        model_id, track_id, n = self.parse_episode_id(composite)
        path = self._episode_dir(model_id, track_id) / f"{n}.jsonl"
        if not path.exists():
            raise UnknownEpisode(f"no episode {composite!r}")
        with open(path) as f:
            episode = episode_from_jsonl(f.read())
        effects = None
        fx_path = self._episode_dir(model_id, track_id) / f"{n}.effects.json"
        if fx_path.exists():
            with open(fx_path) as f:
                effects = json.load(f)
        return episode, effects

    def list_episodes(self, model_id, track_id=None):
        """Episode headers, cheap: reads only the first line of each file."""
        base = self.root / "models" / model_id / "episodes"
        if not (self.root / "models" / model_id / "meta.json").exists():
            raise UnknownModel(f"no model {model_id!r}")
        out = []
        if not base.exists():
            return out
        track_dirs = [base / track_id] if track_id else sorted(base.iterdir())
        for td in track_dirs:
            if not td.is_dir():
                continue
            entries = sorted(td.glob("*.jsonl"), key=lambda p: int(p.stem) if p.stem.isdigit() else 0)
            for path in entries:
                try:
                    with open(path) as f:
                        lines = [ln for ln in f.read().splitlines() if ln.strip()]
                    header = json.loads(lines[0])
                    for required in ("id", "trackId", "seed", "outcome", "totalReward"):
                        if required not in header:
                            raise ValueError(f"header missing {required!r}")
                    out.append(
                        {
                            "episodeId": f"{model_id}:{td.name}:{path.stem}",
                            "trackId": header["trackId"],
                            "seed": header["seed"],
                            "outcome": header["outcome"],
                            "totalReward": header["totalReward"],
                            "steps": len(lines) - 1,
                            "hasEffects": (td / f"{path.stem}.effects.json").exists(),
                        }
                    )
                except Exception as exc:
                    warnings.warn(
                        f"skipping corrupt episode file {td.name}/{path.name}: {exc}",
                        CorruptRecord,
                    )
        return out

    # -- replay overlays --

    @staticmethod
    def decimate_path(episode):
        """Polyline of at most OVERLAY_MAX_POINTS positions at uniform
        stride; first and last steps always exact."""
        n = len(episode.steps)
        if n == 0:
            return []
        stride = max(1, -(-(n - 1) // (OVERLAY_MAX_POINTS - 1))) if n > 1 else 1
        idx = list(range(0, n, stride))
        if idx[-1] != n - 1:
            idx.append(n - 1)
        return [
            [episode.steps[i].state.position[0], episode.steps[i].state.position[1]]
            for i in idx
        ]

    def overlay(self, model_id, track_id, episode_filter=None):
        """Overlay payload over stored episodes for one (model, track):
        decimated path, exact endpoint, and total reward per episode, in
        training order. episode_filter selects composite ids (a string
        or an iterable of them); None includes every episode."""
        summaries = self.list_episodes(model_id, track_id)
        if episode_filter is not None:
            if isinstance(episode_filter, str):
                episode_filter = [episode_filter]
            wanted = set(episode_filter)
            summaries = [s for s in summaries if s["episodeId"] in wanted]
        entries = []
        for s in summaries:
            episode, _ = self.get_episode(s["episodeId"])
            entries.append(
                {
                    "episodeId": s["episodeId"],
                    "outcome": episode.outcome,
                    "totalReward": episode.total_reward,
                    "endpoint": [episode.endpoint[0], episode.endpoint[1]],
                    "path": self.decimate_path(episode),
                }
            )
        return {
            "modelId": model_id,
            "trackId": track_id,
            "episodes": entries,
        }

    def reward_curve(self, model_id, track_id):
        """[[ordinal, totalReward], ...] over stored episodes, ordinal from 1."""
        entries = self.list_episodes(model_id, track_id)
        curve = []
        for k, e in enumerate(entries, start=1):
            curve.append([k, e["totalReward"]])
        return curve

    # -- job persistence (server restarts) --

    def load_jobs(self):
        path = self.root / "jobs.json"
        if not path.exists():
            return {}
        try:
            with open(path) as f:
                return json.load(f)
        except Exception as exc:
            warnings.warn(f"jobs.json unreadable, starting empty: {exc}", CorruptRecord)
            return {}

    def save_jobs(self, jobs):
        _atomic_write(self.root / "jobs.json", json.dumps(jobs, separators=(",", ":")) + "\n")
