"""Deterministic driving simulator.

One module owns the whole step: kinematics, egocentric raster
observations, tile-progress reward, termination, waypoint triggers, and
full-episode execution. Everything is a pure function of (weights,
track, seed, mode, params); a re-run reproduces an episode byte for
byte, which the replay UI and the determinism tests rely on.

Sim time advances in fixed dt ticks. A step applies the action, then
drag, then integrates position with the post-steer heading. Paused
steps (scripted pauseDriving) force Brake and contribute zero reward.
"""

import json
import math
from collections import namedtuple
from dataclasses import dataclass, replace

import numpy as np

from .errors import ProgramError
from .track import point_at, project

# Observation geometry: egocentric top-down raster, 1 m per cell, the
# vehicle pinned at (col 12, row 18) facing up.
OBS_FRAMES = 3
OBS_SIZE = 24
VEHICLE_COL = 12
VEHICLE_ROW = 18

OUTCOME_COMPLETED = "completed"
OUTCOME_OFF_TRACK = "off_track"
OUTCOME_TIMEOUT = "timeout"


class Action:
    """Discrete action space, serialized as the integers 0-4."""

    ACCELERATE = 0
    BRAKE = 1
    STEER_LEFT = 2
    STEER_RIGHT = 3
    NO_CHANGE = 4

    ALL = (0, 1, 2, 3, 4)
    NAMES = ("accelerate", "brake", "steer_left", "steer_right", "no_change")


N_ACTIONS = len(Action.ALL)


@dataclass
class SimParams:
    dt: float = 0.1
    accel: float = 2.0
    brake_decel: float = 4.0
    drag: float = 0.2
    v_max: float = 12.0
    turn_rate: float = 1.5
    off_track_margin: float = 1.0
    max_steps: int = 1000
    tile_reward_total: float = 1000.0
    step_penalty: float = 0.1
    off_track_penalty: float = 100.0
    completion_bonus: float = 100.0
    completion_fraction: float = 0.95

    def turn_speed_scale(self, speed):
        return min(1.0, speed / 4.0)


@dataclass
class VehicleState:
    position: tuple
    heading: float
    speed: float
    paused_until: float | None = None  # seconds of scripted pause remaining


DoneFlags = namedtuple("DoneFlags", ["off_track", "completed"])


@dataclass
class StepRecord:
    t: int
    state: VehicleState
    action: int
    reward: float
    new_tiles: tuple
    events: tuple


@dataclass
class Episode:
    id: str
    track_id: str
    seed: int
    steps: list
    total_reward: float
    outcome: str
    endpoint: tuple


def normalize_angle(a):
    """Wrap an angle into (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def step_dynamics(state, action, params):
    """Advance the vehicle one tick.

    Order: action effect, then drag, then position integration with the
    post-steer heading. An active pause overrides the action with Brake
    and counts down by dt.
    """
    speed = state.speed
    heading = state.heading
    paused_until = state.paused_until

    if paused_until is not None:
        action = Action.BRAKE
        remaining = paused_until - params.dt
        paused_until = remaining if remaining > 1e-9 else None

    if action == Action.ACCELERATE:
        speed = min(params.v_max, speed + params.accel * params.dt)
    elif action == Action.BRAKE:
        speed = max(0.0, speed - params.brake_decel * params.dt)
    elif action == Action.STEER_LEFT:
        heading += params.turn_rate * params.turn_speed_scale(speed) * params.dt
    elif action == Action.STEER_RIGHT:
        heading -= params.turn_rate * params.turn_speed_scale(speed) * params.dt
    elif action != Action.NO_CHANGE:
        raise ValueError(f"unknown action {action!r}")

    speed = max(0.0, speed - params.drag * params.dt)
    heading = normalize_angle(heading)
    x = state.position[0] + speed * params.dt * math.cos(heading)
    y = state.position[1] + speed * params.dt * math.sin(heading)
    return VehicleState(position=(x, y), heading=heading, speed=speed, paused_until=paused_until)


# === observation raster ===

_ROWS, _COLS = np.meshgrid(np.arange(OBS_SIZE), np.arange(OBS_SIZE), indexing="ij")
_FWD_UNITS = (VEHICLE_ROW - _ROWS).astype(np.float64).ravel()
_RIGHT_UNITS = (_COLS - VEHICLE_COL).astype(np.float64).ravel()


def render_frame(track, state):
    """One binary on-track frame around the vehicle, rotated to heading."""
    from .track import min_distance_to_centerline

    cos_h = math.cos(state.heading)
    sin_h = math.sin(state.heading)
    x, y = state.position
    wx = x + cos_h * _FWD_UNITS + sin_h * _RIGHT_UNITS
    wy = y + sin_h * _FWD_UNITS - cos_h * _RIGHT_UNITS
    dist = min_distance_to_centerline(track, wx, wy)
    frame = (dist <= track.width / 2.0).astype(np.float32)
    return frame.reshape(OBS_SIZE, OBS_SIZE)


def render_observation(track, state, history_buffer):
    """Stack [frame(t-2), frame(t-1), frame(t)]; zero frames pad the start."""
    frames = list(history_buffer)[-(OBS_FRAMES - 1):]
    while len(frames) < OBS_FRAMES - 1:
        frames.insert(0, np.zeros((OBS_SIZE, OBS_SIZE), dtype=np.float32))
    frames.append(render_frame(track, state))
    return np.stack(frames)


# === reward / termination / waypoints ===


def compute_reward(track, prev_visited, projection, on_track, done_flags, params):
    """Tile progress minus the step penalty, plus terminal adjustments.

    A tile is newly visited when the current tile index is not in
    prev_visited; skipped tiles are never back-filled.
    """
    if projection.tile_index in prev_visited:
        newly = frozenset()
    else:
        newly = frozenset([projection.tile_index])
    reward = (params.tile_reward_total / track.tile_count) * len(newly)
    reward -= params.step_penalty
    if done_flags.off_track:
        reward -= params.off_track_penalty
    if done_flags.completed:
        reward += params.completion_bonus
    return reward, newly


def completion_target(track, params):
    # 1e-9 slack so e.g. 19 tiles satisfies 0.95 * 20 despite float round-up.
    return params.completion_fraction * track.tile_count - 1e-9


def check_termination(visited, on_track, t, params, tile_count, completion_needed):
    """Episode outcome after a step, or None. Priority: off_track, completed, timeout."""
    if not on_track:
        return OUTCOME_OFF_TRACK
    if len(visited) >= completion_needed:
        return OUTCOME_COMPLETED
    if t >= params.max_steps:
        return OUTCOME_TIMEOUT
    return None


def check_waypoints(track, position, already_triggered):
    """Waypoints whose disk contains the position, once per episode,
    in track-declaration order."""
    x, y = position
    hits = []
    for wp in track.waypoints:
        if wp.name in already_triggered:
            continue
        if math.hypot(x - wp.position[0], y - wp.position[1]) <= wp.radius:
            hits.append(wp.name)
    return hits


# === environment ===


@dataclass
class StepResult:
    record: StepRecord
    outcome: str | None
    events: tuple


class SimEnv:
    """Stateful episode runner over an immutable track.

    Holds the vehicle state, visited-tile set, waypoint trigger set and
    the two-frame observation history. Distinct instances are
    independent; one instance runs one episode at a time.
    """

    def __init__(self, track, params=None):
        self.track = track
        self.params = params if params is not None else SimParams()
        self._completion_needed = completion_target(track, self.params)
        self.needs_reset = True
        self.state = None

    def reset(self, seed):
        self.seed = int(seed)
        x, y = point_at(self.track, 0.0)
        dx = self.track.seg_bx[0] - self.track.seg_ax[0]
        dy = self.track.seg_by[0] - self.track.seg_ay[0]
        heading = normalize_angle(math.atan2(dy, dx))
        self.state = VehicleState(position=(x, y), heading=heading, speed=0.0)
        # The spawn tile is pre-visited: no credit for standing still.
        self.visited = {project(self.track, (x, y)).tile_index}
        self.triggered = set()
        self.t = 0
        self._history = [
            np.zeros((OBS_SIZE, OBS_SIZE), dtype=np.float32),
            np.zeros((OBS_SIZE, OBS_SIZE), dtype=np.float32),
        ]
        self._current_frame = render_frame(self.track, self.state)
        self.needs_reset = False
        return self.observation()

    def observation(self):
        return np.stack([self._history[0], self._history[1], self._current_frame])

    def set_pause(self, request):
        """Apply a script pause request: ("pause", seconds) or ("resume",)."""
        if request is None:
            return
        if request[0] == "pause":
            self.state.paused_until = float(request[1])
        elif request[0] == "resume":
            self.state.paused_until = None

    def step(self, action):
        if self.needs_reset:
            raise RuntimeError("environment needs reset() before step()")
        params = self.params
        paused = self.state.paused_until is not None
        applied = Action.BRAKE if paused else int(action)
        new_state = step_dynamics(self.state, action, params)

        proj = project(self.track, new_state.position)
        on = abs(proj.lateral) <= self.track.width / 2.0 + params.off_track_margin
        newly = frozenset() if proj.tile_index in self.visited else frozenset([proj.tile_index])
        visited_after = self.visited | newly
        outcome = check_termination(
            visited_after, on, self.t + 1, params, self.track.tile_count, self._completion_needed
        )
        flags = DoneFlags(
            off_track=outcome == OUTCOME_OFF_TRACK,
            completed=outcome == OUTCOME_COMPLETED,
        )
        reward, newly2 = compute_reward(self.track, self.visited, proj, on, flags, params)
        assert newly2 == newly
        if paused:
            reward = 0.0

        self.visited = visited_after
        self.state = new_state
        events = check_waypoints(self.track, new_state.position, self.triggered)
        self.triggered.update(events)

        record = StepRecord(
            t=self.t,
            state=replace(new_state),
            action=applied,
            reward=reward,
            new_tiles=tuple(sorted(newly)),
            events=tuple(events),
        )
        self.t += 1
        self._history = [self._history[1], self._current_frame]
        self._current_frame = render_frame(self.track, self.state)
        if outcome is not None:
            self.needs_reset = True
        return StepResult(record=record, outcome=outcome, events=tuple(events))


# === policies ===


class CenterlinePilot:
    """Deterministic centerline-following driver for test fixtures.

    Steers toward a lookahead point on the centerline and holds a low
    cruise speed so scripted pauses can stop the vehicle within a few
    braking steps.
    """

    def __init__(self, cruise=3.0, lookahead=6.0, deadband=0.05, min_steer_speed=1.0):
        self.cruise = cruise
        self.lookahead = lookahead
        self.deadband = deadband
        self.min_steer_speed = min_steer_speed

    def act(self, state, track):
        proj = project(track, state.position)
        tx, ty = point_at(track, proj.s + self.lookahead)
        x, y = state.position
        desired = math.atan2(ty - y, tx - x)
        err = normalize_angle(desired - state.heading)
        if abs(err) > self.deadband:
            # Steering authority scales with speed and vanishes at rest, so
            # get moving first or a stationary misaligned vehicle spins its
            # wheels forever (e.g. restarting after a scripted pause).
            if state.speed < self.min_steer_speed:
                return Action.ACCELERATE
            return Action.STEER_LEFT if err > 0 else Action.STEER_RIGHT
        if state.speed < self.cruise:
            return Action.ACCELERATE
        if state.speed > self.cruise + 0.5:
            return Action.BRAKE
        return Action.NO_CHANGE


def _choose_action(policy, obs, state, track, mode, rng):
    if hasattr(policy, "act"):
        return int(policy.act(state, track))
    from .net import sample_action

    logits, _value = policy.forward(obs)
    if mode == "train":
        action, _logp = sample_action(logits, rng)
        return int(action)
    return int(np.argmax(logits))  # argmax breaks ties toward the lower index


def default_episode_id(track, seed):
    return f"{track.id}-s{int(seed)}"


def run_episode(policy, track, seed, mode="test", params=None, script=None, episode_id=None):
    """Run one full episode and return its record.

    Modes: "train" samples actions from the policy distribution with an
    RNG seeded by `seed`; "test" and "programmed" take the argmax.
    Programmed mode needs a script runtime (duck-typed: on_start,
    waypoint, on_step, on_end, each returning an optional pause
    request); its callbacks fire before step 0, on waypoint triggers,
    after every step, and after termination.
    """
    if mode not in ("train", "test", "programmed"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "programmed" and script is None:
        raise ProgramError("programmed mode requires a script runtime")
    params = params if params is not None else SimParams()
    env = SimEnv(track, params)
    env.reset(seed)
    rng = np.random.default_rng(int(seed))
    records = []
    if script is not None:
        env.set_pause(script.on_start(0, env.state))
    outcome = None
    while outcome is None:
        obs = env.observation()
        action = _choose_action(policy, obs, env.state, track, mode, rng)
        result = env.step(action)
        if script is not None:
            for name in result.events:
                env.set_pause(script.waypoint(name, result.record.t, env.state))
            env.set_pause(script.on_step(result.record.t, env.state))
        records.append(result.record)
        outcome = result.outcome
    if script is not None:
        script.on_end(records[-1].t, env.state)
    total = math.fsum(r.reward for r in records)
    return Episode(
        id=episode_id or default_episode_id(track, seed),
        track_id=track.id,
        seed=int(seed),
        steps=records,
        total_reward=total,
        outcome=outcome,
        endpoint=records[-1].state.position,
    )


# === episode serialization ===


def episode_to_jsonl(episode):
    """JSON-lines text: one header line, then one line per step."""
    header = {
        "id": episode.id,
        "trackId": episode.track_id,
        "seed": episode.seed,
        "outcome": episode.outcome,
        "totalReward": episode.total_reward,
        "endpoint": [episode.endpoint[0], episode.endpoint[1]],
    }
    lines = [json.dumps(header, separators=(",", ":"))]
    for rec in episode.steps:
        lines.append(
            json.dumps(
                {
                    "t": rec.t,
                    "pos": [rec.state.position[0], rec.state.position[1]],
                    "heading": rec.state.heading,
                    "speed": rec.state.speed,
                    "action": rec.action,
                    "reward": rec.reward,
                    "newTiles": list(rec.new_tiles),
                    "events": list(rec.events),
                },
                separators=(",", ":"),
            )
        )
    return "\n".join(lines) + "\n"


def episode_from_jsonl(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty episode record")
    header = json.loads(lines[0])
    steps = []
    for ln in lines[1:]:
        d = json.loads(ln)
        steps.append(
            StepRecord(
                t=int(d["t"]),
                state=VehicleState(
                    position=(float(d["pos"][0]), float(d["pos"][1])),
                    heading=float(d["heading"]),
                    speed=float(d["speed"]),
                ),
                action=int(d["action"]),
                reward=float(d["reward"]),
                new_tiles=tuple(d["newTiles"]),
                events=tuple(d["events"]),
            )
        )
    return Episode(
        id=header["id"],
        track_id=header["trackId"],
        seed=int(header["seed"]),
        steps=steps,
        total_reward=float(header["totalReward"]),
        outcome=header["outcome"],
        endpoint=(float(header["endpoint"][0]), float(header["endpoint"][1])),
    )
