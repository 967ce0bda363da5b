"""Track geometry: smoothing, tiles, waypoints, projection.

A track is an immutable smoothed centerline with a width, an
equal-arc-length tile partition used for progress reward, and named
waypoint disks that fire script callbacks. Everything downstream
(rasterized observations, off-track detection, reward) reduces to
point-to-centerline projection, so the segment arrays are precomputed
once here and shared.

Pipeline: freehand polyline -> smooth_polyline (two corner-cutting
rounds + uniform resampling) -> build_track (validation, tiles,
waypoints) -> project / is_on_track queries.
"""

import json
import math
import re
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateInput, InvalidWaypoint

DEFAULT_SPACING = 2.0  # meters between resampled centerline points
DEFAULT_WAYPOINT_RADIUS = 3.0
WAYPOINT_KINDS = ("pickup", "dropoff", "custom")

_MIN_POINT_GAP = 1e-6  # consecutive centerline points must be farther apart


@dataclass(frozen=True)
class Tile:
    index: int
    s_start: float
    s_end: float


@dataclass(frozen=True)
class Waypoint:
    name: str
    kind: str
    position: tuple
    radius: float = DEFAULT_WAYPOINT_RADIUS


@dataclass(frozen=True)
class Projection:
    s: float
    lateral: float
    tile_index: int


class Track:
    """Immutable track; safe to share across threads."""

    def __init__(self, track_id, name, centerline, width, closed, tiles, waypoints):
        self.id = track_id
        self.name = name
        self.centerline = centerline  # (P, 2) float64, read-only
        self.width = float(width)
        self.closed = bool(closed)
        self.tiles = tuple(tiles)
        self.waypoints = tuple(waypoints)
        self._build_segments()
        self.centerline.setflags(write=False)

    def _build_segments(self):
        pts = self.centerline
        if self.closed:
            a = pts
            b = np.vstack([pts[1:], pts[:1]])
        else:
            a = pts[:-1]
            b = pts[1:]
        self.seg_ax = np.ascontiguousarray(a[:, 0])
        self.seg_ay = np.ascontiguousarray(a[:, 1])
        self.seg_bx = np.ascontiguousarray(b[:, 0])
        self.seg_by = np.ascontiguousarray(b[:, 1])
        dx = self.seg_bx - self.seg_ax
        dy = self.seg_by - self.seg_ay
        self.seg_len = np.sqrt(dx * dx + dy * dy)
        self.seg_s0 = np.concatenate([[0.0], np.cumsum(self.seg_len)[:-1]])
        self.length = float(self.seg_len.sum())
        for arr in (self.seg_ax, self.seg_ay, self.seg_bx, self.seg_by, self.seg_len, self.seg_s0):
            arr.setflags(write=False)

    @property
    def tile_count(self):
        return len(self.tiles)

    def __repr__(self):
        return (
            f"Track({self.id!r}, {len(self.centerline)} pts, width={self.width}, "
            f"closed={self.closed}, tiles={self.tile_count})"
        )


# === smoothing ===


def _dedupe(pts):
    keep = [pts[0]]
    for p in pts[1:]:
        if math.hypot(p[0] - keep[-1][0], p[1] - keep[-1][1]) > _MIN_POINT_GAP:
            keep.append(p)
    return np.asarray(keep, dtype=np.float64)


def _chaikin_round(pts, closed):
    if closed:
        nxt = np.vstack([pts[1:], pts[:1]])
        q = pts + 0.25 * (nxt - pts)
        r = pts + 0.75 * (nxt - pts)
        out = np.empty((2 * len(pts), 2), dtype=np.float64)
        out[0::2] = q
        out[1::2] = r
        return out
    a = pts[:-1]
    b = pts[1:]
    q = a + 0.25 * (b - a)
    r = a + 0.75 * (b - a)
    mid = np.empty((2 * len(a), 2), dtype=np.float64)
    mid[0::2] = q
    mid[1::2] = r
    return np.vstack([pts[:1], mid, pts[-1:]])


def _arc_lengths(pts, closed):
    if closed:
        ring = np.vstack([pts, pts[:1]])
    else:
        ring = pts
    deltas = np.diff(ring, axis=0)
    seg = np.sqrt((deltas * deltas).sum(axis=1))
    return ring, np.concatenate([[0.0], np.cumsum(seg)])


def _resample(pts, spacing, closed):
    ring, cum = _arc_lengths(pts, closed)
    total = cum[-1]
    if total <= _MIN_POINT_GAP:
        raise DegenerateInput("polyline has zero length")
    if closed:
        n = max(8, int(round(total / spacing)))
        s_targets = np.arange(n) * (total / n)
    else:
        n = max(2, int(round(total / spacing)) + 1)
        s_targets = np.linspace(0.0, total, n)
    x = np.interp(s_targets, cum, ring[:, 0])
    y = np.interp(s_targets, cum, ring[:, 1])
    return np.column_stack([x, y])


def smooth_polyline(raw, spacing=DEFAULT_SPACING, closed=False):
    """Two rounds of corner cutting, then uniform arc-length resampling.

    Each segment is replaced by its 1/4 and 3/4 points; open polylines
    keep their first and last raw points exactly. Raises DegenerateInput
    when fewer than two distinct points remain after deduplication.
    """
    if spacing <= 0:
        raise DegenerateInput("spacing must be positive")
    pts = np.asarray(raw, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
        raise DegenerateInput("expected a list of 2D points")
    pts = _dedupe(pts)
    if closed and len(pts) > 1:
        # A closed ring may repeat its first point at the end; drop it.
        if math.hypot(pts[0][0] - pts[-1][0], pts[0][1] - pts[-1][1]) <= _MIN_POINT_GAP:
            pts = pts[:-1]
    if len(pts) < 2:
        raise DegenerateInput("need at least 2 distinct points")
    for _ in range(2):
        pts = _chaikin_round(pts, closed)
    return _resample(pts, spacing, closed)


# === construction ===


def _slug(name):
    s = re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")
    return s or "track"


def _validate_centerline(pts):
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateInput("centerline must be a list of 2D points")
    if len(pts) < 2:
        raise DegenerateInput("centerline needs at least 2 points")
    deltas = np.diff(pts, axis=0)
    gaps = np.sqrt((deltas * deltas).sum(axis=1))
    if (gaps <= _MIN_POINT_GAP).any():
        raise DegenerateInput("consecutive centerline points coincide")


def build_track(name, centerline, width, closed, tile_count=None, waypoints=(), track_id=None):
    """Assemble and validate a Track from a smoothed centerline.

    Tiles are an equal partition of the total arc length. Waypoints must
    sit within width/2 + radius of the centerline and carry unique
    names; violations raise InvalidWaypoint.
    """
    pts = np.array(centerline, dtype=np.float64)
    _validate_centerline(pts)
    if closed:
        if math.hypot(pts[0][0] - pts[-1][0], pts[0][1] - pts[-1][1]) <= _MIN_POINT_GAP:
            pts = pts[:-1]
            _validate_centerline(pts)
    if width <= 0:
        raise DegenerateInput("width must be positive")

    bare = Track(
        track_id or _slug(name), name, pts, width, closed, tiles=(), waypoints=()
    )
    if bare.length <= _MIN_POINT_GAP:
        raise DegenerateInput("track has zero length")

    if tile_count is None:
        tile_count = max(16, int(round(bare.length / 5.0)))
    tile_count = int(tile_count)
    if tile_count < 4:
        raise DegenerateInput("tile_count must be at least 4")
    tile_len = bare.length / tile_count
    tiles = tuple(
        Tile(index=k, s_start=k * tile_len, s_end=(k + 1) * tile_len)
        for k in range(tile_count)
    )

    validated = []
    seen = set()
    for wp in waypoints:
        if not isinstance(wp, Waypoint):
            wp = Waypoint(
                name=wp["name"],
                kind=wp["kind"],
                position=(float(wp["position"][0]), float(wp["position"][1])),
                radius=float(wp.get("radius", DEFAULT_WAYPOINT_RADIUS)),
            )
        if wp.kind not in WAYPOINT_KINDS:
            raise InvalidWaypoint(f"waypoint {wp.name!r} has unknown kind {wp.kind!r}")
        if wp.radius <= 0:
            raise InvalidWaypoint(f"waypoint {wp.name!r} needs a positive radius")
        if wp.name in seen:
            raise InvalidWaypoint(f"duplicate waypoint name {wp.name!r}")
        seen.add(wp.name)
        lateral = project(bare, wp.position).lateral
        if abs(lateral) > width / 2.0 + wp.radius:
            raise InvalidWaypoint(
                f"waypoint {wp.name!r} is {abs(lateral):.2f} m from the centerline, "
                f"beyond width/2 + radius"
            )
        validated.append(wp)

    return Track(bare.id, name, pts, width, closed, tiles, tuple(validated))


# === queries ===


def project(track, point):
    """Nearest-point projection onto the centerline.

    Ties break toward smaller s. Lateral offset is signed, left of the
    direction of travel positive, and equals the full Euclidean distance
    for points beyond the endpoints of an open track.
    """
    px, py = float(point[0]), float(point[1])
    ax, ay = track.seg_ax, track.seg_ay
    dx = track.seg_bx - ax
    dy = track.seg_by - ay
    len2 = dx * dx + dy * dy
    wx = px - ax
    wy = py - ay
    t = np.clip((wx * dx + wy * dy) / len2, 0.0, 1.0)
    ex = wx - t * dx
    ey = wy - t * dy
    d2 = ex * ex + ey * ey
    i = int(np.argmin(d2))  # argmin keeps the first minimum: smaller s wins ties
    s = float(track.seg_s0[i] + t[i] * track.seg_len[i])
    dist = math.sqrt(float(d2[i]))
    cross = dx[i] * wy[i] - dy[i] * wx[i]
    lateral = dist if cross >= 0 else -dist

    tile_count = max(1, track.tile_count)
    tile_len = track.length / tile_count
    tile_index = min(int(s / tile_len), tile_count - 1)
    return Projection(s=s, lateral=lateral, tile_index=tile_index)


def is_on_track(track, point, margin=0.0):
    """True when the point lies within width/2 + margin of the centerline."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    return abs(project(track, point).lateral) <= track.width / 2.0 + margin


def point_at(track, s):
    """Centerline point at arc length s (clamped; wraps on closed tracks)."""
    if track.closed:
        s = s % track.length
    else:
        s = min(max(s, 0.0), track.length)
    i = int(np.searchsorted(track.seg_s0, s, side="right")) - 1
    i = min(max(i, 0), len(track.seg_len) - 1)
    t = (s - track.seg_s0[i]) / track.seg_len[i]
    x = track.seg_ax[i] + t * (track.seg_bx[i] - track.seg_ax[i])
    y = track.seg_ay[i] + t * (track.seg_by[i] - track.seg_ay[i])
    return (float(x), float(y))


def direction_at(track, s):
    """Unit tangent of the centerline segment containing arc length s."""
    if track.closed:
        s = s % track.length
    else:
        s = min(max(s, 0.0), track.length)
    i = int(np.searchsorted(track.seg_s0, s, side="right")) - 1
    i = min(max(i, 0), len(track.seg_len) - 1)
    dx = track.seg_bx[i] - track.seg_ax[i]
    dy = track.seg_by[i] - track.seg_ay[i]
    norm = math.hypot(dx, dy)
    return (dx / norm, dy / norm)


def min_distance_to_centerline(track, px, py):
    """Unsigned distances from arrays of points to the centerline."""
    return kernels.min_dist_to_segments(
        np.ascontiguousarray(px, dtype=np.float64),
        np.ascontiguousarray(py, dtype=np.float64),
        track.seg_ax,
        track.seg_ay,
        track.seg_bx,
        track.seg_by,
    )


# === the seven rapid tracks ===


def _turtle(start, heading, moves, step=1.0):
    """Trace straight/arc moves into a dense polyline for smoothing."""
    x, y = start
    h = heading
    pts = [(x, y)]
    for kind, *args in moves:
        if kind == "straight":
            (dist,) = args
            n = max(1, int(math.ceil(dist / step)))
            for _ in range(n):
                x += math.cos(h) * (dist / n)
                y += math.sin(h) * (dist / n)
                pts.append((x, y))
        elif kind == "arc":
            radius, angle = args  # positive angle turns left
            arc_len = abs(angle) * radius
            n = max(2, int(math.ceil(arc_len / step)))
            for _ in range(n):
                h += angle / n
                x += math.cos(h) * (arc_len / n)
                y += math.sin(h) * (arc_len / n)
                pts.append((x, y))
        else:
            raise ValueError(kind)
    return pts


def _mirror_x_axis(pts):
    return [(x, -y) for x, y in pts]


def _rapid_open(name, track_id, moves, width):
    raw = _turtle((0.0, 0.0), 0.0, moves)
    center = smooth_polyline(raw, spacing=DEFAULT_SPACING)
    return build_track(name, center, width, closed=False, track_id=track_id)


def _rapid_mirror(name, track_id, source):
    center = _mirror_x_axis(source.centerline.tolist())
    return build_track(name, center, source.width, closed=False, track_id=track_id)


def _general_loop():
    # Closed control ring: a rectangle with one deep narrow notch and one
    # broad shallow notch cut into the top edge, so a single lap contains
    # tight and wide turns in both directions.
    ring = [
        (0.0, 0.0),
        (96.0, 0.0),
        (96.0, 56.0),
        (78.0, 56.0),
        (78.0, 24.0),
        (66.0, 24.0),
        (66.0, 56.0),
        (48.0, 56.0),
        (48.0, 26.0),
        (14.0, 26.0),
        (14.0, 56.0),
        (0.0, 56.0),
    ]
    center = smooth_polyline(ring, spacing=DEFAULT_SPACING, closed=True)
    return build_track("Rapid: full loop", center, 10.0, closed=True, track_id="rapid-loop")


def builtin_rapid_tracks():
    """The seven predefined rapid-training tracks.

    Six short point-to-point courses in mirror pairs (tight turn, wide
    turn, s-curve; each in a left and a right variant, mirrored across
    the x-axis) plus one closed general-purpose loop containing tight
    and wide turns in both directions.
    """
    tight_left = _rapid_open(
        "Rapid: tight left",
        "rapid-tight-left",
        [("straight", 25.0), ("arc", 12.0, math.pi / 2), ("straight", 25.0)],
        width=8.0,
    )
    tight_right = _rapid_mirror("Rapid: tight right", "rapid-tight-right", tight_left)
    wide_left = _rapid_open(
        "Rapid: wide left",
        "rapid-wide-left",
        [("straight", 20.0), ("arc", 30.0, math.pi / 2), ("straight", 20.0)],
        width=8.0,
    )
    wide_right = _rapid_mirror("Rapid: wide right", "rapid-wide-right", wide_left)
    s_curve_lr = _rapid_open(
        "Rapid: s-curve left-right",
        "rapid-s-curve-lr",
        [
            ("straight", 14.0),
            ("arc", 18.0, math.radians(80)),
            ("arc", 18.0, -math.radians(80)),
            ("straight", 14.0),
        ],
        width=8.0,
    )
    s_curve_rl = _rapid_mirror("Rapid: s-curve right-left", "rapid-s-curve-rl", s_curve_lr)
    return [
        tight_left,
        tight_right,
        wide_left,
        wide_right,
        s_curve_lr,
        s_curve_rl,
        _general_loop(),
    ]


def bus_route_track():
    """The school-bus objective course: three pickups, then the school.

    An open, gently winding route. The school sits near but not at the
    end so the completion threshold is crossed shortly after the
    drop-off pause ends.
    """
    raw = _turtle(
        (0.0, 0.0),
        0.0,
        [
            ("straight", 30.0),
            ("arc", 40.0, math.radians(45)),
            ("straight", 25.0),
            ("arc", 40.0, -math.radians(70)),
            ("straight", 30.0),
            ("arc", 45.0, math.radians(50)),
            ("straight", 30.0),
        ],
    )
    center = smooth_polyline(raw, spacing=DEFAULT_SPACING)
    bare = build_track("School Bus Route", center, 8.0, closed=False, track_id="bus-route")
    stops = [
        ("stop1", "pickup", 0.20),
        ("stop2", "pickup", 0.45),
        ("stop3", "pickup", 0.68),
        ("school", "dropoff", 0.88),
    ]
    waypoints = [
        Waypoint(name=n, kind=k, position=point_at(bare, frac * bare.length))
        for n, k, frac in stops
    ]
    return build_track(
        "School Bus Route",
        bare.centerline,
        8.0,
        closed=False,
        tile_count=bare.tile_count,
        waypoints=waypoints,
        track_id="bus-route",
    )


# === serialization ===


def track_to_dict(track):
    return {
        "id": track.id,
        "name": track.name,
        "width": track.width,
        "closed": track.closed,
        "tileCount": track.tile_count,
        "centerline": [[float(x), float(y)] for x, y in track.centerline],
        "waypoints": [
            {
                "name": wp.name,
                "kind": wp.kind,
                "position": [float(wp.position[0]), float(wp.position[1])],
                "radius": wp.radius,
            }
            for wp in track.waypoints
        ],
    }


def track_from_dict(data):
    waypoints = []
    for wp in data.get("waypoints", []):
        kind = wp["kind"]
        if kind not in WAYPOINT_KINDS:
            raise InvalidWaypoint(f"unknown waypoint kind {kind!r}")
        waypoints.append(
            Waypoint(
                name=wp["name"],
                kind=kind,
                position=(float(wp["position"][0]), float(wp["position"][1])),
                radius=float(wp.get("radius", DEFAULT_WAYPOINT_RADIUS)),
            )
        )
    return build_track(
        data["name"],
        data["centerline"],
        float(data["width"]),
        bool(data["closed"]),
        tile_count=int(data["tileCount"]),
        waypoints=waypoints,
        track_id=data["id"],
    )


def track_to_json(track):
    return json.dumps(track_to_dict(track), separators=(",", ":"))


def track_from_json(text):
    return track_from_dict(json.loads(text))
