from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ottodrive.track import build_track, smooth_polyline


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)


@pytest.fixture
def straight_track():
    """100 m straight segment, 20 tiles of 5 m each, width 8."""
    pts = [(float(x), 0.0) for x in range(0, 101, 2)]
    return build_track("Straight", pts, width=8.0, closed=False, tile_count=20,
                       track_id="straight")


@pytest.fixture
def circle_points():
    """Dense circle, radius 20, enough points that chord error is negligible."""
    n = 20000
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return [(20.0 * np.cos(t), 20.0 * np.sin(t)) for t in theta]


def make_wiggle_track(seed=7, width=6.0, tile_count=24):
    """Random smooth open track for property-style checks."""
    r = np.random.default_rng(seed)
    xs = np.arange(0.0, 120.0, 4.0)
    ys = np.cumsum(r.normal(0.0, 1.2, size=len(xs)))
    raw = list(zip(xs.tolist(), ys.tolist()))
    pts = smooth_polyline(raw, spacing=2.0)
    return build_track(f"Wiggle {seed}", pts, width=width, closed=False,
                       tile_count=tile_count, track_id=f"wiggle{seed}")
