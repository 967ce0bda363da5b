"""Benchmark harness pieces: the oval, thresholds, and tiny end-to-end
runs. The full-budget multi-seed run lives in the acceptance suite."""

import math

import numpy as np
import pytest

from ottodrive.bench import (
    BASELINE_EPISODES,
    FINAL_WINDOW,
    MIN_TILE_FRACTION,
    SeedResult,
    oval_track,
    random_baseline,
    reward_threshold,
    run_bench,
    run_seed,
    tiles_visited,
)
from ottodrive.engine import CenterlinePilot, run_episode
from ottodrive.trainer import TrainHyper

TINY = TrainHyper(horizon=64, minibatch=32)


class TestOval:
    def test_geometry(self):
        track = oval_track()
        expected = 2 * 60.0 + 2 * math.pi * 20.0
        assert track.closed
        assert track.id == "oval"
        assert track.width == 12.0
        assert 0.97 * expected <= track.length <= expected * 1.001
        assert track.tile_count == round(track.length / 5)

    def test_pilot_can_lap_it(self):
        track = oval_track()
        ep = run_episode(CenterlinePilot(cruise=5.0), track, seed=0, mode="test")
        assert ep.outcome == "completed"
        assert tiles_visited(ep) >= MIN_TILE_FRACTION * track.tile_count


class TestThreshold:
    def test_positive_baseline_tripled(self):
        assert reward_threshold(10.0) == 30.0

    def test_negative_baseline_shifted_by_three_magnitudes(self):
        assert reward_threshold(-33.7) == pytest.approx(-33.7 + 3 * 33.7)

    def test_zero_baseline(self):
        assert reward_threshold(0.0) == 0.0

    def test_threshold_always_above_baseline(self):
        for b in (-200.0, -1.0, 0.5, 40.0):
            assert reward_threshold(b) > b


class TestBaseline:
    def test_deterministic_per_seed(self):
        track = oval_track()
        a = random_baseline(track, seed=4, episodes=3)
        b = random_baseline(track, seed=4, episodes=3)
        c = random_baseline(track, seed=5, episodes=3)
        assert a == b
        assert a != c

    def test_default_episode_count(self):
        assert BASELINE_EPISODES == 20
        assert FINAL_WINDOW == 20


class TestTilesVisited:
    def test_counts_spawn_plus_new(self, straight_track):
        ep = run_episode(CenterlinePilot(), straight_track, seed=1, mode="test")
        assert ep.outcome == "completed"
        # completion demands 95% of 20 tiles; the pilot sweeps them all
        assert tiles_visited(ep) >= 19


class TestSeedResult:
    def make(self, final_mean, tile_fraction, threshold=10.0):
        return SeedResult(
            seed=0, baseline=5.0, threshold=threshold,
            final_mean=final_mean, tile_fraction=tile_fraction,
            episodes=10, wall_seconds=1.0,
        )

    def test_both_clauses_required(self):
        assert self.make(20.0, 0.9).success
        assert not self.make(5.0, 0.9).success
        assert not self.make(20.0, 0.5).success

    def test_boundaries_inclusive(self):
        assert self.make(10.0, MIN_TILE_FRACTION).success


class TestTinyRuns:
    def test_run_seed_writes_curve(self, tmp_path):
        track = oval_track()
        result = run_seed(track, seed=0, episodes=2, hyper=TINY,
                          out_dir=tmp_path)
        assert result.episodes >= 2
        assert result.wall_seconds > 0
        assert result.threshold == reward_threshold(result.baseline)
        assert 0 < result.tile_fraction <= 1.0 + 1e-9
        curve = (tmp_path / "curve_seed0.csv").read_text().splitlines()
        assert curve[0] == "episode,total_reward,steps,outcome"
        assert len(curve) - 1 == result.episodes

    def test_run_bench_summary(self, tmp_path):
        lines = []
        results, successes = run_bench(
            episodes=2, seeds=2, base_seed=3, hyper=TINY,
            out_dir=tmp_path, log=lines.append,
        )
        assert len(results) == 2
        assert [r.seed for r in results] == [3, 4]
        assert 0 <= successes <= 2
        assert successes == sum(1 for r in results if r.success)
        assert any("bench: " in ln for ln in lines)

        rows = (tmp_path / "summary.csv").read_text().splitlines()
        assert rows[0].startswith("seed,baseline,threshold")
        assert len(rows) == 3
        assert (tmp_path / "curve_seed3.csv").exists()
        assert (tmp_path / "curve_seed4.csv").exists()
