"""Learning-curve benchmark harness.

Runs fresh models on a closed oval for a fixed episode budget across
several seeds and grades each seed on two clauses: the greedy policy
after training covers at least MIN_TILE_FRACTION of the tiles, and the
mean total reward over the final 20 training episodes clears a
threshold derived from the random-policy baseline (an untrained net
sampling actions through the same harness).

The baseline on this reward scheme is negative (random drivers wander
off-track), so "3x baseline" is applied to its magnitude: threshold =
3 * baseline for a positive baseline, else baseline + 3 * |baseline|.
Emits one training-curve CSV per seed plus a summary CSV.
"""

import csv
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import run_episode
from .net import NetConfig, PolicyModel, PolicyNet
from .track import build_track, smooth_polyline, _turtle
from .trainer import TrainHyper, train

OVAL_STRAIGHT = 60.0
OVAL_RADIUS = 20.0
OVAL_WIDTH = 12.0

BASELINE_EPISODES = 20
FINAL_WINDOW = 20
MIN_TILE_FRACTION = 0.8


def oval_track():
    """Closed capsule: two straights joined by two half-circle turns."""
    moves = [
        ("straight", OVAL_STRAIGHT),
        ("arc", OVAL_RADIUS, math.pi),
        ("straight", OVAL_STRAIGHT),
        ("arc", OVAL_RADIUS, math.pi),
    ]
    raw = _turtle((0.0, 0.0), 0.0, moves)
    center = smooth_polyline(raw, closed=True)
    return build_track("oval", center, OVAL_WIDTH, closed=True, track_id="oval")


def fresh_model(seed, name="bench"):
    net = PolicyNet(config=NetConfig(), seed=int(seed))
    return PolicyModel(net=net, model_id=f"bench-s{seed}", name=name)


def random_baseline(track, seed, episodes=BASELINE_EPISODES):
    """Mean total reward of an untrained net sampling actions."""
    model = fresh_model(seed)
    rng = np.random.default_rng(int(seed) ^ 0x5EED)
    totals = []
    for _ in range(episodes):
        ep_seed = int(rng.integers(0, 2**31 - 1))
        ep = run_episode(model.net, track, ep_seed, mode="train")
        totals.append(ep.total_reward)
    return float(np.mean(totals))


def reward_threshold(baseline):
    if baseline > 0:
        return 3.0 * baseline
    return baseline + 3.0 * abs(baseline)


def tiles_visited(episode):
    # spawn tile is pre-visited and never appears in newTiles
    return 1 + sum(len(rec.new_tiles) for rec in episode.steps)


@dataclass
class SeedResult:
    seed: int
    baseline: float
    threshold: float
    final_mean: float
    tile_fraction: float
    episodes: int
    wall_seconds: float

    @property
    def reward_ok(self):
        return self.final_mean >= self.threshold

    @property
    def tiles_ok(self):
        return self.tile_fraction >= MIN_TILE_FRACTION

    @property
    def success(self):
        return self.reward_ok and self.tiles_ok


def run_seed(track, seed, episodes, hyper=None, pretrain_episodes=0, out_dir=None):
    started = time.monotonic()
    baseline = random_baseline(track, seed)
    model = fresh_model(seed)
    if pretrain_episodes > 0:
        train(model, track, pretrain_episodes, hyper=hyper, seed=int(seed) + 90001)
    _, summary = train(model, track, episodes, hyper=hyper, seed=seed)
    rewards = summary.rewards()
    final = rewards[-FINAL_WINDOW:] if len(rewards) >= FINAL_WINDOW else rewards
    final_mean = float(np.mean(final))
    eval_ep = run_episode(model.net, track, seed=12345, mode="test")
    frac = tiles_visited(eval_ep) / track.tile_count
    result = SeedResult(
        seed=seed,
        baseline=baseline,
        threshold=reward_threshold(baseline),
        final_mean=final_mean,
        tile_fraction=frac,
        episodes=len(rewards),
        wall_seconds=time.monotonic() - started,
    )
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"curve_seed{seed}.csv").write_text(summary.to_csv())
    return result


def run_bench(track=None, episodes=300, seeds=10, base_seed=0, hyper=None,
              pretrain_episodes=0, out_dir=None, log=print):
    """Returns (results, successes). Writes summary.csv when out_dir given."""
    track = track if track is not None else oval_track()
    results = []
    for i in range(seeds):
        seed = base_seed + i
        r = run_seed(track, seed, episodes, hyper=hyper,
                     pretrain_episodes=pretrain_episodes, out_dir=out_dir)
        results.append(r)
        log(
            f"seed {r.seed}: baseline {r.baseline:.1f} threshold {r.threshold:.1f} "
            f"final20 {r.final_mean:.1f} tiles {r.tile_fraction:.0%} "
            f"{'PASS' if r.success else 'FAIL'} ({r.wall_seconds:.0f}s)"
        )
    successes = sum(1 for r in results if r.success)
    log(f"bench: {successes}/{seeds} seeds passed")
    if out_dir is not None:
        path = Path(out_dir) / "summary.csv"
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow([
                "seed", "baseline", "threshold", "final20_mean",
                "tile_fraction", "episodes", "wall_seconds", "success",
            ])
            for r in results:
                w.writerow([
                    r.seed, r.baseline, r.threshold, r.final_mean,
                    r.tile_fraction, r.episodes, round(r.wall_seconds, 1),
                    int(r.success),
                ])
    return results, successes
