"""Command-line entry points.

Subcommands: serve, train, test, eval-objective, bench, tracks.
Exit codes: 0 success (or objective pass), 1 failure, 2 usage error.
"""

import argparse
import json
import sys
from pathlib import Path

from .dsl import compile_program, has_errors
from .engine import run_episode
from .errors import Cancelled, OttoError
from .interp import ScriptRuntime, effects_from_dict, effects_to_dict
from .objective import evaluate_objective, load_objective
from .store import Store
from .track import builtin_rapid_tracks, track_to_json


def _build_parser():
    p = argparse.ArgumentParser(
        prog="ottodrive",
        description="Toy self-driving cars: train, test, script, and serve.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("serve", help="run the training server")
    sp.add_argument("--store", required=True, help="store directory")
    sp.add_argument("--listen", default="127.0.0.1:8733", help="bind address host:port")

    tp = sub.add_parser("train", help="train a stored model on a track")
    tp.add_argument("--store", required=True)
    tp.add_argument("--model", required=True)
    tp.add_argument("--track", required=True)
    tp.add_argument("--episodes", type=int, required=True)
    tp.add_argument("--seed", type=int, default=0)
    tp.add_argument("--csv", help="training-curve CSV path (default: inside the store)")

    xp = sub.add_parser("test", help="run one greedy evaluation episode")
    xp.add_argument("--store", required=True)
    xp.add_argument("--model", required=True)
    xp.add_argument("--track", required=True)
    xp.add_argument("--seed", type=int, required=True)
    xp.add_argument("--program", help="waypoint script (.wps) to run alongside")

    ep = sub.add_parser("eval-objective", help="grade a stored episode")
    ep.add_argument("--store", required=True)
    ep.add_argument("--episode", required=True, help="composite id model:track:n")
    ep.add_argument("--objective", required=True, help="objective JSON file")
    ep.add_argument("--json", help="also write the report as JSON (for the web UI checklist)")

    bp = sub.add_parser("bench", help="learning-curve benchmark")
    bp.add_argument("--track", default="oval", choices=["oval"])
    bp.add_argument("--episodes", type=int, default=300)
    bp.add_argument("--seeds", type=int, default=10)
    bp.add_argument("--base-seed", type=int, default=0)
    bp.add_argument("--pretrain-episodes", type=int, default=0)
    bp.add_argument("--out", help="directory for per-seed curve CSVs and summary.csv")

    kp = sub.add_parser("tracks", help="list or export builtin tracks")
    kp.add_argument("--builtin", action="store_true", required=True)
    kp.add_argument("--out", help="directory to export track JSON files into")

    return p


def _cmd_serve(args):
    from .server import serve

    return serve(args.store, listen=args.listen)


def _cmd_train(args):
    from .trainer import train

    store = Store(args.store)
    model = store.get_model(args.model)
    track = store.get_track(args.track)

    def sink(episode, ordinal):
        store.put_episode(model.model_id, episode)
        print(f"episode {ordinal}: reward {episode.total_reward:.1f} "
              f"steps {len(episode.steps)} {episode.outcome}")

    try:
        _, summary = train(model, track, args.episodes, episode_sink=sink, seed=args.seed)
    except Cancelled as exc:
        store.save_model(model)
        print(f"cancelled after {exc.episodes_completed} episodes", file=sys.stderr)
        return 1
    store.save_model(model)
    csv_path = Path(args.csv) if args.csv else (
        store.root / "models" / model.model_id / f"train-{track.id}.csv"
    )
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(summary.to_csv())
    print(f"trained {len(summary.episodes)} episodes "
          f"({summary.total_steps} steps, {summary.wall_seconds:.0f}s); curve: {csv_path}")
    return 0


def _cmd_test(args):
    store = Store(args.store)
    model = store.get_model(args.model)
    track = store.get_track(args.track)
    script = None
    if args.program:
        source = Path(args.program).read_text(encoding="utf-8")
        program, diagnostics = compile_program(source, track)
        for d in diagnostics:
            print(d.format(), file=sys.stderr)
        if has_errors(diagnostics):
            return 1
        script = ScriptRuntime(program)
    episode = run_episode(
        model.net, track, args.seed,
        mode="programmed" if script else "test", script=script,
    )
    effects = effects_to_dict(script) if script else None
    composite = store.put_episode(model.model_id, episode, effects=effects)
    print(f"episode {composite}: outcome {episode.outcome}, "
          f"total reward {episode.total_reward:.6f}, steps {len(episode.steps)}")
    if script:
        for d in script.diagnostics:
            print(d.format(), file=sys.stderr)
    return 0


def _cmd_eval_objective(args):
    store = Store(args.store)
    episode, effects_dict = store.get_episode(args.episode)
    objective = load_objective(args.objective)
    track = store.get_track(episode.track_id)
    effects = effects_from_dict(effects_dict) if effects_dict is not None else None
    report = evaluate_objective(episode, effects, objective, track)
    for r in report.results:
        mark = "PASS" if r.passed else "FAIL"
        at = f" @t={r.step}" if r.step is not None else ""
        print(f"{mark} {r.id}: {r.detail}{at}")
    print(f"{report.passed_count}/{report.total} requirements passed")
    if args.json:
        Path(args.json).write_text(json.dumps(report.to_dict(), indent=1) + "\n")
    return 0 if report.passed else 1


def _cmd_bench(args):
    from .bench import run_bench

    results, successes = run_bench(
        episodes=args.episodes, seeds=args.seeds, base_seed=args.base_seed,
        pretrain_episodes=args.pretrain_episodes, out_dir=args.out,
    )
    return 0 if successes >= 0.7 * len(results) else 1


def _cmd_tracks(args):
    tracks = builtin_rapid_tracks()
    for t in tracks:
        print(f"{t.id:>18}  {t.name:<24} length {t.length:7.1f} m  "
              f"tiles {t.tile_count:3d}  width {t.width:.1f} m")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for t in tracks:
            (out / f"{t.id}.json").write_text(track_to_json(t))
        print(f"exported {len(tracks)} tracks to {out}")
    return 0


_COMMANDS = {
    "serve": _cmd_serve,
    "train": _cmd_train,
    "test": _cmd_test,
    "eval-objective": _cmd_eval_objective,
    "bench": _cmd_bench,
    "tracks": _cmd_tracks,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except OttoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
