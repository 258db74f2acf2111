"""Command-line entry points: scene generation, suite runs, and the
human-in-the-loop service."""

from __future__ import annotations

import argparse
import sys

from . import scenegen
from .harness import SuiteConfig, load_scene_dir, report_to_json, run_suite
from .scene import save_scene
from .user_sim import REGIMES


def _add_gen(sub):
    p = sub.add_parser("gen-scene", help="generate a benchmark scene file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--rooms", type=int, default=4)
    p.add_argument("--objects", type=int, default=14)
    p.add_argument("--goals", type=int, default=10)
    p.add_argument("--rows", type=int, default=36)
    p.add_argument("--cols", type=int, default=36)
    p.add_argument("--out", required=True)


def _add_run(sub):
    p = sub.add_parser("run", help="run an evaluation suite")
    p.add_argument("--scenes", required=True, help="directory of scene JSON files")
    p.add_argument("--policy", choices=["scripted", "remote"], default="scripted")
    p.add_argument("--endpoint", help="chat endpoint URL for --policy remote")
    p.add_argument("--feedback", choices=list(REGIMES), default="mixed")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--preset", choices=["orion", "cow", "vlmap", "cf"],
                   default="orion")
    p.add_argument("--ablate", default="", help="comma list from mem,exp,det,map")
    p.add_argument("--memory-in")
    p.add_argument("--memory-out")
    p.add_argument("--transcripts")
    p.add_argument("--out", default="report.json")


def _add_serve(sub):
    p = sub.add_parser("serve", help="serve live episodes over HTTP")
    p.add_argument("--scenes", required=True)
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--host", default="127.0.0.1")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ipnav")
    sub = parser.add_subparsers(dest="cmd", required=True)
    _add_gen(sub)
    _add_run(sub)
    _add_serve(sub)
    args = parser.parse_args(argv)

    if args.cmd == "gen-scene":
        params = scenegen.GenParams(rows=args.rows, cols=args.cols,
                                    n_rooms=args.rooms, n_objects=args.objects,
                                    n_goals=args.goals)
        scn = scenegen.generate_scene(args.seed, params)
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(save_scene(scn))
        print(f"wrote {args.out}: {scn.rows}x{scn.cols}, "
              f"{len(scn.objects)} objects, {len(scn.goals)} goals")
        return 0

    if args.cmd == "run":
        try:
            scenes = load_scene_dir(args.scenes)
        except Exception as e:  # noqa: BLE001
            print(f"scene load failed: {e}", file=sys.stderr)
            return 2
        ablate = frozenset(x for x in args.ablate.split(",") if x)
        cfg = SuiteConfig(
            scenes=scenes, policy=args.policy, remote_endpoint=args.endpoint,
            feedback=args.feedback, seeds=args.seeds, preset=args.preset,
            ablate=ablate, memory_in=args.memory_in, memory_out=args.memory_out,
            transcripts_dir=args.transcripts)
        report = run_suite(cfg)
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(report_to_json(report))
        print(f"N={report.n}  SR={report.sr:.1f}  SPL={report.spl:.1f}  "
              f"SIT={report.sit:.1f}  -> {args.out}")
        return 0

    if args.cmd == "serve":
        import uvicorn

        from .service import create_app

        app = create_app(args.scenes)
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
