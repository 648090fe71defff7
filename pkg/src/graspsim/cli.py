"""Command-line interface.

Subcommands:

* ``serve --bind host:port``                       -- live session server
* ``run --config c.json --script s.txt [--out f]`` -- scripted transcript
* ``snapshot --config c.json --out-prefix p``      -- PPM/PGM scene snapshot
* ``report --config c.json [--script s.txt] --out-dir d`` -- transcript plus figures

``--seed N`` overrides the config seed everywhere it applies.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import GraspSimError
from .geometry import top_down_camera_pose
from .session import SessionConfig, run_transcript


def _load_config(path: str, seed: int | None) -> SessionConfig:
    config = SessionConfig.from_file(path)
    if seed is not None:
        config = replace(config, seed=seed)
    return config


def _read_script(path: str | None) -> str:
    if path is None:
        return ""
    return Path(path).read_text("utf-8")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graspsim",
                                     description="Deterministic interactive robot-grasping simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the live session server")
    p_serve.add_argument("--bind", default="127.0.0.1:7423", help="host:port to listen on")

    p_run = sub.add_parser("run", help="replay a script into a transcript")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--script", required=True)
    p_run.add_argument("--out", help="write the transcript here instead of stdout")
    p_run.add_argument("--seed", type=int)

    p_snap = sub.add_parser("snapshot", help="write PPM/PGM snapshots of the configured scene")
    p_snap.add_argument("--config", required=True)
    p_snap.add_argument("--out-prefix", required=True)
    p_snap.add_argument("--seed", type=int)

    p_report = sub.add_parser("report", help="replay a script and render report figures")
    p_report.add_argument("--config", required=True)
    p_report.add_argument("--script")
    p_report.add_argument("--out-dir", required=True)
    p_report.add_argument("--seed", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            from .server import serve
            serve(args.bind)
        elif args.command == "run":
            config = _load_config(args.config, args.seed)
            transcript = run_transcript(config, _read_script(args.script))
            if args.out:
                Path(args.out).write_text(transcript, encoding="utf-8")
            else:
                sys.stdout.write(transcript)
        elif args.command == "snapshot":
            from .snapshot import snapshot
            config = _load_config(args.config, args.seed)
            cam = top_down_camera_pose(config.camera_height)
            paths = snapshot(config.scene, cam, config.intrinsics, args.out_prefix)
            for path in paths:
                print(path)
        elif args.command == "report":
            from .report import generate_report
            config = _load_config(args.config, args.seed)
            paths = generate_report(config, _read_script(args.script), args.out_dir)
            for path in paths:
                print(path)
    except GraspSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
