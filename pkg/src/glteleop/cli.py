"""Command-line front end: run scenarios, replay logs, serve the console.

`run` prints one tab-delimited row per waypoint plus a summary row, so the
output pipes cleanly into cut/awk; `--report` adds a JSON report file,
`--log` the replayable tick log, and `--figures` a directory of rendered
PNGs alongside the delimited output.

Exit codes: 0 success, 1 scenario/replay failure, 2 usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from .harness import replay_log, report_to_dict, run_scenario
from .scenario import (
    ScenarioError,
    ScenarioScript,
    builtin_scenario_names,
    load_builtin_scenario,
    load_scenario,
)


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def _resolve_scenario(name: str) -> ScenarioScript:
    path = Path(name)
    if path.exists():
        return load_scenario(path)
    if name in builtin_scenario_names():
        return load_builtin_scenario(name)
    raise ScenarioError(
        f"{name}: no such file or built-in scenario "
        f"(built-ins: {', '.join(builtin_scenario_names())})"
    )


# ---- subcommands ----


def _cmd_run(args) -> int:
    script = _resolve_scenario(args.scenario)
    report = run_scenario(script, log_path=args.log, figures_dir=args.figures)
    if args.report is not None:
        Path(args.report).write_text(json.dumps(report_to_dict(report), indent=2) + "\n")
    for w in report.waypoints:
        print(
            "\t".join(
                [
                    "waypoint",
                    _fmt(w.index),
                    _fmt(w.deadline),
                    _fmt(w.position_error),
                    _fmt(w.rotation_error),
                    _fmt(w.completed),
                    _fmt(w.completion_time),
                ]
            )
        )
    summary = [
        "summary",
        report.scenario,
        _fmt(report.ticks),
        _fmt(report.passed),
        _fmt(report.mode_switches),
        _fmt(report.max_switch_jump),
        _fmt(report.ik_failures),
        _fmt(len(report.estop_events)),
        report.log_digest,
    ]
    print("\t".join(summary))
    for text in report.estop_events + report.error_replies:
        print(f"note\t{text}", file=sys.stderr)
    return 0 if report.passed else 1


def _cmd_replay(args) -> int:
    verdict = replay_log(args.log)
    print(
        "\t".join(
            [
                "replay",
                _fmt(verdict.passed),
                _fmt(verdict.failing_tick),
                verdict.digest,
                verdict.detail,
            ]
        )
    )
    return 0 if verdict.passed else 1


def _cmd_scenarios(args) -> int:
    for name in builtin_scenario_names():
        print(name)
    return 0


def _cmd_hand_template(args) -> int:
    from importlib import resources

    text = (resources.files("glteleop") / "data" / "hand_default.yaml").read_text()
    Path(args.out).write_text(text)
    print(f"wrote {args.out}")
    return 0


def _cmd_serve(args) -> int:
    from .server import serve_forever

    return serve_forever(
        host=args.host, tcp_port=args.port, ws_port=args.ws_port,
        session=args.session, model=args.model, decoupling=args.decoupling,
        console_dir=args.console,
    )


# ---- entry point ----


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glteleop",
        description="Global-Local teleoperation: scenario runner, replay, server.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario (file path or built-in name)")
    p_run.add_argument("scenario")
    p_run.add_argument("--log", default=None, help="write the replayable tick log here")
    p_run.add_argument("--report", default=None, help="write a JSON report here")
    p_run.add_argument("--figures", default=None, metavar="DIR",
                       help="render run figures into DIR")
    p_run.set_defaults(func=_cmd_run)

    p_replay = sub.add_parser("replay", help="re-execute a tick log and compare")
    p_replay.add_argument("log")
    p_replay.set_defaults(func=_cmd_replay)

    p_list = sub.add_parser("scenarios", help="list built-in scenarios")
    p_list.set_defaults(func=_cmd_scenarios)

    p_hand = sub.add_parser("hand-template",
                            help="write the default hand calibration for editing")
    p_hand.add_argument("out")
    p_hand.set_defaults(func=_cmd_hand_template)

    p_serve = sub.add_parser("serve", help="run the live session server")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=7460, help="TCP frame port")
    p_serve.add_argument("--ws-port", type=int, default=7461,
                         help="websocket/console port")
    p_serve.add_argument("--session", default="live")
    p_serve.add_argument("--model", default="piper6")
    p_serve.add_argument("--decoupling", default="temporal",
                         choices=["temporal", "spatial"])
    p_serve.add_argument("--console", default=None, metavar="DIR",
                         help="serve this directory as the web console")
    p_serve.set_defaults(func=_cmd_serve)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, OSError, ValueError) as exc:
        print(f"glteleop: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
