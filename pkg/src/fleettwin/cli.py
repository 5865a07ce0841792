"""Command-line entry points: run scenarios headless, verify logs, replay
them over the operator endpoint, and serve the networked hub.

Exit codes for `run`: 0 all triggered missions completed, 1 a mission ended
Aborted/Unverified (or expected missions never triggered), 2 invalid
scenario or usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .engine import run_scenario
from .scenario import ScenarioError, load_scenario
from .verify import replay_log, verify_log

BUNDLED_DIR = Path(__file__).parent / "scenarios"


def resolve_scenario(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    bundled = BUNDLED_DIR / (name + ".json")
    if bundled.exists():
        return bundled
    raise FileNotFoundError(name)


def _log_path(args) -> Path:
    if args.log:
        return Path(args.log)
    log_dir = Path(os.environ.get("FLEET_LOG_DIR", "."))
    return log_dir / "fleet_run.jsonl"


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(resolve_scenario(args.scenario))
    except (ScenarioError, FileNotFoundError) as e:
        print("invalid scenario: %s" % e, file=sys.stderr)
        return 2
    if args.seed is not None:
        scenario.seed = args.seed
        scenario.data["seed"] = args.seed
    if args.disable_m3:
        scenario.m3_enabled = False
    if args.deterministic and scenario.seed is None:
        print("deterministic mode requires a seed", file=sys.stderr)
        return 2

    log_path = _log_path(args)
    result = run_scenario(
        scenario,
        log_path=log_path,
        max_ticks=args.max_ticks,
        auto_approve=True if args.auto_approve else None,
    )
    report_path = log_path.with_suffix(".report.json")
    report_path.write_text(json.dumps({
        "scenario": scenario.name,
        "seed": scenario.seed,
        "ticks": result.ticks,
        "exit_code": result.exit_code,
        "log_hash": result.log_hash,
        "missions": result.missions,
        "resilience": result.report,
    }, indent=2, sort_keys=True) + "\n")
    print("ticks=%d hash=%s exit=%d" % (result.ticks, result.log_hash,
                                        result.exit_code))
    for m in result.missions:
        print("  %s %s -> %s" % (m["mission_id"], m["mission_type"],
                                 m["state"]))
    return result.exit_code


def cmd_verify(args) -> int:
    path = Path(args.log)
    if not path.exists():
        print("no such log: %s" % path, file=sys.stderr)
        return 2
    violations = verify_log(path)
    if not violations:
        print("pass")
        return 0
    for v in violations:
        print(v)
    return 1


def cmd_replay(args) -> int:
    path = Path(args.log)
    if not path.exists():
        print("no such log: %s" % path, file=sys.stderr)
        return 2
    if args.host:
        import asyncio
        from .net import replay_server
        asyncio.run(replay_server(path, args.host, args.port,
                                  speed=args.speed))
        return 0
    out = sys.stdout.buffer
    replay_log(path, out.write, speed=args.speed)
    out.flush()
    return 0


def cmd_serve(args) -> int:
    try:
        scenario = load_scenario(resolve_scenario(args.scenario))
    except (ScenarioError, FileNotFoundError) as e:
        print("invalid scenario: %s" % e, file=sys.stderr)
        return 2
    import asyncio
    from .net import serve_hub
    try:
        asyncio.run(serve_hub(scenario, host=args.host,
                              tcp_port=args.tcp_port,
                              http_port=args.http_port,
                              log_path=_log_path(args),
                              realtime=not args.headless,
                              speed=args.speed))
    except KeyboardInterrupt:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fleet-cli",
        description="Deterministic multi-robot fleet simulator and "
                    "digital-twin hub")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario headless")
    run_p.add_argument("--scenario", required=True,
                       help="path or bundled name (default, m3)")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--max-ticks", type=int, default=None)
    run_p.add_argument("--log", default=None)
    run_p.add_argument("--deterministic", action="store_true", default=True)
    run_p.add_argument("--auto-approve", action="store_true")
    run_p.add_argument("--headless", action="store_true", default=True)
    run_p.add_argument("--disable-m3", action="store_true")
    run_p.set_defaults(func=cmd_run)

    ver_p = sub.add_parser("verify", help="verify a log against invariants")
    ver_p.add_argument("--log", required=True)
    ver_p.set_defaults(func=cmd_verify)

    rep_p = sub.add_parser("replay", help="re-emit a log")
    rep_p.add_argument("--log", required=True)
    rep_p.add_argument("--speed", type=float, default=0.0,
                       help="0 = as fast as possible")
    rep_p.add_argument("--host", default=None,
                       help="serve the replay over the operator endpoint")
    rep_p.add_argument("--port", type=int, default=8766)
    rep_p.set_defaults(func=cmd_replay)

    srv_p = sub.add_parser("serve", help="run the networked hub")
    srv_p.add_argument("--scenario", required=True)
    srv_p.add_argument("--host", default="127.0.0.1")
    srv_p.add_argument("--tcp-port", type=int, default=8765)
    srv_p.add_argument("--http-port", type=int, default=8766)
    srv_p.add_argument("--log", default=None)
    srv_p.add_argument("--headless", action="store_true",
                       help="tick as fast as possible")
    srv_p.add_argument("--speed", type=float, default=1.0,
                       help="wall-clock speed multiplier (paced mode)")
    srv_p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
