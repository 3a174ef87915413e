"""Command-line front end: simulate | bench | game.

``simulate`` runs one configured anycast and writes the observer
transcript as line-delimited JSON; the exit code distinguishes delivery
from every abort cause. ``bench`` times the per-step microbenchmarks and
writes CSV plus JSON. ``game`` runs a privacy-game suite (or the full
implication matrix) and fails the process when a leak is detected.
"""

import argparse
import json
import sys

from . import bench, games
from .channels import transcript_lines
from .protocol import AbortReason
from .scenarios import ConfigError, load_scenario, run_scenario

EXIT_OK = 0
EXIT_GAME_FAIL = 1
EXIT_CONFIG = 2
EXIT_INVALID_SIGNATURE = 10
EXIT_DUPLICATE_KEY = 11
EXIT_LINKED_KEYS = 12
EXIT_TIMEOUT = 13
EXIT_DUPLICATE_VK = 14
EXIT_INTEGRITY = 15
EXIT_STALLED = 16

_ABORT_CODES = {
    AbortReason.INVALID_SIGNATURE: EXIT_INVALID_SIGNATURE,
    AbortReason.DUPLICATE_KEY: EXIT_DUPLICATE_KEY,
    AbortReason.LINKED_KEYS: EXIT_LINKED_KEYS,
    AbortReason.TIMEOUT: EXIT_TIMEOUT,
    AbortReason.DUPLICATE_VK: EXIT_DUPLICATE_VK,
}

_GAME_SUITES = {
    "mc": (games.ReadOffMc, games.ByteFrequencyMc, games.UniformGuessMc),
    "ra": (games.TranscriptRa, games.UniformGuessRa),
    "f": (games.FirstMemberF, games.UniformGuessF),
}
_GAME_RUNNERS = {"mc": games.run_mc_game, "ra": games.run_ra_game, "f": games.run_f_game}


def result_exit_code(result) -> int:
    if result.outcome == "delivered":
        return EXIT_OK
    if result.outcome == "aborted":
        return _ABORT_CODES[result.reason]
    return EXIT_INTEGRITY if result.integrity_violations > 0 else EXIT_STALLED


def _cmd_simulate(args) -> int:
    try:
        scenario = load_scenario(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = run_scenario(scenario, seed=args.seed)
    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write(transcript_lines(result.transcript))
    print(json.dumps(result.to_record(), sort_keys=True))
    return result_exit_code(result)


def _cmd_bench(args) -> int:
    receiver_counts = _parse_int_list(args.receivers)
    steps = tuple(s.strip() for s in args.steps.split(",")) if args.steps else bench.STEP_NAMES
    try:
        report = bench.run_benchmarks(steps=steps, receiver_counts=receiver_counts,
                                      repetitions=args.reps, seed=args.seed)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(report.to_csv())
        json_path = args.out.rsplit(".", 1)[0] + ".json"
        with open(json_path, "w", encoding="utf-8") as handle:
            handle.write(report.to_json())
    print(report.to_json(), end="")
    return EXIT_OK


def _cmd_game(args) -> int:
    workers = args.workers if args.workers else games.auto_workers()
    if args.game == "matrix":
        report = games.check_implication_matrix(
            seed=args.seed, rounds=args.rounds, workers=workers,
            receivers=args.receivers)
        payload = report.to_json_dict()
        _emit_report(payload, args.out)
        return EXIT_OK if report.ok else EXIT_GAME_FAIL
    if not args.protocol:
        print("config error: --protocol is required for mc/ra/f", file=sys.stderr)
        return EXIT_CONFIG
    challenge = games.default_challenge(args.game, receivers=args.receivers)
    rounds = args.rounds or 500
    estimates = []
    for adversary_cls in _GAME_SUITES[args.game]:
        adversary = adversary_cls(challenge)
        estimate = _GAME_RUNNERS[args.game](args.protocol, adversary, rounds,
                                            args.seed, workers=workers)
        estimates.append(estimate)
    verdict = "PASS" if all(e.passed for e in estimates) else "FAIL"
    payload = {
        "game": args.game,
        "protocol": args.protocol,
        "rounds": rounds,
        "adversaries": [e.to_json_dict() for e in estimates],
        "verdict": verdict,
    }
    _emit_report(payload, args.out)
    return EXIT_OK if verdict == "PASS" else EXIT_GAME_FAIL


def _emit_report(payload: dict, out_path) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")


def _parse_int_list(raw: str) -> tuple:
    try:
        return tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"not a comma-separated integer list: {raw!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panini",
        description="Anonymous anycast simulator, privacy games, and benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one configured anycast")
    p_sim.add_argument("--config", required=True, help="scenario JSON path")
    p_sim.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    p_sim.add_argument("--out", default="transcript.jsonl",
                       help="transcript output path (line-delimited JSON)")
    p_sim.set_defaults(fn=_cmd_simulate)

    p_bench = sub.add_parser("bench", help="run the step microbenchmarks")
    p_bench.add_argument("--receivers", default="10,20,40",
                         help="comma-separated candidate counts")
    p_bench.add_argument("--reps", type=int, default=bench.DEFAULT_REPETITIONS)
    p_bench.add_argument("--steps", default=None,
                         help="comma-separated subset of steps (default all)")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", default=None, help="CSV output path")
    p_bench.set_defaults(fn=_cmd_bench)

    p_game = sub.add_parser("game", help="run a privacy-game suite")
    p_game.add_argument("--game", required=True, choices=("mc", "ra", "f", "matrix"))
    p_game.add_argument("--protocol", default=None,
                        choices=("panini", "p1", "p2", "p5", "ideal"))
    p_game.add_argument("--rounds", type=int, default=None)
    p_game.add_argument("--seed", type=int, default=0)
    p_game.add_argument("--receivers", type=int, default=8,
                        help="candidate count l for the default challenge")
    p_game.add_argument("--workers", type=int, default=None)
    p_game.add_argument("--out", default=None, help="JSON report path")
    p_game.set_defaults(fn=_cmd_game)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry() -> None:
    sys.exit(main())
