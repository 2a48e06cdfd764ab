"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import formats
from .admission import Mode, admit, evaluate
from .model import DEFAULT_BI_SLOTS, InvalidRequestError, ReqType, SystemState, TrafficSpec
from .sim import ScenarioError, generate_scenario, replay, scaling_benchmark

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_run(args) -> int:
    scenario = formats.parse_scenario(Path(args.scenario).read_text(), args.bi_slots)
    blocks = []

    def dump(bi, mode, schedule):
        blocks.append(formats.dump_bi(bi, schedule, mode))

    result = replay(scenario, stop_at_bi=args.stop_at_bi,
                    dump=dump if args.dump_schedule else None)
    report, state = result if args.stop_at_bi is not None else (result, None)
    text = formats.render_report(report, args.format, timing=not args.no_timing)
    if args.dump_schedule and args.dump_schedule != "-":
        Path(args.dump_schedule).write_text("".join(blocks))
    elif args.dump_schedule:
        text += "\n[schedule]\n" + "".join(blocks)
    _write(args.output, text)
    if args.save_state:
        if state is None:
            state = SystemState(bi_slots=scenario.bi_slots)
        Path(args.save_state).write_text(formats.state_to_json(state))
    return EXIT_OK


def _request_from_args(args, state: SystemState) -> TrafficSpec:
    problems = []
    try:
        num, den = formats.parse_period(args.period)
    except ValueError:
        problems.append(f"--period: expected num/den, got {args.period!r}")
        num, den = 1, 1
    req_type = ReqType(args.type)
    lifetime = args.lifetime
    if lifetime is None:
        if req_type is ReqType.ASYNC:
            lifetime = num
        else:
            problems.append("--lifetime is required for ISO requests")
            lifetime = 1
    if req_type is ReqType.ASYNC and args.c_max is not None:
        problems.append("--c-max is not used by ASYNC requests")
    rid = args.id
    if rid is None:
        rid = max((r.id for r in state.records()), default=0) + 1
    elif rid in state:
        problems.append(f"--id: duplicate request id {rid}")
    spec = TrafficSpec(rid, req_type, num, args.c_min, lifetime, period_den=den,
                       c_max=args.c_max)
    problems += spec.problems(state.bi_slots)
    if problems:
        raise InvalidRequestError(problems)
    return spec


def cmd_admit(args) -> int:
    path = Path(args.state)
    if args.new and not path.exists():
        state = SystemState(bi_slots=args.bi_slots or DEFAULT_BI_SLOTS)
    else:
        state = formats.state_from_json(path.read_text())
    spec = _request_from_args(args, state)
    outcome = admit(state, spec) if args.commit else evaluate(state, spec)
    if not outcome.accepted:
        line = f"REJECT reason={outcome.reason.value}"
        w = outcome.witness
        if w is not None:
            line += f" request={w.request_id} slot={w.slot} demand={w.demand} available={w.available}"
    elif outcome.mode is Mode.EDF_WITH_COP:
        cops = ",".join(f"{k}:{v}" for k, v in sorted(outcome.c_op_map.items()))
        line = f"ACCEPT mode=EDF id={spec.id} c_op={cops}"
    else:
        ls = outcome.long_schedule
        line = (f"ACCEPT mode=LONG_SCHEDULE id={spec.id} d_max={ls.d_max} "
                f"empty_slots={ls.empty_count()}")
    print(line)
    if args.commit:
        path.write_text(formats.state_to_json(state))
    return EXIT_OK


def cmd_bench(args) -> int:
    ns = [int(n) for n in args.n.split(",")]
    rows = scaling_benchmark(ns, args.bi_slots or DEFAULT_BI_SLOTS, args.d_max, args.repeats)
    if args.format == "csv":
        formats.write_csv_rows(sys.stdout, ("n_iso", "admit_seconds"),
                               ((n, f"{t:.6e}") for n, t in rows))
    else:
        for n, t in rows:
            print(f"n_iso={n} admit_ms={1e3 * t:.3f}")
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.count is not None:
        counts = args.count
    else:
        counts = {"iso_f": args.iso_f, "iso_m": args.iso_m, "async": args.n_async}
    scenario = generate_scenario(args.seed, counts, bi_slots=args.bi_slots)
    _write(args.output, formats.format_scenario(scenario))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eaciar", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="replay a scenario file")
    r.add_argument("scenario")
    r.add_argument("--bi-slots", type=int, help="override the file's bi_slots")
    r.add_argument("--format", choices=("text", "csv"), default="text")
    r.add_argument("--output", "-o")
    r.add_argument("--dump-schedule", nargs="?", const="-", metavar="PATH",
                   help="write one block per executed BI (default: after the report)")
    r.add_argument("--no-timing", action="store_true", help="omit wall-time fields")
    r.add_argument("--stop-at-bi", type=int)
    r.add_argument("--save-state", metavar="PATH")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("admit", help="what-if admission against a saved state")
    a.add_argument("state")
    a.add_argument("--type", choices=("ISO", "ASYNC"), required=True, type=str.upper)
    a.add_argument("--period", required=True, help="num/den BIs; ASYNC: deadline")
    a.add_argument("--c-min", type=int, required=True)
    a.add_argument("--c-max", type=int)
    a.add_argument("--lifetime", type=int)
    a.add_argument("--id", type=int)
    a.add_argument("--commit", action="store_true", help="save the state if accepted")
    a.add_argument("--new", action="store_true", help="start from an empty state if missing")
    a.add_argument("--bi-slots", type=int)
    a.set_defaults(func=cmd_admit)

    b = sub.add_parser("bench", help="admission time versus ISO population")
    b.add_argument("--n", default="10,20,40,80,160")
    b.add_argument("--bi-slots", type=int)
    b.add_argument("--d-max", type=int, default=4)
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--format", choices=("text", "csv"), default="csv")
    b.set_defaults(func=cmd_bench)

    g = sub.add_parser("generate", help="write a random scenario")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--count", type=int)
    g.add_argument("--iso-f", type=int, default=0)
    g.add_argument("--iso-m", type=int, default=0)
    g.add_argument("--async", dest="n_async", type=int, default=0)
    g.add_argument("--bi-slots", type=int)
    g.add_argument("--output", "-o")
    g.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (formats.ParseError, ScenarioError, InvalidRequestError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
