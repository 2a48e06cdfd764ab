"""Text formats: scenario files, saved state, reports and schedule dumps.

Scenario grammar, one directive per line, ``#`` starts a comment::

    bi_slots 1024
    seed 7
    request id=1 type=ISO period=1/2 c_min=100 c_max=200 lifetime=10 arrival_bi=0
    request id=2 type=ASYNC period=3 c_min=500 lifetime=3 arrival_bi=2

``period`` is ``num/den`` BIs (``den`` defaults to 1). For ASYNC, ``c_max``
is not allowed and ``lifetime`` defaults to the deadline.
"""

from __future__ import annotations

import csv
import io
import json
from typing import Iterable, TextIO

import numpy as np

from .model import (
    EMPTY,
    BiSchedule,
    LongSchedule,
    ReqType,
    RequestRecord,
    SystemState,
    TrafficSpec,
)
from .sim import MetricsReport, Scenario


class ParseError(ValueError):
    def __init__(self, line: int, message: str, field: str | None = None):
        self.line = line
        self.field = field
        where = f"line {line}" + (f", field '{field}'" if field else "")
        super().__init__(f"{where}: {message}")


_REQUIRED = ("id", "type", "period", "c_min", "arrival_bi")
_KNOWN = set(_REQUIRED) | {"c_max", "lifetime"}


def parse_period(text: str) -> tuple[int, int]:
    num, _, den = text.partition("/")
    return int(num), int(den) if den else 1


def _int(fields: dict, key: str, lineno: int) -> int:
    try:
        return int(fields[key])
    except ValueError:
        raise ParseError(lineno, f"expected an integer, got {fields[key]!r}", key) from None


def parse_scenario(text: str, bi_slots: int | None = None) -> Scenario:
    """Parse a scenario file. ``bi_slots`` overrides the file's value."""
    file_bi = None
    seed = None
    events = []
    ids: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, *rest = line.split()
        if word in ("bi_slots", "seed"):
            if len(rest) != 1:
                raise ParseError(lineno, f"'{word}' takes one integer", word)
            try:
                value = int(rest[0])
            except ValueError:
                raise ParseError(lineno, f"expected an integer, got {rest[0]!r}", word) from None
            if word == "bi_slots":
                file_bi = value
            else:
                seed = value
            continue
        if word != "request":
            raise ParseError(lineno, f"unknown directive {word!r}")
        fields = {}
        for tok in rest:
            key, eq, value = tok.partition("=")
            if not eq or not value:
                raise ParseError(lineno, f"expected key=value, got {tok!r}")
            if key not in _KNOWN:
                raise ParseError(lineno, "unknown field", key)
            if key in fields:
                raise ParseError(lineno, "repeated field", key)
            fields[key] = value
        for key in _REQUIRED:
            if key not in fields:
                raise ParseError(lineno, "missing", key)
        rid = _int(fields, "id", lineno)
        if rid in ids:
            raise ParseError(lineno, f"duplicate request id {rid} (first on line {ids[rid]})", "id")
        ids[rid] = lineno
        try:
            req_type = ReqType(fields["type"].upper())
        except ValueError:
            raise ParseError(lineno, "must be ISO or ASYNC", "type") from None
        try:
            num, den = parse_period(fields["period"])
        except ValueError:
            raise ParseError(lineno, f"expected num/den, got {fields['period']!r}", "period") from None
        c_min = _int(fields, "c_min", lineno)
        if req_type is ReqType.ASYNC:
            if "c_max" in fields:
                raise ParseError(lineno, "not used by ASYNC requests", "c_max")
            c_max = None
            lifetime = _int(fields, "lifetime", lineno) if "lifetime" in fields else num
        else:
            c_max = _int(fields, "c_max", lineno) if "c_max" in fields else c_min
            if "lifetime" not in fields:
                raise ParseError(lineno, "missing", "lifetime")
            lifetime = _int(fields, "lifetime", lineno)
        spec = TrafficSpec(rid, req_type, num, c_min, lifetime, period_den=den, c_max=c_max)
        events.append((_int(fields, "arrival_bi", lineno), spec, lineno))
    bi = bi_slots if bi_slots is not None else file_bi
    if bi is None:
        bi = 1024
    for at, spec, lineno in events:
        problems = spec.problems(bi)
        if problems:
            raise ParseError(lineno, "; ".join(problems))
        if at < 0:
            raise ParseError(lineno, "must be >= 0", "arrival_bi")
    events.sort(key=lambda e: e[0])
    return Scenario(bi, [(at, spec) for at, spec, _ in events], seed)


def format_period(spec: TrafficSpec) -> str:
    return str(spec.period_num) if spec.period_den == 1 else f"{spec.period_num}/{spec.period_den}"


def format_scenario(scenario: Scenario) -> str:
    out = [f"bi_slots {scenario.bi_slots}"]
    if scenario.rng_seed is not None:
        out.append(f"seed {scenario.rng_seed}")
    for at, s in scenario.events:
        line = f"request id={s.id} type={s.req_type.value} period={format_period(s)} c_min={s.c_min}"
        if s.req_type is ReqType.ISO:
            line += f" c_max={s.c_max}"
        out.append(f"{line} lifetime={s.lifetime} arrival_bi={at}")
    return "\n".join(out) + "\n"


# -- schedule dumps ---------------------------------------------------------

def dump_bi(bi: int, schedule: BiSchedule, mode: str, d_max: int | None = None) -> str:
    head = f"BI {bi} bi_slots={schedule.bi_slots} mode={mode}"
    if d_max is not None:
        head += f" d_max={d_max}"
    lines = [head]
    for owner, start, length in schedule.runs():
        lines.append(f"  {start} {length} {'EMPTY' if owner is None else owner}")
    return "\n".join(lines) + "\n"


def parse_dump(text: str) -> list[tuple[int, BiSchedule]]:
    """Rebuild the schedules from :func:`dump_bi` blocks."""
    blocks: list[tuple[int, int, list]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("BI "):
            parts = line.split()
            meta = dict(p.split("=", 1) for p in parts[2:])
            blocks.append((int(parts[1]), int(meta["bi_slots"]), []))
            continue
        if not blocks:
            raise ParseError(lineno, "run before any BI header")
        start, length, owner = line.split()
        blocks[-1][2].append((None if owner == "EMPTY" else int(owner), int(start), int(length)))
    return [(bi, BiSchedule.from_runs(runs, n)) for bi, n, runs in blocks]


# -- saved state ------------------------------------------------------------

def _spec_json(s: TrafficSpec) -> dict:
    return dict(id=s.id, type=s.req_type.value, period=format_period(s), c_min=s.c_min,
                c_max=s.c_max, lifetime=s.lifetime)


def state_to_json(state: SystemState) -> str:
    recs = []
    for r in sorted(state.records(), key=lambda r: r.id):
        recs.append(dict(spec=_spec_json(r.spec), c_op=r.c_op, c_remain=r.c_remain,
                         t_remain_life=r.t_remain_life, d_curr=r.d_curr,
                         period_cop=r.period_cop))
    ls = None
    if state.active_long_schedule is not None:
        ls = dict(start_bi=state.long_schedule_start,
                  bis=[[[o, a, n] for o, a, n in b.runs()] for b in state.active_long_schedule])
    doc = dict(bi_slots=state.bi_slots, current_bi=state.current_bi, records=recs,
               long_schedule=ls)
    return json.dumps(doc, indent=1) + "\n"


def state_from_json(text: str) -> SystemState:
    doc = json.loads(text)
    state = SystemState(bi_slots=int(doc["bi_slots"]), current_bi=int(doc["current_bi"]))
    for r in doc["records"]:
        s = r["spec"]
        num, den = parse_period(s["period"])
        spec = TrafficSpec(s["id"], ReqType(s["type"]), num, s["c_min"], s["lifetime"],
                           period_den=den, c_max=s["c_max"])
        spec.validate(state.bi_slots)
        if spec.id in state:
            raise ValueError(f"duplicate request id {spec.id} in saved state")
        rec = RequestRecord(spec, r["c_op"], r["c_remain"], r["t_remain_life"], r["d_curr"],
                            r.get("period_cop"))
        state.set_for(spec)[spec.id] = rec
    ls = doc.get("long_schedule")
    if ls is not None:
        rows = [BiSchedule.from_runs([tuple(run) for run in b], state.bi_slots).slots
                for b in ls["bis"]]
        state.active_long_schedule = LongSchedule(np.stack(rows))
        state.long_schedule_start = int(ls["start_bi"])
    if (state.active_long_schedule is None) != (not state.s_async):
        raise ValueError("saved state has a long schedule iff it has ASYNC requests")
    return state


# -- reports ----------------------------------------------------------------

_COLUMNS = ("id", "kind", "arrival_bi", "admitted", "reject_reason", "granted_total",
            "completion_bi", "deadline_misses", "period_grants")


def _row(m) -> list:
    return [m.id, m.kind.value, m.arrival_bi, int(m.admitted),
            m.reject_reason.value if m.reject_reason else "",
            m.granted_total, "" if m.completion_bi is None else m.completion_bi,
            m.deadline_misses, " ".join(map(str, m.period_grants))]


def render_report(report: MetricsReport, fmt: str = "text", timing: bool = True) -> str:
    """Deterministic apart from the lines under ``[timing]``."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_COLUMNS)
        for rid in sorted(report.requests):
            w.writerow(_row(report.requests[rid]))
        return buf.getvalue()
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    lines = [
        "[summary]",
        f"bi_slots={report.bi_slots}",
        f"bis_simulated={report.bis_simulated}",
        f"requests={len(report.requests)}",
        f"admitted={sum(m.admitted for m in report.requests.values())}",
        f"total_granted={report.total_granted}",
        f"mean_utilization={report.mean_utilization:.6f}",
        f"deadline_misses={report.deadline_misses}",
    ]
    for kind, ratio in report.admission_ratio().items():
        lines.append(f"admission_ratio.{kind}={ratio:.6f}")
    for rid in sorted(report.requests):
        lines.append("")
        lines.append(f"[request {rid}]")
        for key, value in zip(_COLUMNS[1:], _row(report.requests[rid])[1:]):
            lines.append(f"{key}={value}")
    if timing:
        t = report.admit_seconds
        lines += ["", "[timing]", f"admit_calls={len(t)}",
                  f"admit_mean_us={1e6 * sum(t) / len(t) if t else 0.0:.1f}",
                  f"admit_max_us={1e6 * max(t) if t else 0.0:.1f}"]
    return "\n".join(lines) + "\n"


def write_csv_rows(fh: TextIO, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
