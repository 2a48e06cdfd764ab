"""Scenario replay, random scenario generation and timing benchmarks."""

from __future__ import annotations

import random
import time
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .admission import RejectReason, admit, evaluate
from .model import (
    DEFAULT_BI_SLOTS,
    EMPTY,
    InvalidRequestError,
    Kind,
    ReqType,
    RequestRecord,
    SystemState,
    TrafficSpec,
)
from .runtime import run_bi


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    bi_slots: int = DEFAULT_BI_SLOTS
    events: list[tuple[int, TrafficSpec]] = field(default_factory=list)
    rng_seed: int | None = None

    def validate(self) -> None:
        problems = []
        if self.bi_slots < 1:
            problems.append(f"bi_slots must be positive (got {self.bi_slots})")
        seen = set()
        last = 0
        for at, spec in self.events:
            if at < 0:
                problems.append(f"request {spec.id}: negative arrival_bi {at}")
            if at < last:
                problems.append(f"request {spec.id}: events not sorted by arrival_bi")
            last = max(last, at)
            if spec.id in seen:
                problems.append(f"duplicate request id {spec.id}")
            seen.add(spec.id)
            if self.bi_slots >= 1:
                problems += [f"request {spec.id}: {p}" for p in spec.problems(self.bi_slots)]
        if problems:
            raise ScenarioError("; ".join(problems))


@dataclass
class RequestMetrics:
    id: int
    kind: Kind
    arrival_bi: int
    admitted: bool
    reject_reason: RejectReason | None = None
    granted_total: int = 0
    # ISO: slots per period window; ASYNC: single entry
    period_grants: list[int] = field(default_factory=list)
    completion_bi: int | None = None
    deadline_misses: int = 0


@dataclass
class MetricsReport:
    bi_slots: int
    bis_simulated: int = 0
    requests: dict[int, RequestMetrics] = field(default_factory=dict)
    total_granted: int = 0
    admit_seconds: list[float] = field(default_factory=list)

    @property
    def deadline_misses(self) -> int:
        return sum(m.deadline_misses for m in self.requests.values())

    @property
    def mean_utilization(self) -> float:
        if not self.bis_simulated:
            return 0.0
        return self.total_granted / (self.bis_simulated * self.bi_slots)

    def admission_ratio(self) -> dict[str, float]:
        seen, ok = Counter(), Counter()
        for m in self.requests.values():
            seen[m.kind.value] += 1
            ok[m.kind.value] += m.admitted
        return {k: ok[k] / seen[k] for k in sorted(seen)}


class _Tracker:
    """Accumulates grants from executed schedules, per absolute BI."""

    def __init__(self, bi_slots: int):
        self.bi_slots = bi_slots
        self.per_bi: dict[int, dict[int, int]] = defaultdict(dict)
        # ISO_F: owner -> {bi: per-sub-period grants}
        self.frac: dict[int, dict[int, np.ndarray]] = defaultdict(dict)
        self.frac_den: dict[int, int] = {}

    def record(self, bi: int, slots: np.ndarray) -> int:
        owners, n = np.unique(slots, return_counts=True)
        used = 0
        for o, c in zip(owners.tolist(), n.tolist()):
            if o == EMPTY:
                continue
            self.per_bi[o][bi] = c
            used += c
            den = self.frac_den.get(o)
            if den:
                self.frac[o][bi] = (slots == o).reshape(den, -1).sum(axis=1)
        return used


def _finalize(m: RequestMetrics, spec: TrafficSpec, tr: _Tracker) -> None:
    grants = tr.per_bi.get(spec.id, {})
    start, stop = m.arrival_bi, m.arrival_bi + spec.lifetime
    outside = [b for b in grants if not start <= b < stop]
    if outside:
        raise AssertionError(f"request {spec.id} granted slots outside its life in BIs {outside}")
    m.granted_total = sum(grants.values())
    kind = spec.kind
    if kind is Kind.ISO_F:
        for b in range(start, stop):
            per = tr.frac[spec.id].get(b)
            row = [0] * spec.period_den if per is None else per.tolist()
            m.period_grants += row
    elif kind is Kind.ISO_M:
        p = spec.period_num
        for a in range(start, stop, p):
            got = sum(grants.get(b, 0) for b in range(a, min(a + p, stop)))
            m.period_grants.append(got)
            # a truncated final period carries no guarantee
            if a + p <= stop and got < spec.c_min:
                m.deadline_misses += 1
    else:
        acc = 0
        for b in range(start, stop):
            acc += grants.get(b, 0)
            if m.completion_bi is None and acc >= spec.c_min:
                m.completion_bi = b
        m.period_grants.append(acc)
        if acc < spec.c_min:
            m.deadline_misses += 1
    if kind is Kind.ISO_F:
        m.deadline_misses += sum(g < spec.c_min for g in m.period_grants)


def replay(scenario: Scenario, stop_at_bi: int | None = None, dump=None):
    """Drive admission and execution through a scenario.

    Arrivals at BI ``b`` are decided at the boundary before BI ``b`` runs.
    Stretches where the system is empty are skipped and not counted as
    simulated. ``dump``, if given, is called as ``dump(bi, mode, schedule)``
    for every executed BI. With ``stop_at_bi`` the replay halts before that
    BI and also returns the live :class:`SystemState`.
    """
    scenario.validate()
    bi = scenario.bi_slots
    state = SystemState(bi_slots=bi)
    report = MetricsReport(bi_slots=bi)
    tr = _Tracker(bi)
    specs: dict[int, TrafficSpec] = {}
    events = sorted(scenario.events, key=lambda e: e[0])
    k = 0
    while k < len(events) or not state.is_empty():
        if state.is_empty() and events[k][0] > state.current_bi:
            state.current_bi = events[k][0]
        if stop_at_bi is not None and state.current_bi >= stop_at_bi:
            break
        while k < len(events) and events[k][0] == state.current_bi:
            spec = events[k][1]
            k += 1
            t0 = time.perf_counter()
            out = admit(state, spec)
            report.admit_seconds.append(time.perf_counter() - t0)
            specs[spec.id] = spec
            report.requests[spec.id] = RequestMetrics(
                spec.id, spec.kind, state.current_bi, out.accepted, out.reason
            )
            if out.accepted and spec.kind is Kind.ISO_F:
                tr.frac_den[spec.id] = spec.period_den
        if state.is_empty():
            continue
        b = state.current_bi
        mode = "PLAYBACK" if state.active_long_schedule is not None else "PURE_EDF"
        executed, _, _ = run_bi(state)
        if dump is not None:
            dump(b, mode, executed)
        report.total_granted += tr.record(b, executed.slots)
        report.bis_simulated += 1
    for rid, m in report.requests.items():
        if m.admitted:
            _finalize(m, specs[rid], tr)
    if stop_at_bi is not None:
        return report, state
    return report


@dataclass(frozen=True)
class ScenarioRanges:
    """Inclusive ``(lo, hi)`` bounds used by :func:`generate_scenario`.

    ``*_util`` bounds are fractions of one period's (or, for ASYNC, the
    whole deadline window's) slots.
    """

    bi_slots: tuple[int, int] = (16, 1024)
    arrival_bi: tuple[int, int] = (0, 20)
    iso_f_den: tuple[int, int] = (2, 8)
    iso_m_period: tuple[int, int] = (1, 4)
    iso_m_periods_alive: tuple[int, int] = (1, 4)
    iso_f_lifetime: tuple[int, int] = (1, 12)
    async_deadline: tuple[int, int] = (1, 8)
    iso_util: tuple[float, float] = (0.02, 0.35)
    async_util: tuple[float, float] = (0.02, 0.5)
    c_max_factor: tuple[float, float] = (1.0, 2.0)

    def check(self) -> None:
        for name in self.__dataclass_fields__:
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: empty range {lo}..{hi}")
        if self.bi_slots[0] < 1 or self.arrival_bi[0] < 0:
            raise ValueError("bi_slots must be positive and arrivals non-negative")
        for name in ("iso_m_period", "iso_m_periods_alive", "iso_f_lifetime", "async_deadline"):
            if getattr(self, name)[0] < 1:
                raise ValueError(f"{name} must start at 1 or more")
        if self.iso_f_den[0] < 2:
            raise ValueError("iso_f_den must start at 2 or more")
        for name in ("iso_util", "async_util"):
            lo, hi = getattr(self, name)
            if lo <= 0 or hi > 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.c_max_factor[0] < 1:
            raise ValueError("c_max_factor must be >= 1")


KINDS = ("iso_f", "iso_m", "async")


def generate_scenario(
    seed: int,
    counts: Mapping[str, int] | int,
    ranges: ScenarioRanges | None = None,
    bi_slots: int | None = None,
) -> Scenario:
    """Random scenario, reproducible from ``seed``.

    ``counts`` is either a per-kind mapping (keys ``iso_f``, ``iso_m``,
    ``async``) or a total, in which case each request's kind is drawn
    uniformly. ISO_M lifetimes are whole numbers of periods. Ids follow
    arrival order.
    """
    ranges = ranges or ScenarioRanges()
    ranges.check()
    rng = random.Random(seed)
    if isinstance(counts, int):
        kinds = [rng.choice(KINDS) for _ in range(counts)]
    else:
        unknown = set(counts) - set(KINDS)
        if unknown:
            raise ValueError(f"unknown request kinds {sorted(unknown)}")
        kinds = [k for k in KINDS for _ in range(counts.get(k, 0))]
        rng.shuffle(kinds)
    lo_den, hi_den = ranges.iso_f_den

    def divisors(n):
        return [d for d in range(lo_den, hi_den + 1) if n % d == 0 and n // d >= 1]

    if bi_slots is None:
        for _ in range(1000):
            bi_slots = rng.randint(*ranges.bi_slots)
            if "iso_f" not in kinds or divisors(bi_slots):
                break
        else:
            raise ValueError("no bi_slots in range admits a fractional period")
    elif "iso_f" in kinds and not divisors(bi_slots):
        raise ValueError(f"bi_slots {bi_slots} has no divisor in {ranges.iso_f_den}")

    drafts = []
    for kind in kinds:
        at = rng.randint(*ranges.arrival_bi)
        if kind == "async":
            d = rng.randint(*ranges.async_deadline)
            c = max(1, int(rng.uniform(*ranges.async_util) * d * bi_slots))
            drafts.append((at, dict(req_type=ReqType.ASYNC, period_num=d, c_min=c, lifetime=d)))
            continue
        if kind == "iso_f":
            den = rng.choice(divisors(bi_slots))
            num, plen, life = 1, bi_slots // den, rng.randint(*ranges.iso_f_lifetime)
        else:
            num = rng.randint(*ranges.iso_m_period)
            den, plen = 1, num * bi_slots
            life = num * rng.randint(*ranges.iso_m_periods_alive)
        c = max(1, int(rng.uniform(*ranges.iso_util) * plen))
        cmax = max(c, int(c * rng.uniform(*ranges.c_max_factor)))
        drafts.append((at, dict(req_type=ReqType.ISO, period_num=num, period_den=den,
                                c_min=c, c_max=cmax, lifetime=life)))
    drafts.sort(key=lambda d: d[0])
    events = [(at, TrafficSpec(id=i + 1, **kw)) for i, (at, kw) in enumerate(drafts)]
    return Scenario(bi_slots, events, seed)


def benchmark_state(n_iso: int, bi_slots: int, d_max: int) -> SystemState:
    """``n_iso`` light ISO requests (alternating ISO_F halves and one-BI
    ISO_M) plus one ASYNC request pinning the horizon at ``d_max`` BIs."""
    state = SystemState(bi_slots=bi_slots)
    half = bi_slots // 2
    c = max(1, bi_slots // (8 * max(n_iso, 1)))
    for i in range(n_iso):
        if i % 2:
            spec = TrafficSpec(i + 1, ReqType.ISO, 1, c, 10 * d_max, period_den=2,
                               c_max=min(half, 2 * c))
        else:
            spec = TrafficSpec(i + 1, ReqType.ISO, 1, c, 10 * d_max, c_max=3 * c)
        state.s_iso[spec.id] = RequestRecord.admit(spec)
    a = TrafficSpec(n_iso + 1, ReqType.ASYNC, d_max, bi_slots // 4, d_max)
    state.s_async[a.id] = RequestRecord.admit(a)
    return state


def scaling_benchmark(
    n_values: Sequence[int] = (10, 20, 40, 80, 160),
    bi_slots: int = DEFAULT_BI_SLOTS,
    d_max: int = 4,
    repeats: int = 5,
) -> list[tuple[int, float]]:
    """Median wall time of one admission decision for an ASYNC probe,
    for each ISO population size."""
    rows = []
    for n in n_values:
        state = benchmark_state(n, bi_slots, d_max)
        probe = TrafficSpec(10**6, ReqType.ASYNC, d_max, bi_slots // 8, d_max)
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            evaluate(state, probe)
            times.append(time.perf_counter() - t0)
        rows.append((n, float(np.median(times))))
    return rows
