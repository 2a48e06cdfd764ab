"""Domain types and request-table bookkeeping.

A beacon interval (BI) is modelled as ``bi_slots`` contiguous 1 us slots.
Slots are indexed from 0. A slot holds either :data:`EMPTY` or the integer
id of the request that owns it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Iterator

import numpy as np

EMPTY = -1
DEFAULT_BI_SLOTS = 1024


class InvalidRequestError(ValueError):
    """A traffic spec violates its invariants or clashes with the system."""

    def __init__(self, problems: list[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ReqType(str, enum.Enum):
    ISO = "ISO"
    ASYNC = "ASYNC"


class Kind(str, enum.Enum):
    """Structural request class derived from type and period."""

    ISO_M = "ISO_M"
    ISO_F = "ISO_F"
    ASYNC = "ASYNC"


@dataclass(frozen=True)
class TrafficSpec:
    """Immutable parameters of an arriving request.

    The period is ``period_num / period_den`` BIs. ASYNC requests use
    ``period_num`` as their deadline and must have ``lifetime == period_num``.
    ``c_max`` is ignored for ASYNC and defaults to ``c_min``.
    """

    id: int
    req_type: ReqType
    period_num: int
    c_min: int
    lifetime: int
    period_den: int = 1
    c_max: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "req_type", ReqType(self.req_type))
        if self.c_max is None or self.req_type is ReqType.ASYNC:
            object.__setattr__(self, "c_max", self.c_min)

    @property
    def kind(self) -> Kind:
        if self.req_type is ReqType.ASYNC:
            return Kind.ASYNC
        if self.period_den > 1:
            return Kind.ISO_F
        return Kind.ISO_M

    @property
    def period(self) -> Fraction:
        """Period (or deadline) in BIs."""
        return Fraction(self.period_num, self.period_den)

    def period_slots(self, bi_slots: int) -> int:
        return self.period_num * bi_slots // self.period_den

    def utilization(self, bi_slots: int) -> Fraction:
        return Fraction(self.c_min * self.period_den, self.period_num * bi_slots)

    def problems(self, bi_slots: int) -> list[str]:
        """Return every violated invariant; empty when the request is valid."""
        out = []
        if self.period_num < 1:
            out.append(f"period_num must be >= 1 (got {self.period_num})")
        if self.period_den < 1:
            out.append(f"period_den must be >= 1 (got {self.period_den})")
        if self.c_min < 1:
            out.append(f"c_min must be >= 1 (got {self.c_min})")
        if self.lifetime < 1:
            out.append(f"lifetime must be >= 1 (got {self.lifetime})")
        if out:
            return out
        if self.req_type is ReqType.ASYNC:
            if self.period_den != 1:
                out.append("ASYNC period must be a whole number of BIs")
            elif self.lifetime != self.period_num:
                out.append(
                    f"ASYNC lifetime ({self.lifetime}) must equal its deadline "
                    f"({self.period_num})"
                )
            elif self.c_min > self.period_num * bi_slots:
                out.append(f"c_min {self.c_min} exceeds the deadline window")
            return out
        if self.c_max < self.c_min:
            out.append(f"c_max ({self.c_max}) must be >= c_min ({self.c_min})")
        if self.period_den > 1:
            if self.period_num != 1:
                out.append("fractional ISO period must be 1/den of a BI")
            elif bi_slots % self.period_den:
                out.append(
                    f"period 1/{self.period_den} does not divide a BI of "
                    f"{bi_slots} slots"
                )
            elif self.c_min > bi_slots // self.period_den:
                out.append(f"c_min {self.c_min} exceeds the period length")
        elif self.c_min > self.period_num * bi_slots:
            out.append(f"c_min {self.c_min} exceeds the period length")
        return out

    def validate(self, bi_slots: int) -> None:
        problems = self.problems(bi_slots)
        if problems:
            raise InvalidRequestError([f"request {self.id}: {p}" for p in problems])


@dataclass
class RequestRecord:
    """Mutable request-table entry.

    ``c_remain`` and ``d_curr`` are only meaningful for ISO_M and ASYNC
    records and stay 0 for ISO_F. ``period_cop`` is the lowest ``c_op`` an
    ISO_M record has held since its current period started under plain EDF;
    ``None`` means the period only carries its ``c_remain`` (it began while
    a long schedule was in force).
    """

    spec: TrafficSpec
    c_op: int
    c_remain: int
    t_remain_life: int
    d_curr: int
    period_cop: int | None = None

    @classmethod
    def admit(cls, spec: TrafficSpec) -> RequestRecord:
        if spec.kind is Kind.ISO_F:
            return cls(spec, spec.c_min, 0, spec.lifetime, 0)
        return cls(spec, spec.c_min, spec.c_min, spec.lifetime, spec.period_num)

    @property
    def id(self) -> int:
        return self.spec.id

    @property
    def kind(self) -> Kind:
        return self.spec.kind

    def copy(self) -> RequestRecord:
        return replace(self)


@dataclass(frozen=True)
class Job:
    """One allocation instance of a request.

    ``release`` and ``deadline`` are slot offsets relative to the start of
    the window being scheduled; the job may use slots in
    ``[release, deadline)``.
    """

    owner: int
    release: int
    deadline: int
    demand: int


def expand_iso_f_jobs(
    record: RequestRecord, bi_slots: int, demand: int | None = None
) -> list[Job]:
    """Jobs of an ISO_F record within one BI, ordered by release."""
    if record.kind is not Kind.ISO_F:
        raise ValueError(f"request {record.id} is {record.kind.value}, not ISO_F")
    ps = record.spec.period_slots(bi_slots)
    d = record.spec.c_min if demand is None else demand
    return [
        Job(record.id, k * ps, (k + 1) * ps, d)
        for k in range(record.spec.period_den)
    ]


def fill_earliest(
    slots: np.ndarray, start: int, stop: int, demand: int, owner: int
) -> int:
    """Give ``owner`` up to ``demand`` empty slots of ``slots[start:stop]``,
    lowest index first. Returns the number of slots granted."""
    if demand <= 0 or start >= stop:
        return 0
    free = np.flatnonzero(slots[start:stop] == EMPTY)[:demand]
    slots[start + free] = owner
    return len(free)


@dataclass(eq=False)
class BiSchedule:
    """Slot occupancy of one BI."""

    slots: np.ndarray

    @classmethod
    def empty(cls, bi_slots: int) -> BiSchedule:
        return cls(np.full(bi_slots, EMPTY, dtype=np.int64))

    @property
    def bi_slots(self) -> int:
        return len(self.slots)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BiSchedule):
            return NotImplemented
        return np.array_equal(self.slots, other.slots)

    def owned_by(self, owner: int) -> int:
        return int(np.count_nonzero(self.slots == owner))

    def counts(self) -> dict[int, int]:
        """Slots held per owner, empty slots excluded."""
        owners, n = np.unique(self.slots, return_counts=True)
        return {int(o): int(c) for o, c in zip(owners, n) if o != EMPTY}

    def empty_count(self) -> int:
        return int(np.count_nonzero(self.slots == EMPTY))

    def runs(self) -> list[tuple[int | None, int, int]]:
        """Maximal runs as ``(owner or None, start, length)`` covering the BI."""
        s = self.slots
        if len(s) == 0:
            return []
        edges = np.flatnonzero(np.diff(s)) + 1
        starts = np.concatenate(([0], edges))
        ends = np.concatenate((edges, [len(s)]))
        return [
            (None if s[a] == EMPTY else int(s[a]), int(a), int(b - a))
            for a, b in zip(starts, ends)
        ]

    @classmethod
    def from_runs(
        cls, runs: Iterable[tuple[int | None, int, int]], bi_slots: int
    ) -> BiSchedule:
        out = cls.empty(bi_slots)
        pos = 0
        for owner, start, length in runs:
            if start != pos or length < 1:
                raise ValueError(f"runs are not contiguous at slot {start}")
            out.slots[start:start + length] = EMPTY if owner is None else owner
            pos = start + length
        if pos != bi_slots:
            raise ValueError(f"runs cover {pos} of {bi_slots} slots")
        return out

    def copy(self) -> BiSchedule:
        return BiSchedule(self.slots.copy())


@dataclass(eq=False)
class LongSchedule:
    """``d_max`` consecutive BI schedules, stored as one 2-D array."""

    slots: np.ndarray

    @classmethod
    def empty(cls, d_max: int, bi_slots: int) -> LongSchedule:
        return cls(np.full((d_max, bi_slots), EMPTY, dtype=np.int64))

    @property
    def d_max(self) -> int:
        return self.slots.shape[0]

    @property
    def bi_slots(self) -> int:
        return self.slots.shape[1]

    @property
    def flat(self) -> np.ndarray:
        return self.slots.reshape(-1)

    @property
    def bis(self) -> list[BiSchedule]:
        return [BiSchedule(row.copy()) for row in self.slots]

    def bi(self, i: int) -> BiSchedule:
        return BiSchedule(self.slots[i].copy())

    def empty_count(self) -> int:
        return int(np.count_nonzero(self.slots == EMPTY))

    def __eq__(self, other) -> bool:
        if not isinstance(other, LongSchedule):
            return NotImplemented
        return np.array_equal(self.slots, other.slots)

    def __iter__(self) -> Iterator[BiSchedule]:
        return iter(self.bis)

    def copy(self) -> LongSchedule:
        return LongSchedule(self.slots.copy())


@dataclass
class SystemState:
    """Everything the admission controller keeps between calls."""

    bi_slots: int = DEFAULT_BI_SLOTS
    current_bi: int = 0
    s_iso: dict[int, RequestRecord] = field(default_factory=dict)
    s_async: dict[int, RequestRecord] = field(default_factory=dict)
    active_long_schedule: LongSchedule | None = None
    long_schedule_start: int = 0

    def __post_init__(self):
        if self.bi_slots < 1:
            raise ValueError(f"bi_slots must be positive (got {self.bi_slots})")

    def records(self) -> list[RequestRecord]:
        return [*self.s_iso.values(), *self.s_async.values()]

    def get(self, rid: int) -> RequestRecord | None:
        return self.s_iso.get(rid) or self.s_async.get(rid)

    def __contains__(self, rid: int) -> bool:
        return rid in self.s_iso or rid in self.s_async

    def is_empty(self) -> bool:
        return not self.s_iso and not self.s_async

    def set_for(self, spec: TrafficSpec) -> dict[int, RequestRecord]:
        return self.s_async if spec.req_type is ReqType.ASYNC else self.s_iso

    def copy(self) -> SystemState:
        return SystemState(
            self.bi_slots,
            self.current_bi,
            {k: r.copy() for k, r in self.s_iso.items()},
            {k: r.copy() for k, r in self.s_async.items()},
            self.active_long_schedule,
            self.long_schedule_start,
        )


def advance_bi(state: SystemState, executed: BiSchedule) -> list[int]:
    """Update the request table after ``executed`` ran in the current BI.

    Returns the ids of departed requests, ISO before ASYNC, each in id order.
    """
    granted = executed.counts()
    departed = []
    for table in (state.s_iso, state.s_async):
        for rid in sorted(table):
            rec = table[rid]
            tracked = rec.kind is not Kind.ISO_F
            if tracked:
                rec.c_remain -= granted.get(rid, 0)
            rec.t_remain_life -= 1
            if rec.t_remain_life <= 0:
                del table[rid]
                departed.append(rid)
                continue
            if tracked:
                rec.d_curr -= 1
                if rec.d_curr == 0 and rec.kind is Kind.ISO_M:
                    rec.c_remain = rec.spec.c_min
                    rec.d_curr = rec.spec.period_num
    state.current_bi += 1
    return departed
