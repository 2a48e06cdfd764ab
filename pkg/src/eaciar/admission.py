"""Admission control for isochronous and asynchronous service-period requests.

With no ASYNC request in the system, admission is the EDF utilization test
on ``c_min`` followed by a proportional-fair split of the spare utilization
(``c_op`` per ISO request). Once an ASYNC request is present the controller
instead lays out an explicit slot schedule up to the latest ASYNC deadline:
ISO_F jobs first, then ISO_M, then ASYNC in deadline order, and finally
spare slots are handed back to ISO jobs.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .model import (
    InvalidRequestError,
    Kind,
    LongSchedule,
    RequestRecord,
    SystemState,
    TrafficSpec,
    expand_iso_f_jobs,
    fill_earliest,
)

log = logging.getLogger(__name__)


class Decision(str, enum.Enum):
    ACCEPT = "ACCEPT"
    REJECT = "REJECT"


class Mode(str, enum.Enum):
    EDF_WITH_COP = "EDF"
    LONG_SCHEDULE = "LONG_SCHEDULE"


class RejectReason(str, enum.Enum):
    ISO_UTILIZATION = "ISO_UTILIZATION"
    ASYNC_CAPACITY = "ASYNC_CAPACITY"
    ASYNC_DEADLINE = "ASYNC_DEADLINE"


class SchedulingInvariantError(RuntimeError):
    """An ISO job could not be placed although the utilization test passed."""


@dataclass(frozen=True)
class Witness:
    """Where an ASYNC allocation failed.

    ``slot`` is the horizon-relative slot at which the scan gave up: the
    request's deadline for ASYNC_DEADLINE, the horizon end for
    ASYNC_CAPACITY.
    """

    request_id: int
    slot: int
    demand: int
    available: int


class AdmissionRejected(Exception):
    def __init__(self, reason: RejectReason, witness: Witness | None = None):
        self.reason = reason
        self.witness = witness
        super().__init__(reason.value if witness is None else f"{reason.value}: {witness}")


@dataclass(frozen=True)
class AdmissionOutcome:
    decision: Decision
    mode: Mode | None = None
    c_op_map: Mapping[int, int] | None = None
    long_schedule: LongSchedule | None = None
    reason: RejectReason | None = None
    witness: Witness | None = None

    @property
    def accepted(self) -> bool:
        return self.decision is Decision.ACCEPT

    @classmethod
    def reject(cls, exc: AdmissionRejected) -> AdmissionOutcome:
        return cls(Decision.REJECT, reason=exc.reason, witness=exc.witness)


def check_iso_utilization(s_iso: Iterable[RequestRecord], bi_slots: int) -> Fraction:
    """Sum of ``c_min / P`` over ISO records, exact."""
    return sum((r.spec.utilization(bi_slots) for r in s_iso), Fraction(0))


def proportional_fair_cop(
    s_iso: Iterable[RequestRecord], u_min: Fraction, bi_slots: int
) -> dict[int, int]:
    """Split the spare utilization ``1 - u_min`` in proportion to each
    request's ``(c_max - c_min) / P``, floored to whole slots."""
    recs = list(s_iso)
    surplus = 1 - u_min
    delta = sum(
        (
            Fraction((r.spec.c_max - r.spec.c_min) * r.spec.period_den,
                     r.spec.period_num * bi_slots)
            for r in recs
        ),
        Fraction(0),
    )
    factor = min(Fraction(1), surplus / delta) if delta else Fraction(0)
    return {
        r.id: r.spec.c_min + math.floor(factor * (r.spec.c_max - r.spec.c_min))
        for r in sorted(recs, key=lambda r: r.id)
    }


def _iso_jobs_in_horizon(
    rec: RequestRecord, bi_slots: int, horizon: int
) -> list[tuple[int, int]]:
    """Slot windows ``[start, stop)`` of the jobs of ``rec`` released inside a
    horizon of ``horizon`` BIs, clipped to the horizon and the request's
    remaining lifetime."""
    end_bi = min(rec.t_remain_life, horizon)
    if rec.kind is Kind.ISO_F:
        ps = rec.spec.period_slots(bi_slots)
        return [(a, a + ps) for a in range(0, end_bi * bi_slots, ps)]
    period = rec.spec.period_num
    first = 0 if rec.d_curr == period else rec.d_curr
    return [
        (rel * bi_slots, min(rel + period, end_bi) * bi_slots)
        for rel in range(first, end_bi, period)
    ]


def _jobs_counted(rec: RequestRecord, horizon: int) -> int:
    end_bi = min(rec.t_remain_life, horizon)
    if rec.kind is Kind.ISO_F:
        return end_bi * rec.spec.period_den
    return -(-end_bi // rec.spec.period_num)


def schedule_iso(
    s_iso: Iterable[RequestRecord], bi_slots: int, d_max: int
) -> LongSchedule:
    """Passes (a) and (b): ISO_F jobs by deadline, then ISO_M by current
    deadline, each given its minimum demand earliest-fit, BI by BI."""
    sched = LongSchedule.empty(d_max, bi_slots)
    flat = sched.flat
    frac = sorted(
        (r for r in s_iso if r.kind is Kind.ISO_F), key=lambda r: r.id
    )
    mult = [r.copy() for r in sorted(
        (r for r in s_iso if r.kind is Kind.ISO_M), key=lambda r: r.id
    )]
    # ISO_F jobs of one BI, ordered by (deadline, id); identical every BI
    frac_jobs = sorted(
        (j for r in frac for j in expand_iso_f_jobs(r, bi_slots)),
        key=lambda j: (j.deadline, j.owner),
    )
    life = {r.id: r.t_remain_life for r in frac}
    for i in range(d_max):
        base = i * bi_slots
        for job in frac_jobs:
            if life[job.owner] <= i:
                continue
            got = fill_earliest(
                flat, base + job.release, base + job.deadline, job.demand, job.owner
            )
            if got < job.demand:
                raise SchedulingInvariantError(
                    f"ISO_F request {job.owner} short by {job.demand - got} "
                    f"slots in BI {i} window [{job.release}, {job.deadline})"
                )
        alive = [r for r in mult if r.t_remain_life > i]
        for rec in sorted(alive, key=lambda r: (r.d_curr, r.id)):
            if rec.c_remain > 0:
                rec.c_remain -= fill_earliest(
                    flat, base, base + bi_slots, rec.c_remain, rec.id
                )
        for rec in alive:
            rec.d_curr -= 1
            if rec.d_curr == 0:
                if rec.c_remain > 0:
                    raise SchedulingInvariantError(
                        f"ISO_M request {rec.id} short by {rec.c_remain} slots "
                        f"at the end of its period (BI {i})"
                    )
                rec.c_remain = rec.spec.c_min
                rec.d_curr = rec.spec.period_num
    return sched


def build_long_schedule(
    s_iso: Iterable[RequestRecord],
    s_async: Iterable[RequestRecord],
    bi_slots: int,
) -> LongSchedule:
    """Lay out every slot up to the latest ASYNC deadline.

    Raises :class:`AdmissionRejected` when the ASYNC requests cannot all be
    served before their deadlines around the ISO allocations.
    """
    iso = list(s_iso)
    asy = list(s_async)
    if not asy:
        raise ValueError("a long schedule needs at least one ASYNC request")
    d_max = max(r.d_curr for r in asy)
    sched = schedule_iso(iso, bi_slots, d_max)
    flat = sched.flat
    horizon_slots = d_max * bi_slots

    ordered = sorted(asy, key=lambda r: (r.d_curr, r.id))
    tot_async = sum(r.c_remain for r in asy)
    n_empty = sched.empty_count()
    if tot_async > n_empty:
        witness = Witness(ordered[-1].id, horizon_slots, tot_async, n_empty)
        log.info("reject %s: %s", RejectReason.ASYNC_CAPACITY.value, witness)
        raise AdmissionRejected(RejectReason.ASYNC_CAPACITY, witness)

    for rec in ordered:
        deadline = rec.d_curr * bi_slots
        got = fill_earliest(flat, 0, deadline, rec.c_remain, rec.id)
        if got < rec.c_remain:
            witness = Witness(rec.id, deadline, rec.c_remain, got)
            log.info("reject %s: %s", RejectReason.ASYNC_DEADLINE.value, witness)
            raise AdmissionRejected(RejectReason.ASYNC_DEADLINE, witness)

    tot_c_iso = 0
    delta_c = 0
    for rec in iso:
        n_jobs = _jobs_counted(rec, d_max)
        tot_c_iso += rec.spec.c_min * n_jobs
        delta_c += (rec.spec.c_max - rec.spec.c_min) * n_jobs
    surplus_c = horizon_slots - (tot_c_iso + tot_async)
    if surplus_c <= 0 or delta_c == 0:
        return sched
    factor = min(Fraction(1), Fraction(surplus_c, delta_c))
    for rec in sorted(iso, key=lambda r: (r.spec.period, r.id)):
        extra = math.floor(factor * (rec.spec.c_max - rec.spec.c_min))
        if extra <= 0:
            continue
        for start, stop in _iso_jobs_in_horizon(rec, bi_slots, d_max):
            fill_earliest(flat, start, stop, extra, rec.id)
    return sched


def evaluate(
    state: SystemState, new_spec: TrafficSpec | None = None
) -> AdmissionOutcome:
    """Decide on ``new_spec`` (or re-plan after a departure when ``None``)
    without touching ``state``."""
    iso = list(state.s_iso.values())
    asy = list(state.s_async.values())
    bi = state.bi_slots
    if new_spec is not None:
        new_spec.validate(bi)
        if new_spec.id in state:
            raise InvalidRequestError(f"duplicate request id {new_spec.id}")
        new = RequestRecord.admit(new_spec)
        if new.kind is Kind.ASYNC:
            asy.append(new)
        else:
            iso.append(new)
    u_min = check_iso_utilization(iso, bi)
    if new_spec is not None and u_min > 1:
        return AdmissionOutcome(Decision.REJECT, reason=RejectReason.ISO_UTILIZATION)
    if not asy:
        return AdmissionOutcome(
            Decision.ACCEPT, Mode.EDF_WITH_COP,
            c_op_map=proportional_fair_cop(iso, u_min, bi),
        )
    try:
        sched = build_long_schedule(iso, asy, bi)
    except AdmissionRejected as exc:
        return AdmissionOutcome.reject(exc)
    return AdmissionOutcome(Decision.ACCEPT, Mode.LONG_SCHEDULE, long_schedule=sched)


def apply_outcome(state: SystemState, outcome: AdmissionOutcome) -> None:
    """Install an accepted outcome; it governs BIs from ``current_bi`` on."""
    if outcome.mode is Mode.EDF_WITH_COP:
        for rid, c_op in outcome.c_op_map.items():
            rec = state.s_iso[rid]
            rec.c_op = c_op
            # raises wait for the next period, cuts apply now
            if rec.period_cop is not None:
                rec.period_cop = min(rec.period_cop, c_op)
        state.active_long_schedule = None
        state.long_schedule_start = state.current_bi
    else:
        if state.active_long_schedule is None:
            for rec in state.s_iso.values():
                rec.period_cop = None
        state.active_long_schedule = outcome.long_schedule
        state.long_schedule_start = state.current_bi


def admit(state: SystemState, new_spec: TrafficSpec) -> AdmissionOutcome:
    """Run admission for ``new_spec``; on ACCEPT insert it and install the
    new plan, on REJECT leave ``state`` untouched."""
    outcome = evaluate(state, new_spec)
    if outcome.accepted:
        state.set_for(new_spec)[new_spec.id] = RequestRecord.admit(new_spec)
        apply_outcome(state, outcome)
    return outcome


def recompute_on_departure(state: SystemState) -> AdmissionOutcome:
    """Re-plan for the remaining requests. A subset of an admitted set stays
    feasible, so anything other than ACCEPT is an internal error."""
    outcome = evaluate(state)
    if not outcome.accepted:
        raise SchedulingInvariantError(
            f"re-plan after departure rejected: {outcome.reason} {outcome.witness}"
        )
    apply_outcome(state, outcome)
    return outcome
