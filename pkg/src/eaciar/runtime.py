"""Per-BI execution: long-schedule playback or plain EDF."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .admission import AdmissionOutcome, recompute_on_departure
from .model import (
    BiSchedule,
    Kind,
    LongSchedule,
    SystemState,
    advance_bi,
    expand_iso_f_jobs,
    fill_earliest,
)


class ModeKind(str, enum.Enum):
    PLAYBACK = "PLAYBACK"
    PURE_EDF = "PURE_EDF"


@dataclass(frozen=True)
class RuntimeMode:
    kind: ModeKind
    long_schedule: LongSchedule | None = None
    cursor: int = 0

    @classmethod
    def of(cls, state: SystemState) -> RuntimeMode:
        if state.active_long_schedule is None:
            return cls(ModeKind.PURE_EDF)
        cursor = state.current_bi - state.long_schedule_start
        if not 0 <= cursor < state.active_long_schedule.d_max:
            raise RuntimeError(
                f"long schedule exhausted at cursor {cursor} with ASYNC "
                f"requests {sorted(state.s_async)} still present"
            )
        return cls(ModeKind.PLAYBACK, state.active_long_schedule, cursor)


def iso_m_demand(rec) -> tuple[int, int]:
    """``(mandatory, extra)`` slots an ISO_M record still wants in its
    current period under EDF: what is left of ``c_min``, then of the
    surplus up to ``period_cop``."""
    mandatory = max(rec.c_remain, 0)
    if rec.period_cop is None:
        return mandatory, 0
    return mandatory, rec.c_remain + rec.period_cop - rec.spec.c_min - mandatory


def edf_schedule(state: SystemState) -> BiSchedule:
    """EDF layout of the current BI.

    ISO_F jobs get ``c_op`` by job deadline, then ISO_M records get the rest
    of their ``c_min`` by current deadline; ISO_M surplus only fills what is
    still empty, so a later arrival never finds slots already spent on
    surplus.
    """
    bi = state.bi_slots
    out = BiSchedule.empty(bi)
    recs = sorted(state.s_iso.values(), key=lambda r: r.id)
    jobs = sorted(
        (j for r in recs if r.kind is Kind.ISO_F
         for j in expand_iso_f_jobs(r, bi, demand=r.c_op)),
        key=lambda j: (j.deadline, j.owner),
    )
    for job in jobs:
        fill_earliest(out.slots, job.release, job.deadline, job.demand, job.owner)
    mult = sorted(
        (r for r in recs if r.kind is Kind.ISO_M), key=lambda r: (r.d_curr, r.id)
    )
    demands = [(r, *iso_m_demand(r)) for r in mult]
    for rec, mandatory, _ in demands:
        fill_earliest(out.slots, 0, bi, mandatory, rec.id)
    for rec, _, extra in demands:
        fill_earliest(out.slots, 0, bi, extra, rec.id)
    return out


def next_bi_schedule(state: SystemState, mode: RuntimeMode | None = None) -> BiSchedule:
    """Schedule to execute in ``state.current_bi``."""
    mode = RuntimeMode.of(state) if mode is None else mode
    if mode.kind is ModeKind.PLAYBACK:
        return mode.long_schedule.bi(mode.cursor)
    for rec in state.s_iso.values():
        # a fresh period under EDF is served at c_op
        if rec.kind is Kind.ISO_M and rec.d_curr == rec.spec.period_num:
            rec.period_cop = rec.c_op
    return edf_schedule(state)


def run_bi(
    state: SystemState,
) -> tuple[BiSchedule, list[int], AdmissionOutcome | None]:
    """Execute one BI, update the table and re-plan if anyone left."""
    executed = next_bi_schedule(state)
    departed = advance_bi(state, executed)
    outcome = recompute_on_departure(state) if departed else None
    return executed, departed, outcome
