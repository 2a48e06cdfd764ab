"""Reference checks used by the test-suite.

Nothing here shares code with the admission engine beyond the plain
:class:`TrafficSpec` type. Feasibility is decided on an explicit job list
either by slot-by-slot preemptive EDF (optimal on one resource) or, for tiny
instances, exhaustively over every slot interval.
"""

from __future__ import annotations

import heapq
from fractions import Fraction
from typing import Iterable, Sequence

EXHAUSTIVE_CAP = 64


class OracleCapExceeded(ValueError):
    pass


def jobs_for(
    requests: Iterable, bi_slots: int, horizon: int
) -> list[tuple[int, int, int, int]]:
    """``(release, deadline, demand, owner)`` for every job of every request
    arriving at slot 0 whose window closes within ``horizon`` BIs and before
    the request departs."""
    end = horizon * bi_slots
    jobs = []
    for spec in requests:
        life_end = min(spec.lifetime * bi_slots, end)
        if spec.req_type == "ASYNC":
            windows = [(0, spec.period_num * bi_slots)]
        else:
            p = spec.period_num * bi_slots // spec.period_den
            windows = [(a, a + p) for a in range(0, life_end, p)]
        for rel, dl in windows:
            if dl <= life_end:
                jobs.append((rel, dl, spec.c_min, spec.id))
    return jobs


def edf_feasible(jobs: Sequence[tuple[int, int, int, int]], total_slots: int) -> bool:
    """Slot-level preemptive EDF over ``[0, total_slots)``."""
    by_release = sorted(jobs)
    ready: list[list[int]] = []
    k = 0
    for t in range(total_slots):
        while k < len(by_release) and by_release[k][0] <= t:
            rel, dl, demand, owner = by_release[k]
            if demand > 0:
                heapq.heappush(ready, [dl, owner, demand])
            k += 1
        if ready and ready[0][0] <= t:
            return False
        if ready:
            ready[0][2] -= 1
            if ready[0][2] == 0:
                heapq.heappop(ready)
    return not ready and k == len(by_release)


def interval_feasible(jobs: Sequence[tuple[int, int, int, int]], total_slots: int) -> bool:
    """Exhaustive check: for every slot interval, the demand of jobs whose
    windows lie inside it fits in it. Exact for unit slots by Hall's theorem."""
    if total_slots > EXHAUSTIVE_CAP:
        raise OracleCapExceeded(f"{total_slots} slots > cap {EXHAUSTIVE_CAP}")
    for a in range(total_slots):
        for b in range(a + 1, total_slots + 1):
            need = sum(d for r, dl, d, _ in jobs if r >= a and dl <= b)
            if need > b - a:
                return False
    return all(dl <= total_slots for _, dl, _, _ in jobs)


def brute_force_feasible(
    requests: Sequence, bi_slots: int, horizon: int, method: str = "auto"
) -> bool:
    """Is there any slot assignment meeting every job inside the horizon?

    ``method`` is ``"edf"``, ``"exhaustive"`` (capped at
    :data:`EXHAUSTIVE_CAP` slots) or ``"auto"``, which runs both when the
    instance is small enough and insists they agree.
    """
    jobs = jobs_for(requests, bi_slots, horizon)
    total = horizon * bi_slots
    if method == "edf":
        return edf_feasible(jobs, total)
    if method == "exhaustive":
        return interval_feasible(jobs, total)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    result = edf_feasible(jobs, total)
    if total <= EXHAUSTIVE_CAP:
        assert interval_feasible(jobs, total) == result, "oracle disagreement"
    return result


def periodic_async_baseline(requests: Iterable, bi_slots: int) -> bool:
    """Utilization test that charges each ASYNC request ``c_min / deadline``
    as if it repeated forever."""
    total = Fraction(0)
    for spec in requests:
        total += Fraction(
            spec.c_min * spec.period_den, spec.period_num * bi_slots
        )
    return total <= 1


def residual_fits(free: Sequence[bool], demands: Sequence[tuple[int, int]]) -> bool:
    """Can jobs ``(demand, deadline_slot)`` released at 0 be packed into the
    ``True`` positions of ``free`` before their deadlines? Checked prefix by
    prefix, which is exact for common release times."""
    prefix = [0]
    for f in free:
        prefix.append(prefix[-1] + bool(f))
    need = 0
    for demand, dl in sorted(demands, key=lambda x: x[1]):
        need += demand
        if need > prefix[min(dl, len(free))]:
            return False
    return True
