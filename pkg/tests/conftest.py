import pytest
from hypothesis import HealthCheck, settings

from eaciar.model import ReqType, RequestRecord, SystemState, TrafficSpec

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def iso(rid, num=1, c_min=1, c_max=None, lifetime=100, den=1):
    return TrafficSpec(rid, ReqType.ISO, num, c_min, lifetime, period_den=den, c_max=c_max)


def asy(rid, deadline, c_min):
    return TrafficSpec(rid, ReqType.ASYNC, deadline, c_min, deadline)


def state_with(bi_slots, *specs):
    """State holding ``specs`` as freshly admitted records, no plan installed."""
    st = SystemState(bi_slots=bi_slots)
    for s in specs:
        st.set_for(s)[s.id] = RequestRecord.admit(s)
    return st


@pytest.fixture
def make_state():
    return state_with


def live_state(seed, stop_bi, bi_range=(8, 16), n=8, ranges=None):
    """State of a generated scenario just before ``stop_bi`` runs."""
    from eaciar.sim import ScenarioRanges, generate_scenario, replay

    ranges = ranges or ScenarioRanges(
        bi_slots=bi_range, arrival_bi=(0, 4), iso_f_den=(2, 4), iso_m_period=(1, 3),
        async_deadline=(1, 4), iso_util=(0.05, 0.5), async_util=(0.05, 0.6),
    )
    sc = generate_scenario(seed, n, ranges)
    _, state = replay(sc, stop_at_bi=stop_bi)
    return state


def long_schedule_violations(state, sched):
    """Ways in which ``sched`` (built from ``state``) fails a request."""
    import numpy as np

    from eaciar.model import Kind

    bi = state.bi_slots
    d = sched.d_max
    flat = sched.flat
    out = []
    for r in state.records():
        mine = flat == r.id
        end = min(r.t_remain_life, d) * bi
        if mine[end:].any():
            out.append((r.id, "slot after departure"))
        if r.kind is Kind.ASYNC:
            got = int(mine[: r.d_curr * bi].sum())
            if got != r.c_remain or mine[r.d_curr * bi:].any():
                out.append((r.id, f"async got {got} of {r.c_remain}"))
        elif r.kind is Kind.ISO_F:
            ps = r.spec.period_slots(bi)
            for a in range(0, end, ps):
                if mine[a:a + ps].sum() < r.spec.c_min:
                    out.append((r.id, f"iso_f window {a}"))
        else:
            p = r.spec.period_num
            life = min(r.t_remain_life, d)
            if r.d_curr <= life and mine[: r.d_curr * bi].sum() < r.c_remain:
                out.append((r.id, "iso_m current period"))
            a = r.d_curr
            while a + p <= life:
                if mine[a * bi:(a + p) * bi].sum() < r.spec.c_min:
                    out.append((r.id, f"iso_m period at BI {a}"))
                a += p
    return out


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
