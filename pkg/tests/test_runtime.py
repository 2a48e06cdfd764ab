import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eaciar.admission import admit
from eaciar.model import EMPTY, Kind, SystemState
from eaciar.runtime import ModeKind, RuntimeMode, edf_schedule, next_bi_schedule, run_bi
from eaciar.sim import ScenarioRanges, generate_scenario

from conftest import asy, iso, state_with


def drive(scenario):
    """Yield ``(state_before, mode, executed, departed)`` for every BI."""
    state = SystemState(bi_slots=scenario.bi_slots)
    pending = list(scenario.events)
    while pending or not state.is_empty():
        while pending and pending[0][0] == state.current_bi:
            admit(state, pending.pop(0)[1])
        if state.is_empty():
            state.current_bi += 1
            continue
        before = state.copy()
        mode = RuntimeMode.of(state)
        executed, departed, _ = run_bi(state)
        yield before, mode, executed, departed


SMALL = ScenarioRanges(bi_slots=(8, 64), arrival_bi=(0, 6), iso_f_den=(2, 4),
                       iso_m_period=(1, 3), async_deadline=(1, 4))


class TestExamples:
    def test_iso_f_fills_each_window_from_its_start(self):
        st_ = state_with(10, iso(1, den=2, c_min=3))
        sched = next_bi_schedule(st_)
        assert set(np.flatnonzero(sched.slots == 1)) == {0, 1, 2, 5, 6, 7}

    def test_overserved_iso_m_waits_for_its_next_period(self):
        st_ = state_with(100, iso(1, num=2, c_min=10, c_max=30))
        rec = st_.s_iso[1]
        rec.c_remain, rec.d_curr, rec.c_op = -50, 1, 30
        executed, _, _ = run_bi(st_)
        assert executed.owned_by(1) == 0
        assert (rec.c_remain, rec.d_curr) == (10, 2)
        executed, _, _ = run_bi(st_)
        assert executed.owned_by(1) == 30

    def test_playback_returns_stored_bi(self):
        st_ = state_with(20)
        admit(st_, iso(1, den=2, c_min=3, c_max=6))
        out = admit(st_, asy(2, 3, 25))
        ls = out.long_schedule.copy()
        for k in range(3):
            mode = RuntimeMode.of(st_)
            assert mode.kind is ModeKind.PLAYBACK and mode.cursor == k
            executed, _, _ = run_bi(st_)
            assert executed == ls.bi(k)
        assert RuntimeMode.of(st_).kind is ModeKind.PURE_EDF

    def test_exhausted_long_schedule_is_an_error(self):
        st_ = state_with(20)
        admit(st_, asy(1, 1, 5))
        st_.current_bi += 1
        with pytest.raises(RuntimeError, match="exhausted"):
            RuntimeMode.of(st_)

    def test_edf_schedule_empty_state(self):
        assert edf_schedule(SystemState(bi_slots=8)).empty_count() == 8


seeds = st.integers(0, 10**6)


class TestProperties:
    @settings(max_examples=60)
    @given(seeds, st.integers(1, 10))
    def test_mode_tracks_async_presence(self, seed, n):
        for before, mode, executed, departed in drive(generate_scenario(seed, n, SMALL)):
            assert (mode.kind is ModeKind.PLAYBACK) == bool(before.s_async)
            if mode.kind is ModeKind.PLAYBACK:
                assert executed == before.active_long_schedule.bi(mode.cursor)

    @settings(max_examples=60)
    @given(seeds, st.integers(1, 10))
    def test_departed_requests_get_nothing(self, seed, n):
        gone = set()
        for before, mode, executed, departed in drive(generate_scenario(seed, n, SMALL)):
            owners = set(np.unique(executed.slots).tolist()) - {EMPTY}
            assert not owners & gone
            assert owners <= {r.id for r in before.records()}
            gone.update(departed)

    @settings(max_examples=60)
    @given(seeds, st.integers(1, 6))
    def test_static_iso_gets_c_op_every_period(self, seed, n):
        # fixed ISO_F / one-BI ISO_M population, all present from BI 0
        ranges = ScenarioRanges(bi_slots=(8, 64), arrival_bi=(0, 0), iso_f_den=(2, 4),
                                iso_m_period=(1, 1), iso_m_periods_alive=(6, 6),
                                iso_f_lifetime=(6, 6), iso_util=(0.02, 0.3))
        sc = generate_scenario(seed, {"iso_f": n, "iso_m": n}, ranges)
        for before, mode, executed, _ in drive(sc):
            for rec in before.s_iso.values():
                mine = (executed.slots == rec.id)
                if rec.kind is Kind.ISO_F:
                    per = mine.reshape(rec.spec.period_den, -1).sum(axis=1)
                    assert (per == rec.c_op).all()
                else:
                    assert mine.sum() == rec.c_op
