"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import logging
import math
import random
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from eaciar import formats
from eaciar.admission import Mode, RejectReason, admit, evaluate
from eaciar.model import ReqType, SystemState, TrafficSpec
from eaciar.oracle import brute_force_feasible, periodic_async_baseline
from eaciar.sim import generate_scenario, replay, scaling_benchmark

from conftest import asy, iso, record_criterion, state_with


def test_1_deadline_safety():
    n_scenarios = 10_000
    t0 = time.perf_counter()
    misses = admitted = 0
    failing = []
    for seed in range(n_scenarios):
        n = random.Random(seed).randint(1, 20)
        report = replay(generate_scenario(seed, n))
        admitted += sum(m.admitted for m in report.requests.values())
        if report.deadline_misses:
            misses += report.deadline_misses
            failing.append(seed)
    elapsed = time.perf_counter() - t0
    ok = misses == 0 and elapsed < 300
    record_criterion(1, ok, f"{n_scenarios} scenarios, {admitted} admitted requests, "
                            f"{misses} misses, {elapsed:.1f}s")
    assert misses == 0, f"misses in seeds {failing[:10]}"
    assert elapsed < 300


def util_oracle(specs, bi):
    """Decide sum(c_min / P) <= 1 by cross-multiplying integers."""
    L = bi * math.lcm(*(s.period_num for s in specs))
    return sum(s.c_min * s.period_den * (L // (s.period_num * bi)) for s in specs) <= L


def boundary_instance(rng):
    bi = rng.choice([12, 16, 60, 64, 100, 120, 240])
    dens = [d for d in range(2, 9) if bi % d == 0]
    specs = []
    for k in range(rng.randint(1, 6)):
        if dens and rng.random() < 0.5:
            den = rng.choice(dens)
            specs.append(iso(k + 1, den=den, c_min=rng.randint(1, max(1, bi // den // 6))))
        else:
            p = rng.randint(1, 5)
            specs.append(iso(k + 1, num=p, c_min=rng.randint(1, max(1, p * bi // 6))))
    rest = 1 - sum((s.utilization(bi) for s in specs), Fraction(0))
    if rest <= 0:
        return None
    # the last request closes the gap exactly, or misses it by one slot
    p = (rest * bi).denominator
    if p > 12:
        return None
    c = int(rest * p * bi) + rng.choice([-1, 0, 0, 1])
    if not 1 <= c <= p * bi:
        return None
    return bi, specs, iso(len(specs) + 1, num=p, c_min=c)


def test_2_utilization_gate_exact():
    rng = random.Random(2)
    done = exact_one = wrong = 0
    while done < 1000:
        inst = boundary_instance(rng)
        if inst is None:
            continue
        bi, specs, last = inst
        want = util_oracle(specs + [last], bi)
        exact_one += sum((s.utilization(bi) for s in specs + [last]), Fraction(0)) == 1
        out = evaluate(state_with(bi, *specs), last)
        got = out.accepted
        if got != want or (not got and out.reason is not RejectReason.ISO_UTILIZATION):
            wrong += 1
        done += 1
    ok = wrong == 0 and exact_one > 0
    record_criterion(2, ok, f"{done} boundary instances ({exact_one} with sum exactly 1), "
                            f"{wrong} disagreements")
    assert ok


def cop_recompute(specs, bi):
    L = bi * math.lcm(*(s.period_num for s in specs))
    w = {s.id: s.period_den * (L // (s.period_num * bi)) for s in specs}
    spare = L - sum(s.c_min * w[s.id] for s in specs)
    width = sum((s.c_max - s.c_min) * w[s.id] for s in specs)
    out = {}
    for s in specs:
        extra = s.c_max - s.c_min
        out[s.id] = s.c_min + (min(extra, spare * extra // width) if width else 0)
    return out


def test_3_proportional_fair():
    rng = random.Random(3)
    done = wrong = 0
    while done < 1000:
        bi = rng.choice([16, 60, 100, 240, 1024])
        dens = [d for d in range(2, 9) if bi % d == 0]
        st = SystemState(bi_slots=bi)
        out = None
        specs = []
        for k in range(rng.randint(1, 8)):
            if rng.random() < 0.5:
                den, num = rng.choice(dens), 1
            else:
                den, num = 1, rng.randint(1, 4)
            plen = num * bi // den
            c = rng.randint(1, max(1, plen // 5))
            spec = iso(k + 1, num=num, den=den, c_min=c, c_max=rng.randint(c, plen))
            step = admit(st, spec)
            if step.accepted:
                specs.append(spec)
                out = step
        if out is None:
            continue
        assert out.mode is Mode.EDF_WITH_COP
        if dict(out.c_op_map) != cop_recompute(specs, bi):
            wrong += 1
        done += 1
    record_criterion(3, wrong == 0, f"{done} ISO-only sets, {wrong} c_op mismatches")
    assert wrong == 0


def small_instance(rng):
    bi = rng.choice([4, 6, 8, 12, 16])
    d_cap = 64 // bi
    dens = [d for d in (2, 3, 4) if bi % d == 0]
    specs = []
    for k in range(rng.randint(1, 6)):
        r = rng.random()
        if r < 0.25:
            den = rng.choice(dens)
            specs.append(iso(k + 1, den=den, c_min=rng.randint(1, bi // den),
                             lifetime=rng.randint(1, d_cap)))
        elif r < 0.45:
            p = rng.randint(1, min(2, d_cap))
            c = rng.randint(1, p * bi // 2)
            specs.append(iso(k + 1, num=p, c_min=c, c_max=rng.randint(c, p * bi),
                             lifetime=p * rng.randint(1, max(1, d_cap // p))))
        else:
            d = rng.randint(1, d_cap)
            specs.append(asy(k + 1, d, rng.randint(1, d * bi // 2)))
    return bi, specs


def test_4_soundness_with_witnesses(caplog):
    rng = random.Random(4)
    accepts = unsound = async_rejects = missing = 0
    for _ in range(2000):
        bi, specs = small_instance(rng)
        st = SystemState(bi_slots=bi)
        accepted = []
        for spec in specs:
            caplog.clear()
            with caplog.at_level(logging.INFO, logger="eaciar.admission"):
                out = admit(st, spec)
            if out.accepted:
                accepted.append(spec)
                accepts += 1
                asyncs = [s for s in accepted if s.req_type is ReqType.ASYNC]
                horizon = max((s.period_num for s in asyncs), default=64 // bi)
                if not brute_force_feasible(accepted, bi, horizon):
                    unsound += 1
            elif out.reason in (RejectReason.ASYNC_DEADLINE, RejectReason.ASYNC_CAPACITY):
                async_rejects += 1
                w = out.witness
                logged = any(out.reason.value in r.getMessage()
                             and f"request_id={w.request_id}" in r.getMessage()
                             for r in caplog.records) if w else False
                if w is None or not logged or not 0 <= w.slot <= 64:
                    missing += 1
    ok = unsound == 0 and missing == 0 and async_rejects > 0
    record_criterion(4, ok, f"{accepts} accepts ({unsound} infeasible), "
                            f"{async_rejects} ASYNC rejects ({missing} without witness)")
    assert ok


def test_5_beats_periodic_baseline():
    # constructed family: ISO at 0.7 plus ASYNC (0.2 BI, d=1) and (0.4 BI, d=2)
    family_ok = True
    for bi in (10, 20, 50, 100, 1000):
        specs = [iso(1, c_min=7 * bi // 10, lifetime=2), asy(2, 1, bi // 5), asy(3, 2, 2 * bi // 5)]
        st = state_with(bi)
        family_ok &= all(admit(st, s).accepted for s in specs)
        family_ok &= not periodic_async_baseline(specs, bi)
        if 2 * bi <= 64:
            family_ok &= brute_force_feasible(specs, bi, 2)
    rng = random.Random(5)
    async_accepts = baseline_rejects = 0
    for _ in range(2000):
        bi, specs = small_instance(rng)
        st = SystemState(bi_slots=bi)
        present = []
        for spec in specs:
            if admit(st, spec).accepted:
                present.append(spec)
                if spec.req_type is ReqType.ASYNC:
                    async_accepts += 1
                    baseline_rejects += not periodic_async_baseline(present, bi)
    rate = baseline_rejects / max(async_accepts, 1)
    ok = family_ok and rate > 0
    record_criterion(5, ok, f"family accepted and baseline-rejected: {family_ok}; "
                            f"baseline rejects {baseline_rejects} of {async_accepts} "
                            f"accepted ASYNC arrivals ({rate:.1%})")
    assert ok


def test_6_linear_admission_time():
    t0 = time.perf_counter()
    scaling_benchmark((10,), repeats=3)  # warm-up
    rows = scaling_benchmark((10, 20, 40, 80, 160), bi_slots=1024, d_max=4, repeats=15)
    elapsed = time.perf_counter() - t0
    n = np.array([r[0] for r in rows], dtype=float)
    y = np.array([r[1] for r in rows])
    slope, icpt = np.polyfit(n, y, 1)
    r2 = 1 - ((y - (slope * n + icpt)) ** 2).sum() / ((y - y.mean()) ** 2).sum()
    ok = r2 >= 0.95 and elapsed < 60
    times = ", ".join(f"{int(a)}:{b * 1e3:.2f}ms" for a, b in zip(n, y))
    record_criterion(6, ok, f"R^2={r2:.4f} over {times}; {elapsed:.1f}s")
    assert ok


def test_7_reports_are_byte_identical(tmp_path):
    scn = tmp_path / "s.scn"
    scn.write_text(formats.format_scenario(generate_scenario(77, 20)))
    outs = []
    for i in range(2):
        dump = tmp_path / f"d{i}.txt"
        res = subprocess.run(
            [sys.executable, "-m", "eaciar.cli", "run", str(scn), "--no-timing",
             "--dump-schedule", str(dump)],
            capture_output=True, check=True,
        )
        outs.append((res.stdout, dump.read_bytes()))
    ok = outs[0] == outs[1] and len(outs[0][0]) > 0
    record_criterion(7, ok, f"two runs, report {len(outs[0][0])} bytes, "
                            f"dump {len(outs[0][1])} bytes, identical: {outs[0] == outs[1]}")
    assert ok
