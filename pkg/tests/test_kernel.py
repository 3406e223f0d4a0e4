from __future__ import annotations

import pytest

from orchestra_sim import metrics
from orchestra_sim.errors import CausalityError, SimulationError
from orchestra_sim.kernel import EventKind, Kernel, Rng
from orchestra_sim.scenario import reference_scenario
from orchestra_sim.simulation import run_scenario


def _kernel_with_log():
    k = Kernel()
    seen = []
    for kind in EventKind:
        k.register(kind, seen.append)
    return k, seen


def test_first_event_gets_seq_zero():
    k, seen = _kernel_with_log()
    ev = k.push(0, EventKind.POD_ARRIVAL, "pod-1")
    assert ev.seq == 0
    k.run_until()
    assert seen == [ev]


def test_equal_times_dispatch_in_insertion_order():
    k, seen = _kernel_with_log()
    k.push(10, EventKind.POD_ARRIVAL, "pod-2")
    k.push(10, EventKind.SCHEDULING_CYCLE)
    k.run_until()
    assert [e.kind for e in seen] == [EventKind.POD_ARRIVAL, EventKind.SCHEDULING_CYCLE]


def test_push_into_the_past_is_rejected():
    k, _ = _kernel_with_log()
    k.push(7, EventKind.MONITORING_TICK)
    k.run_until()
    assert k.now == 7
    with pytest.raises(CausalityError):
        k.push(5, EventKind.POD_ARRIVAL, "late")


def test_non_integer_time_rejected():
    k, _ = _kernel_with_log()
    with pytest.raises(SimulationError):
        k.push(1.5, EventKind.MONITORING_TICK)


def test_empty_queue_leaves_clock_alone():
    k, _ = _kernel_with_log()
    counts = k.run_until(100)
    assert sum(counts.values()) == 0
    assert k.now == 0


def test_run_until_stops_at_t_end_and_counts_by_kind():
    k, seen = _kernel_with_log()
    for t in (1, 2, 3, 50):
        k.push(t, EventKind.MONITORING_TICK)
    k.push(2, EventKind.POD_ARRIVAL, "p")
    counts = k.run_until(10)
    assert counts == {"MonitoringTick": 3, "PodArrival": 1}
    assert k.now == 3
    assert len(k) == 1 and k.peek_time() == 50


def test_missing_handler_is_an_error():
    k = Kernel()
    k.push(0, EventKind.NODE_READY, "n")
    with pytest.raises(SimulationError):
        k.run_until()


def test_handlers_never_see_an_earlier_clock():
    k = Kernel()

    def handler(ev):
        assert k.now == ev.time
        if ev.time < 30:
            k.push(ev.time + 7, EventKind.MONITORING_TICK)
    k.register(EventKind.MONITORING_TICK, handler)
    k.push(0, EventKind.MONITORING_TICK)
    k.run_until()
    assert [e.time for e in k.dispatched] == [0, 7, 14, 21, 28, 35]


def test_reference_run_dispatches_one_arrival_every_ten_seconds():
    result = run_scenario(reference_scenario(22))
    arrivals = [e.time for e in result.events if e.kind is EventKind.POD_ARRIVAL]
    assert arrivals == list(range(0, 1000, 10))
    assert result.report.event_counts["PodArrival"] == 100


def test_dispatch_log_totally_ordered_and_reproducible():
    a = run_scenario(reference_scenario(16, seed=42))
    b = run_scenario(reference_scenario(16, seed=42))
    keys = [(e.time, e.seq) for e in a.events]
    assert keys == sorted(keys) and len(set(keys)) == len(keys)
    assert a.events == b.events
    assert metrics.trace_jsonl(a.records) == metrics.trace_jsonl(b.records)


def test_rng_streams_are_reproducible_and_independent():
    a, b = Rng(42, "scheduler"), Rng(42, "scheduler")
    assert [a.randbelow(10) for _ in range(20)] == [b.randbelow(10) for _ in range(20)]
    c = Rng(42, "revocation")
    assert [Rng(42, "scheduler").random() for _ in range(3)] != [c.random() for _ in range(3)]
    assert Rng(1, "x").spawn("y").random() == Rng(1, "x/y").random()
    with pytest.raises(ValueError):
        a.randbelow(0)


def test_rng_exponential_mean():
    r = Rng(3, "exp")
    draws = [r.exponential(0.5) for _ in range(20_000)]
    assert abs(sum(draws) / len(draws) - 2.0) < 0.05
