from __future__ import annotations

from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from orchestra_sim.cluster import (AppClass, Cluster, Movability, NodeTemplate, Pod, PricingKind,
                                   PricingModel, ResourceVector)
from orchestra_sim.kernel import Kernel, Rng
from orchestra_sim.scenario import reference_scenario
from orchestra_sim.scheduling import (PolicyKind, SchedulerPolicy, cost_aware_score, filter_nodes,
                                      run_cycle, select_node, template_admits)
from orchestra_sim.simulation import run_scenario

REQ = ResourceVector(250, 64)


def template(kind=PricingKind.ON_DEMAND, cpu=750):
    discount = 0.3 if kind is PricingKind.PREEMPTIBLE else 1.0
    return NodeTemplate(kind.value, ResourceVector(cpu, 3788), PricingModel(kind, discount))


def cluster_of(*templates) -> Cluster:
    c = Cluster(Kernel())
    for t in templates:
        c.add_initial_node(t)
    return c


def add_pod(c, pid, **kw) -> Pod:
    p = Pod(pid, kw.pop("submit_time", 0), kw.pop("request", REQ), kw.pop("duration", 100), **kw)
    c.submit(p)
    return p


def load(c, node_id, cpu):
    p = add_pod(c, f"filler-{node_id}-{cpu}", request=ResourceVector(cpu, 1))
    c.bind_pod(p.id, node_id, 0)


def test_filter_all_empty_workers():
    c = cluster_of(*[template()] * 10)
    p = add_pod(c, "p")
    assert len(filter_nodes(p, c, SchedulerPolicy())) == 10


def test_full_workers_leave_pod_unschedulable():
    c = cluster_of(*[template()] * 4)
    for node in list(c.nodes):
        for _ in range(3):
            p = add_pod(c, f"{node}-{len(c.pods)}")
            c.bind_pod(p.id, node, 0)
    p = add_pod(c, "late")
    assert filter_nodes(p, c, SchedulerPolicy()) == []
    out = run_cycle(0, [p], c, SchedulerPolicy(), Rng(1))
    assert out.unschedulable == ["late"] and out.bindings == []


def test_cost_aware_keeps_customer_facing_off_preemptible():
    c = cluster_of(template(PricingKind.ON_DEMAND), template(PricingKind.PREEMPTIBLE))
    p = add_pod(c, "web", app_class=AppClass.CUSTOMER_FACING_SERVICE)
    cands = filter_nodes(p, c, SchedulerPolicy(PolicyKind.COST_AWARE))
    assert [n.id for n in cands] == ["node-000"]
    # other policies do not apply the rule
    assert len(filter_nodes(p, c, SchedulerPolicy(PolicyKind.SPREAD))) == 2
    assert not template_admits(p, template(PricingKind.PREEMPTIBLE), SchedulerPolicy(PolicyKind.COST_AWARE))


def test_spread_and_binpack_pick_extremes():
    c = cluster_of(template(), template(), template())
    load(c, "node-000", 500)
    load(c, "node-001", 250)
    p = add_pod(c, "p")
    cands = filter_nodes(p, c, SchedulerPolicy())
    assert select_node(p, cands, SchedulerPolicy(PolicyKind.SPREAD), Rng(0), c).id == "node-002"
    assert select_node(p, cands, SchedulerPolicy(PolicyKind.BINPACK), Rng(0), c).id == "node-000"
    assert select_node(p, [], SchedulerPolicy(), Rng(0), c) is None


def test_cost_aware_avoids_mixing_pinned_and_movable():
    c = cluster_of(template(), template())
    pinned = add_pod(c, "db", movability=Movability.PINNED, request=ResourceVector(200, 1))
    c.bind_pod("db", "node-000", 0)
    mover = add_pod(c, "etl", request=ResourceVector(200, 1))
    c.bind_pod("etl", "node-001", 0)
    p = add_pod(c, "batch")
    policy = SchedulerPolicy(PolicyKind.COST_AWARE)
    a, b = c.nodes["node-000"], c.nodes["node-001"]
    # enumerate both scores: same pricing and load, only node A mixes
    assert cost_aware_score(p, a, c, policy) == (1, 1.0, -200, 0)
    assert cost_aware_score(p, b, c, policy) == (1, 0.0, -200, 1)
    assert select_node(p, filter_nodes(p, c, policy), policy, Rng(0), c).id == "node-001"
    assert pinned.node_id == "node-000" and mover.node_id == "node-001"


def test_cost_aware_pricing_preferences():
    c = cluster_of(template(PricingKind.RESERVED), template(PricingKind.ON_DEMAND),
                   template(PricingKind.PREEMPTIBLE))
    policy = SchedulerPolicy(PolicyKind.COST_AWARE)

    def choice(**kw):
        p = add_pod(c, f"p{len(c.pods)}", **kw)
        return select_node(p, filter_nodes(p, c, policy), policy, Rng(0), c).template.pricing.kind

    assert choice(app_class=AppClass.CUSTOMER_FACING_SERVICE) is PricingKind.RESERVED
    assert choice(fault_tolerant=True) is PricingKind.PREEMPTIBLE
    assert choice(fault_tolerant=False) is PricingKind.RESERVED


def test_run_cycle_is_fcfs_and_calls_scale_out_once():
    c = cluster_of(template(cpu=500))
    pods = [add_pod(c, f"p{i}", submit_time=10 - i) for i in range(4)]
    calls = []
    out = run_cycle(20, pods, c, SchedulerPolicy(), Rng(0), scale_out=lambda t, ids: calls.append((t, ids)))
    assert [b[0] for b in out.bindings] == ["p3", "p2"]
    assert calls == [(20, ["p1", "p0"])]


def test_empty_queue_no_autoscaler_call():
    calls = []
    out = run_cycle(0, [], cluster_of(template()), SchedulerPolicy(), Rng(0),
                    scale_out=lambda t, ids: calls.append(ids))
    assert out.bindings == [] and out.unschedulable == [] and calls == []


def test_reference_cycle_schedule_22_and_10_workers():
    for workers, last, mean in ((22, 1330, 115.6), (10, 3090, 840.0)):
        result = run_scenario(reference_scenario(workers, runtime_overhead=0))
        binds = [t for _, t in result.bind_times()]
        assert max(binds) == last
        delays = [r["t"] - r["submit"] for r in result.records if r["type"] == "bind"]
        assert abs(sum(delays) / len(delays) - mean) < 1e-9
        assert oracles.mean_delay(oracles.slot_model_binds(workers)) == mean


@settings(max_examples=60, deadline=None)
@given(loads=st.lists(st.sampled_from([0, 100, 250, 400, 500]), min_size=1, max_size=6),
       req=st.sampled_from([50, 100, 250, 350]),
       kind=st.sampled_from([PolicyKind.SPREAD, PolicyKind.BINPACK]))
def test_spread_binpack_extremal_and_sound(loads, req, kind):
    c = cluster_of(*[template()] * len(loads))
    for i, cpu in enumerate(loads):
        if cpu:
            load(c, f"node-{i:03d}", cpu)
    p = add_pod(c, "p", request=ResourceVector(req, 1))
    cands = filter_nodes(p, c, SchedulerPolicy(kind))
    for n in cands:
        assert p.request.fits_in(c.free_capacity(n.id))
    chosen = select_node(p, cands, SchedulerPolicy(kind), Rng(0), c)
    if not cands:
        assert chosen is None
        return
    if kind is PolicyKind.SPREAD:
        assert all(n.allocated.cpu >= chosen.allocated.cpu for n in cands)
    else:
        assert all(n.allocated.cpu <= chosen.allocated.cpu for n in cands)
    c.bind_pod(p.id, chosen.id, 0)
