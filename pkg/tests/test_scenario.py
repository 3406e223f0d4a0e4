from __future__ import annotations

import json

import pytest

from orchestra_sim import scenario as scenario_mod
from orchestra_sim.cluster import PodState, PricingKind
from orchestra_sim.errors import ScenarioError
from orchestra_sim.scheduling import PolicyKind
from orchestra_sim.simulation import run_scenario


def base_doc(**over):
    doc = {"name": "t", "templates": {"vm": {"cpu_m": 1000, "mem_mib": 2048}},
           "initial_nodes": {"vm": 2},
           "workload": {"kind": "homogeneous_batch", "n": 5, "interarrival_s": 10,
                        "cpu_m": 250, "mem_mib": 64, "duration_s": 100}}
    doc.update(over)
    return doc


def test_shipped_scenarios_validate(scenarios_dir):
    names = set()
    for path in sorted(scenarios_dir.glob("*.json")):
        names.add(scenario_mod.load(path).name)
    assert {"void10", "void16", "void22", "simple", "consolidation", "consolidation-off"} <= names


def test_shipped_reference_files_match_builder(scenarios_dir):
    from orchestra_sim.simulation import run_scenario as run
    for w in (10, 16, 22):
        a = run(scenario_mod.load(scenarios_dir / f"void{w}.json")).report
        b = run(scenario_mod.reference_scenario(w)).report
        assert a.to_json() == b.to_json()
    a = run(scenario_mod.load(scenarios_dir / "simple.json")).report
    b = run(scenario_mod.reference_scenario(10, autoscaler="simple")).report
    assert a.to_json() == b.to_json()


def test_defaults():
    sc = scenario_mod.from_dict(base_doc())
    tpl = sc.templates["vm"]
    assert (tpl.rate, tpl.billing_period, tpl.boot_delay) == (792, 60, 90)
    assert sc.scheduler.kind is PolicyKind.RANDOM
    assert sc.runtime_overhead == 25 and sc.scheduling_cycle == 10


@pytest.mark.parametrize("mutate,path", [
    (lambda d: d["workload"].__setitem__("cpu_m", -5), "$.workload.cpu_m"),
    (lambda d: d["templates"]["vm"].__setitem__("cpu_m", "big"), "$.templates.vm.cpu_m"),
    (lambda d: d.__setitem__("scheduler", {"kind": "fastest"}), "$.scheduler.kind"),
    (lambda d: d.__setitem__("initial_nodes", {"nope": 1}), "$.initial_nodes.nope"),
    (lambda d: d.__setitem__("autoscaler", {"kind": "simple", "template": "x"}), "$.autoscaler.template"),
    (lambda d: d.__setitem__("bogus", 1), "$"),
])
def test_invalid_documents_name_the_field(mutate, path):
    doc = base_doc()
    mutate(doc)
    with pytest.raises(ScenarioError) as info:
        scenario_mod.from_dict(doc)
    assert info.value.path == path
    assert str(info.value).startswith(path)


def test_pod_list_error_names_index_and_field():
    doc = base_doc(workload={"kind": "pods", "pods": [
        {"id": "a", "submit_s": 0, "cpu_m": 1, "mem_mib": 1, "duration_s": 1},
        {"id": "b", "submit_s": 0, "cpu_m": 1, "mem_mib": 1, "duration_s": 1, "movability": "Teleport"}]})
    with pytest.raises(ScenarioError) as info:
        scenario_mod.from_dict(doc)
    assert "$.workload.pods[1]" in str(info.value)


def test_services_need_a_horizon():
    doc = base_doc(services=[{"name": "web", "cpu_m": 100, "mem_mib": 10, "load": [[0, 0.5]]}])
    with pytest.raises(ScenarioError):
        scenario_mod.from_dict(doc)


def test_trace_workload_relative_path(tmp_path):
    (tmp_path / "pods.csv").write_text(
        "id,submit_s,cpu_m,mem_mib,duration_s,app_class,movability,fault_tolerant,deadline_s\n"
        "x,0,100,10,30,CronJob,MovableStateless,false,\n")
    doc = base_doc(workload={"kind": "trace", "path": "pods.csv"})
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    sc = scenario_mod.load(path)
    assert [p.id for p in sc.pods] == ["x"]
    assert run_scenario(sc).report.succeeded == 1
    doc["workload"]["path"] = "missing.csv"
    path.write_text(json.dumps(doc))
    with pytest.raises(ScenarioError):
        scenario_mod.load(path)


def test_invalid_json_reported(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{nope")
    with pytest.raises(ScenarioError):
        scenario_mod.load(path)


def test_rate_presets_in_scenarios():
    doc = base_doc(accounting={"rate": "quoted"})
    assert scenario_mod.from_dict(doc).rate_override == 11_000
    doc = base_doc(accounting={"rate": 1234})
    assert scenario_mod.from_dict(doc).rate_override == 1234


def test_preemptible_revocations_in_a_run():
    doc = base_doc(
        horizon_s=20_000, seed=3,
        templates={"spot": {"cpu_m": 1000, "mem_mib": 2048, "pricing": "preemptible", "discount": 0.3},
                   "od": {"cpu_m": 1000, "mem_mib": 2048}},
        initial_nodes={"spot": 2, "od": 1},
        scheduler={"kind": "cost_aware"},
        autoscaler={"kind": "simple", "template": "spot"},
        preemption={"rate_per_node_hour": 6},
        workload={"kind": "pods", "pods": [
            {"id": f"b{i}", "submit_s": 0, "cpu_m": 250, "mem_mib": 64, "duration_s": 1500,
             "fault_tolerant": i % 2 == 0} for i in range(8)]})
    result = run_scenario(scenario_mod.from_dict(doc))
    revoked = [r for r in result.records if r["type"] == "release" and r["reason"] == "revoked"]
    assert revoked
    for r in revoked:
        pod = result.cluster.pods[r["pod"]]
        assert r["state"] == ("Evicted" if pod.fault_tolerant else "Failed")
    fragile_failed = {r["pod"] for r in revoked if r["state"] == "Failed"}
    assert all(result.cluster.pods[p].state is PodState.FAILED for p in fragile_failed)
    assert result.report.qos_violations == len(fragile_failed)
    spot_nodes = [n for n in result.cluster.nodes.values()
                  if n.template.pricing.kind is PricingKind.PREEMPTIBLE]
    assert any(n.terminate_time is not None for n in spot_nodes)
