"""One simulation run: wires the kernel, cluster and policies to the event handlers."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

from . import metrics
from .cluster import (CapacityMode, Cluster, Node, NodeState, Pod, PodState, PricingKind,
                      TERMINAL_POD_STATES)
from .elasticity import (SimpleAutoscaler, VoidAutoscaler, billing_boundary_review,
                         hpa_evaluate)
from .estimator import UsageEstimator
from .kernel import INFINITY, Event, EventKind, Kernel, Rng, SimTime
from .rescheduling import (DeadlineChecker, Disposition, disposition_for, drain,
                           resume_evicted, retire_if_drained)
from .scenario import Scenario
from .scheduling import run_cycle, template_admits
from .workload import preemption_events

log = logging.getLogger(__name__)

PERIODIC = "periodic"
REACTIVE = "reactive"
DEFERRED = "deferred"


@dataclass
class RunResult:
    report: metrics.RunReport
    records: list[dict]
    events: list[Event]
    cluster: Cluster = field(repr=False)

    def bind_times(self) -> list[tuple[str, int]]:
        """(pod, time) for every binding, in the order they happened."""
        return [(r["pod"], r["t"]) for r in self.records if r["type"] == "bind"]


class Simulation:
    """Runs a scenario to completion (or its horizon).

    Scheduling cycles fire every ``scheduling_cycle`` seconds. With
    ``requeue_on_release`` set, anything that frees or adds capacity (a pod
    completing, a node becoming ready, an evicted pod coming back) also
    triggers a cycle at that instant, the way an orchestrator re-examines
    unschedulable pods when the cluster changes.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = sc = scenario.fresh()
        self.kernel = Kernel()
        self.records: list[dict] = []
        self.rng = Rng(sc.seed, "scheduler")
        self.revocation_rng = Rng(sc.seed, "revocation")
        opportunistic = sc.scheduler.capacity_mode is CapacityMode.OPPORTUNISTIC
        self.estimator = UsageEstimator(sc.estimator)
        self.cluster = Cluster(self.kernel, sc.pod_start_overhead,
                               estimator=self.estimator if opportunistic else None,
                               on_record=self.records.append)
        if sc.autoscaler.kind == "simple":
            policy = sc.scheduler
            self.autoscaler = SimpleAutoscaler(sc.templates[sc.autoscaler.template],
                                               sc.provisioning_interval,
                                               admits=lambda pod, tpl: template_admits(pod, tpl, policy))
        else:
            self.autoscaler = VoidAutoscaler()
        self.qos_checker = DeadlineChecker(sc.checkpoint_rate, sc.runtime_overhead)
        self._future: dict[str, Pod] = {}
        self._resume: dict[str, Disposition] = {}
        self._arrivals_in_flight = 0
        self._cycles_queued: set[int] = set()
        self._permit_queued: Optional[int] = None
        self._violations: set[str] = set()

        k = self.kernel
        k.tracers.append(lambda ev: self.records.append(ev.to_record()))
        k.register(EventKind.POD_ARRIVAL, self._on_arrival)
        k.register(EventKind.POD_STARTED, self._on_started)
        k.register(EventKind.POD_COMPLETED, self._on_completed)
        k.register(EventKind.SCHEDULING_CYCLE, self._on_cycle)
        k.register(EventKind.MONITORING_TICK, self._on_tick)
        k.register(EventKind.NODE_READY, self._on_node_ready)
        k.register(EventKind.BILLING_BOUNDARY, self._on_billing_boundary)
        k.register(EventKind.PREEMPTION_REVOCATION, self._on_revocation)
        k.register(EventKind.SCALE_OUT_PERMITTED, self._on_scale_out_permitted)

    # -- setup / teardown -----------------------------------------------------

    def _header(self) -> dict:
        sc = self.scenario
        return {
            "type": "header",
            "scenario": sc.name,
            "seed": sc.seed,
            "horizon": sc.horizon,
            "templates": {name: t.to_dict() for name, t in sc.templates.items()},
            "accounting": {"convention": sc.billing_convention, "rate_micro_usd": sc.rate_override},
        }

    def setup(self) -> None:
        sc = self.scenario
        self.records.append(self._header())
        for name, count in sc.initial_nodes.items():
            for _ in range(count):
                node_id = self.cluster.add_initial_node(sc.templates[name], 0)
                self._node_created(self.cluster.nodes[node_id])
        # arrivals first so that pods arriving at t are visible to the cycle at t
        for pod in sorted(sc.pods, key=lambda p: p.submit_time):
            self._push_arrival(pod, pod.submit_time)
        for group in sc.services:
            for _ in range(group.initial_replicas):
                self._push_arrival(group.new_replica(0), 0)
        self.kernel.push(0, EventKind.SCHEDULING_CYCLE, PERIODIC)
        self._cycles_queued.add(0)
        self.kernel.push(0, EventKind.MONITORING_TICK)

    def _push_arrival(self, pod: Pod, t: SimTime) -> None:
        self._future[pod.id] = pod
        self._arrivals_in_flight += 1
        self.kernel.push(t, EventKind.POD_ARRIVAL, pod.id)

    def _node_created(self, node: Node) -> None:
        sc = self.scenario
        if node.template.pricing.kind is PricingKind.PREEMPTIBLE and sc.preemption_rate > 0:
            for at, node_id in preemption_events(self.revocation_rng, sc.preemption_rate,
                                                 sc.horizon, [node.id], node.launch_time):
                self.kernel.push(at, EventKind.PREEMPTION_REVOCATION, node_id)
        if sc.consolidation:
            self.kernel.push(node.launch_time + node.template.billing_period,
                             EventKind.BILLING_BOUNDARY, node.id)

    def run(self) -> RunResult:
        self.setup()
        horizon = INFINITY if self.scenario.horizon is None else self.scenario.horizon
        self.kernel.run_until(horizon)
        self.records.append(self.cluster.snapshot(self.kernel.now))
        self.records.append({"type": "run_end", "t": self.run_end(), "done": self.done()})
        report = metrics.summary(self.records)
        return RunResult(report, self.records, self.kernel.dispatched, self.cluster)

    # -- bookkeeping ------------------------------------------------------------

    def done(self) -> bool:
        if self._arrivals_in_flight or self.scenario.services:
            return False
        return all(p.state in TERMINAL_POD_STATES for p in self.cluster.pods.values())

    def active(self, t: SimTime) -> bool:
        if self.scenario.horizon is not None and t >= self.scenario.horizon:
            return False
        return not self.done()

    def run_end(self) -> SimTime:
        if self.done():
            finishes = [p.finish_time for p in self.cluster.pods.values() if p.finish_time is not None]
            return max(finishes, default=0)
        if self.scenario.horizon is not None:
            return self.scenario.horizon
        return self.kernel.now

    def request_cycle(self, t: SimTime) -> None:
        if self.scenario.requeue_on_release and t not in self._cycles_queued:
            self._cycles_queued.add(t)
            self.kernel.push(t, EventKind.SCHEDULING_CYCLE, REACTIVE)

    def _flag_violation(self, pod: Pod, t: SimTime, why: str) -> None:
        if pod.id not in self._violations:
            self._violations.add(pod.id)
            self.records.append({"type": "qos_violation", "t": t, "pod": pod.id, "why": why})

    # -- handlers ---------------------------------------------------------------

    def _on_arrival(self, ev: Event) -> None:
        self._arrivals_in_flight -= 1
        t = ev.time
        pod_id = ev.payload
        if pod_id in self.cluster.pods:
            # an evicted pod coming back after its downtime
            late = resume_evicted(pod_id, t, self.cluster, self._resume.pop(pod_id))
            if late:
                self._flag_violation(self.cluster.pods[pod_id], t, "deadline passed while evicted")
            self.request_cycle(t)
            return
        pod = self._future.pop(pod_id)
        self.cluster.submit(pod)
        self.records.append({"type": "submit", "t": t, "pod": pod.id})

    def _on_started(self, ev: Event) -> None:
        pod = self.cluster.pods[ev.payload]
        if pod.attempt != ev.attempt or pod.state is not PodState.BOUND:
            return
        self.cluster.mark_running(pod.id, ev.time)
        if pod.nominal_duration is not None:
            self.kernel.push(ev.time + pod.nominal_duration + self.scenario.runtime_overhead,
                             EventKind.POD_COMPLETED, pod.id, pod.attempt)

    def _on_completed(self, ev: Event) -> None:
        pod = self.cluster.pods[ev.payload]
        if pod.attempt != ev.attempt or pod.state is not PodState.RUNNING:
            return
        self.cluster.release_pod(pod.id, ev.time, "completed")
        if pod.deadline is not None and ev.time > pod.deadline:
            self._flag_violation(pod, ev.time, "finished after deadline")
        self.request_cycle(ev.time)

    def _on_cycle(self, ev: Event) -> None:
        t = ev.time
        self._cycles_queued.discard(t)
        if ev.payload == PERIODIC and self.active(t):
            nxt = t + self.scenario.scheduling_cycle
            self._cycles_queued.add(nxt)
            self.kernel.push(nxt, EventKind.SCHEDULING_CYCLE, PERIODIC)
        pending = self.cluster.pending_pods()
        if pending:
            run_cycle(t, pending, self.cluster, self.scenario.scheduler, self.rng,
                      scale_out=self._scale_out)

    def _scale_out(self, t: SimTime, unschedulable: list[str]) -> None:
        decision = self.autoscaler.scale_out_request(t, unschedulable, self.cluster)
        if decision.action == "launch":
            for _ in range(decision.count):
                node_id = self.cluster.provision_node(decision.template, t)
                self._node_created(self.cluster.nodes[node_id])
            self.records.append({"type": "scale_out", "t": t, "count": decision.count,
                                 "template": decision.template.name})
            return
        permitted = self.autoscaler.permitted_at()
        if permitted is not None and permitted > t and self._permit_queued != permitted:
            self._permit_queued = permitted
            self.kernel.push(permitted, EventKind.SCALE_OUT_PERMITTED)

    def _on_scale_out_permitted(self, ev: Event) -> None:
        if self.cluster.pending_pods():
            self.request_cycle(ev.time)

    def _on_node_ready(self, ev: Event) -> None:
        node = self.cluster.nodes[ev.payload]
        if node.state is not NodeState.PROVISIONING:
            return
        self.cluster.mark_ready(node.id, ev.time)
        self.request_cycle(ev.time)

    def _on_tick(self, ev: Event) -> None:
        t = ev.time
        if t in self._cycles_queued and ev.payload != DEFERRED:
            # sample after this instant's scheduling cycle, not before it
            self.kernel.push(t, EventKind.MONITORING_TICK, DEFERRED)
            return
        for pod in self.cluster.pods.values():
            if pod.state is PodState.RUNNING:
                usage = pod.usage_at(t)
                if usage is not None:
                    self.estimator.record_pod(pod, t, usage)
        for group in self.scenario.services:
            self._evaluate_group(group, t)
        self.records.append(metrics.sample(t, self.cluster))
        if self.active(t):
            self.kernel.push(t + self.scenario.monitoring_timestep, EventKind.MONITORING_TICK)

    def _evaluate_group(self, group, t: SimTime) -> None:
        live = group.live_replicas(self.cluster)
        live += [self._future[pid] for pid in group.replicas if pid in self._future]
        if not any(p.state is PodState.RUNNING for p in live):
            return
        utilization = group.load_at(t) / len(live)
        delta = hpa_evaluate(t, len(live), utilization, group.threshold, group.lower_threshold,
                             group.min_replicas, group.max_replicas)
        if delta > 0:
            pod = group.new_replica(t)
            self.records.append({"type": "hpa", "t": t, "group": group.name, "delta": 1,
                                 "pod": pod.id, "utilization": utilization})
            self._push_arrival(pod, t)
            self.request_cycle(t)
        elif delta < 0:
            running = [p for p in live if p.state is PodState.RUNNING]
            victim = max(running, key=lambda p: (p.submit_time, p.id))
            self.records.append({"type": "hpa", "t": t, "group": group.name, "delta": -1,
                                 "pod": victim.id, "utilization": utilization})
            self.cluster.release_pod(victim.id, t, "completed")
            self.request_cycle(t)

    def _on_billing_boundary(self, ev: Event) -> None:
        t = ev.time
        node = self.cluster.nodes[ev.payload]
        if node.state is NodeState.DRAINING:
            retire_if_drained(node.id, t, self.cluster)
            return
        if node.state is NodeState.TERMINATED:
            return
        if node.state is NodeState.READY and self.scenario.consolidation:
            verdict = billing_boundary_review(t, node, self.cluster, self.qos_checker,
                                              self.scenario.utilization_threshold,
                                              self.scenario.min_nodes)
            if verdict == "drain":
                plan = drain(node.id, t, self.cluster, self.scenario.checkpoint_rate)
                self.records.append({"type": "consolidate", "t": t, "node": node.id,
                                     "pods": list(plan.dispositions)})
                for pod_id, disp in plan.dispositions.items():
                    self._requeue_later(pod_id, t, disp)
                return
        if self.active(t):
            self.kernel.push(t + node.template.billing_period, EventKind.BILLING_BOUNDARY, node.id)

    def _requeue_later(self, pod_id: str, t: SimTime, disp: Disposition) -> None:
        self._resume[pod_id] = disp
        self._arrivals_in_flight += 1
        self.kernel.push(t + disp.downtime, EventKind.POD_ARRIVAL, pod_id)

    def _on_revocation(self, ev: Event) -> None:
        t = ev.time
        node = self.cluster.nodes[ev.payload]
        if not node.alive:
            return
        self.records.append({"type": "revocation", "t": t, "node": node.id})
        for pod_id in list(node.bound_pods):
            pod = self.cluster.pods[pod_id]
            disp = disposition_for(pod, t, self.scenario.checkpoint_rate, revoked=True)
            outcome = self.cluster.release_pod(pod_id, t, "revoked")
            if outcome is PodState.EVICTED:
                self._requeue_later(pod_id, t, disp)
            else:
                self._flag_violation(pod, t, "failed on revoked node")
        if node.state is not NodeState.TERMINATED:
            self.cluster.terminate_node(node.id, t)
        self.request_cycle(t)


def run_scenario(scenario: Scenario) -> RunResult:
    return Simulation(scenario).run()
