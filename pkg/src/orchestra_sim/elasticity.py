"""Cluster scale-out policies, billing-boundary scale-in and service replica scaling."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .cluster import (AppClass, Cluster, Movability, Node, NodeState, NodeTemplate, Pod,
                      ResourceVector, TERMINAL_POD_STATES)
from .errors import SimulationError
from .kernel import SimTime

DEFAULT_UNDERUTILIZATION = 0.7
PROVISIONING_CONTINGENCY = 30


@dataclass(frozen=True)
class ScaleDecision:
    action: str = "none"  # "none" | "launch"
    template: Optional[NodeTemplate] = None
    count: int = 0


NO_SCALE = ScaleDecision()


class VoidAutoscaler:
    """Ignores every request: a static cluster."""

    kind = "void"

    def scale_out_request(self, t: SimTime, unschedulable: list[str], cluster: Cluster) -> ScaleDecision:
        return NO_SCALE

    def permitted_at(self) -> Optional[SimTime]:
        return None


class SimpleAutoscaler:
    """Launches one node of a fixed template, at most once per provisioning interval.

    Unschedulable pods tend to come in bursts, so a whole cycle's worth of
    failures produces one request, and requests arriving before the previous
    node could have booted are dropped. A request is also dropped when none
    of its pods could run on a fresh node of the template (``admits``
    decides; by default, the pod's request must fit the template's capacity),
    since launching would only add cost.
    """

    kind = "simple"

    def __init__(self, template: NodeTemplate, provisioning_interval: Optional[int] = None,
                 admits: Optional[Callable[[Pod, NodeTemplate], bool]] = None):
        if provisioning_interval is None:
            provisioning_interval = template.boot_delay + PROVISIONING_CONTINGENCY
        if provisioning_interval < 0:
            raise ValueError("provisioning_interval must be >= 0")
        self.template = template
        self.provisioning_interval = provisioning_interval
        self.admits = admits or (lambda pod, tpl: pod.request.fits_in(tpl.capacity))
        self.last_launch_time: Optional[SimTime] = None
        self.launches: list[SimTime] = []

    def scale_out_request(self, t: SimTime, unschedulable: list[str], cluster: Cluster) -> ScaleDecision:
        if not any(self.admits(cluster.pods[pid], self.template) for pid in unschedulable):
            return NO_SCALE
        if self.last_launch_time is not None and t - self.last_launch_time < self.provisioning_interval:
            return NO_SCALE
        self.last_launch_time = t
        self.launches.append(t)
        return ScaleDecision("launch", self.template, 1)

    def permitted_at(self) -> Optional[SimTime]:
        if self.last_launch_time is None:
            return None
        return self.last_launch_time + self.provisioning_interval


def cluster_utilization(cluster: Cluster) -> float:
    """Requested CPU over allocatable CPU across Ready nodes."""
    nodes = cluster.ready_nodes()
    capacity = sum(n.template.capacity.cpu for n in nodes)
    if capacity == 0:
        return 0.0
    return sum(n.allocated.cpu for n in nodes) / capacity


def fits_elsewhere(node: Node, cluster: Cluster) -> bool:
    """Can the node's pods be packed first-fit-decreasing onto the other Ready nodes?"""
    pods = sorted((cluster.pods[pid] for pid in node.bound_pods),
                  key=lambda p: (-p.request.cpu, -p.request.memory, p.id))
    free = [cluster.free_capacity(n.id) for n in cluster.ready_nodes() if n.id != node.id]
    for pod in pods:
        for i, space in enumerate(free):
            if pod.request.fits_in(space):
                free[i] = space - pod.request
                break
        else:
            return False
    return True


QosChecker = Callable[[str, SimTime, Cluster], bool]


def billing_boundary_review(t: SimTime, node: Node, cluster: Cluster, qos_checker: QosChecker,
                            threshold: float = DEFAULT_UNDERUTILIZATION,
                            min_nodes: int = 1) -> str:
    """Decide whether a node should be drained at the end of a billing period.

    Returns ``"drain"`` only if every pod on it is movable, the QoS checker
    accepts evicting them now, the cluster is underutilized, and the other
    Ready nodes have room for the evicted pods. The last ``min_nodes`` Ready
    nodes are always kept.
    """
    if (t - node.launch_time) % node.template.billing_period != 0 or t == node.launch_time:
        raise SimulationError(f"t={t} is not a billing boundary of {node.id}")
    if node.state is not NodeState.READY:
        return "keep"
    if any(cluster.pods[pid].movability is Movability.PINNED for pid in node.bound_pods):
        return "keep"
    if len(cluster.ready_nodes()) <= min_nodes:
        return "keep"
    if not qos_checker(node.id, t, cluster):
        return "keep"
    if cluster_utilization(cluster) >= threshold:
        return "keep"
    if not fits_elsewhere(node, cluster):
        return "keep"
    return "drain"


# -- service replicas ---------------------------------------------------------

@dataclass
class ServiceGroup:
    """Replicas of one service plus the load they share.

    ``load_trace`` is a step function of (time, load) where load is measured
    in replicas' worth of CPU: a load of 1.5 on two replicas is 75% mean
    utilization.
    """
    name: str
    request: ResourceVector
    app_class: AppClass = AppClass.CUSTOMER_FACING_SERVICE
    movability: Movability = Movability.MOVABLE_STATELESS
    fault_tolerant: bool = False
    initial_replicas: int = 1
    threshold: float = 0.8
    lower_threshold: Optional[float] = None
    min_replicas: int = 1
    max_replicas: Optional[int] = None
    load_trace: list[tuple[SimTime, float]] = field(default_factory=list)
    replicas: list[str] = field(default_factory=list)
    spawned: int = 0

    def load_at(self, t: SimTime) -> float:
        current = 0.0
        for at, load in self.load_trace:
            if at > t:
                break
            current = load
        return current

    def live_replicas(self, cluster: Cluster) -> list[Pod]:
        return [cluster.pods[pid] for pid in self.replicas
                if cluster.pods[pid].state not in TERMINAL_POD_STATES]

    def new_replica(self, t: SimTime) -> Pod:
        pod = Pod(id=f"{self.name}-r{self.spawned:03d}", submit_time=t, request=self.request,
                  nominal_duration=None, app_class=self.app_class, movability=self.movability,
                  fault_tolerant=self.fault_tolerant, group=self.name)
        self.spawned += 1
        self.replicas.append(pod.id)
        return pod


def hpa_evaluate(t: SimTime, replicas: int, utilization: float, threshold: float,
                 lower_threshold: Optional[float] = None, min_replicas: int = 1,
                 max_replicas: Optional[int] = None) -> int:
    """Replica delta for one evaluation: +1 above ``threshold``, -1 below ``lower_threshold``.

    Both comparisons are strict. The lower rule never takes the group below
    ``min_replicas``; the upper one never exceeds ``max_replicas``.
    """
    if replicas < 1:
        raise SimulationError("a service group needs at least one replica")
    if utilization > threshold:
        if max_replicas is not None and replicas >= max_replicas:
            return 0
        return 1
    if lower_threshold is not None and utilization < lower_threshold and replicas > min_replicas:
        return -1
    return 0
