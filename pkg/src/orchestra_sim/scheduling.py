"""Filter-then-select placement run over the pending queue each scheduling cycle."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .cluster import (AppClass, CapacityMode, Cluster, Movability, Node, NodeTemplate, Pod,
                      PodState, PricingKind)
from .errors import LifecycleError
from .kernel import Rng, SimTime


class PolicyKind(str, Enum):
    RANDOM = "random"
    SPREAD = "spread"
    BINPACK = "binpack"
    COST_AWARE = "cost_aware"


@dataclass(frozen=True)
class SchedulerPolicy:
    kind: PolicyKind = PolicyKind.RANDOM
    capacity_mode: CapacityMode = CapacityMode.REQUESTED
    mixing_penalty: float = 1.0
    on_demand_penalty: float = 0.5

    def __post_init__(self):
        if self.mixing_penalty < 0 or self.on_demand_penalty < 0:
            raise ValueError("penalties must be >= 0")


@dataclass
class CycleOutcome:
    bindings: list[tuple[str, str, SimTime]] = field(default_factory=list)
    unschedulable: list[str] = field(default_factory=list)


# lower rank = preferred
_SERVICE_PREFERENCE = {PricingKind.RESERVED: 0, PricingKind.ON_DEMAND: 1, PricingKind.PREEMPTIBLE: 2}
_TOLERANT_BATCH_PREFERENCE = {PricingKind.PREEMPTIBLE: 0, PricingKind.ON_DEMAND: 1, PricingKind.RESERVED: 2}
_FRAGILE_BATCH_PREFERENCE = {PricingKind.RESERVED: 0, PricingKind.ON_DEMAND: 1, PricingKind.PREEMPTIBLE: 2}


def pricing_rank(pod: Pod, node: Node, policy: SchedulerPolicy) -> float:
    kind = node.template.pricing.kind
    if pod.app_class.is_service:
        rank = _SERVICE_PREFERENCE[kind]
        if kind is PricingKind.ON_DEMAND:
            rank += policy.on_demand_penalty
        return rank
    if pod.fault_tolerant:
        return _TOLERANT_BATCH_PREFERENCE[kind]
    return _FRAGILE_BATCH_PREFERENCE[kind]


def mixes_movability(pod: Pod, node: Node, cluster: Cluster) -> bool:
    """True if placing ``pod`` would put pinned and movable pods on one node."""
    pinned = pod.movability is Movability.PINNED
    for pid in node.bound_pods:
        if (cluster.pods[pid].movability is Movability.PINNED) != pinned:
            return True
    return False


def node_load(node: Node) -> int:
    return node.allocated.cpu


def cost_aware_score(pod: Pod, node: Node, cluster: Cluster, policy: SchedulerPolicy) -> tuple:
    mixing = policy.mixing_penalty if mixes_movability(pod, node, cluster) else 0.0
    return (pricing_rank(pod, node, policy), mixing, -node_load(node), node.index)


def template_admits(pod: Pod, template: NodeTemplate, policy: SchedulerPolicy) -> bool:
    """Could ``pod`` ever run on an empty node of ``template`` under ``policy``?"""
    if (policy.kind is PolicyKind.COST_AWARE
            and pod.app_class is AppClass.CUSTOMER_FACING_SERVICE
            and template.pricing.kind is PricingKind.PREEMPTIBLE):
        return False
    return pod.request.fits_in(template.capacity)


def filter_nodes(pod: Pod, cluster: Cluster, policy: SchedulerPolicy) -> list[Node]:
    if pod.state is not PodState.PENDING:
        raise LifecycleError(f"pod {pod.id} is {pod.state.value}, not Pending")
    out = []
    for node in cluster.ready_nodes():
        if not template_admits(pod, node.template, policy):
            continue
        if pod.request.fits_in(cluster.free_capacity(node.id, policy.capacity_mode)):
            out.append(node)
    return out


def select_node(pod: Pod, candidates: list[Node], policy: SchedulerPolicy, rng: Rng,
                cluster: Cluster) -> Optional[Node]:
    if not candidates:
        return None
    if policy.kind is PolicyKind.RANDOM:
        return candidates[rng.randbelow(len(candidates))]
    if policy.kind is PolicyKind.SPREAD:
        return min(candidates, key=lambda n: (node_load(n), n.index))
    if policy.kind is PolicyKind.BINPACK:
        return min(candidates, key=lambda n: (-node_load(n), n.index))
    return min(candidates, key=lambda n: cost_aware_score(pod, n, cluster, policy))


def run_cycle(t: SimTime, pending: list[Pod], cluster: Cluster, policy: SchedulerPolicy,
              rng: Rng, scale_out: Optional[Callable[[SimTime, list[str]], object]] = None
              ) -> CycleOutcome:
    """Place pending pods first-come first-served.

    Pods that fit nowhere stay Pending. If there are any, ``scale_out`` is
    called once with the whole batch rather than once per pod.
    """
    outcome = CycleOutcome()
    for pod in sorted(pending, key=lambda p: p.order_key):
        node = select_node(pod, filter_nodes(pod, cluster, policy), policy, rng, cluster)
        if node is None:
            outcome.unschedulable.append(pod.id)
            continue
        outcome.bindings.append(cluster.bind_pod(pod.id, node.id, t, policy.capacity_mode))
    if outcome.unschedulable and scale_out is not None:
        scale_out(t, outcome.unschedulable)
    return outcome
