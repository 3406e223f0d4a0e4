"""Stop-and-resume migration: checkpoint (if needed), kill, requeue elsewhere.

There is no live migration. A stateless pod is simply killed and restarted
from scratch; a checkpointable pod pays a downtime proportional to its
memory footprint and later resumes with only its remaining work.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .cluster import Cluster, Movability, NodeState, Pod, PodState
from .errors import LifecycleError
from .kernel import EventKind, SimTime

RESTART_FROM_ZERO = "restart_from_zero"
RESUME_REMAINING = "resume_remaining"

DEFAULT_CHECKPOINT_RATE = 256  # MiB/s


@dataclass(frozen=True)
class Disposition:
    checkpoint: bool
    downtime: int
    resume_mode: str
    remaining: Optional[int]  # run time left once the pod is placed again

    def to_dict(self) -> dict:
        return {"checkpoint": self.checkpoint, "downtime": self.downtime,
                "resume_mode": self.resume_mode, "remaining": self.remaining}


@dataclass
class EvictionPlan:
    node_id: str
    dispositions: dict[str, Disposition] = field(default_factory=dict)


def movability(pod: Pod) -> Movability:
    return pod.movability


def checkpoint_downtime(memory_mib: int, rate_mib_s: float) -> int:
    if rate_mib_s <= 0:
        raise ValueError("checkpoint rate must be positive")
    return math.ceil(memory_mib / rate_mib_s)


def elapsed_on_node(pod: Pod, t: SimTime) -> int:
    if pod.state is PodState.RUNNING and pod.start_time is not None:
        return max(0, t - pod.start_time)
    return 0


def disposition_for(pod: Pod, t: SimTime, checkpoint_rate: float = DEFAULT_CHECKPOINT_RATE,
                    revoked: bool = False) -> Disposition:
    """How ``pod`` would leave its node at ``t``.

    A revocation gives no time to checkpoint, so revoked pods always restart.
    """
    kind = movability(pod)
    if kind is Movability.PINNED and not revoked:
        raise LifecycleError(f"pod {pod.id} is pinned")
    if kind is Movability.MOVABLE_CHECKPOINTABLE and not revoked:
        remaining = None
        if pod.nominal_duration is not None:
            remaining = max(0, pod.nominal_duration - elapsed_on_node(pod, t))
        return Disposition(True, checkpoint_downtime(pod.request.memory, checkpoint_rate),
                           RESUME_REMAINING, remaining)
    return Disposition(False, 0, RESTART_FROM_ZERO, pod.full_duration)


def plan_eviction(node_id: str, cluster: Cluster, t: SimTime,
                  checkpoint_rate: float = DEFAULT_CHECKPOINT_RATE) -> Optional[EvictionPlan]:
    """Dispositions for every pod on the node, or None if any of them is pinned."""
    node = cluster.nodes[node_id]
    plan = EvictionPlan(node_id)
    for pid in node.bound_pods:
        pod = cluster.pods[pid]
        if movability(pod) is Movability.PINNED:
            return None
        plan.dispositions[pid] = disposition_for(pod, t, checkpoint_rate)
    return plan


def next_boundary(launch: SimTime, period: int, t: SimTime) -> SimTime:
    """Smallest ``launch + k*period`` that is >= t."""
    k = max(0, -(-(t - launch) // period))
    return launch + k * period


def drain(node_id: str, t: SimTime, cluster: Cluster,
          checkpoint_rate: float = DEFAULT_CHECKPOINT_RATE) -> Optional[EvictionPlan]:
    """Evict every pod from a Ready node and retire it at a billing boundary.

    Returns None (and changes nothing) when a pinned pod lives there. The
    node is terminated immediately if ``t`` is one of its billing boundaries,
    otherwise a BillingBoundary event is queued for the next one; the
    handler of that event is expected to finish the job via
    :func:`retire_if_drained`. Evicted pods are left in state Evicted; the
    caller requeues them with :func:`resume_evicted` after their downtime.
    """
    node = cluster.nodes[node_id]
    if node.state is NodeState.TERMINATED:
        raise LifecycleError(f"node {node_id} is already terminated")
    if node.state is not NodeState.READY:
        raise LifecycleError(f"node {node_id} is {node.state.value}, not Ready")
    plan = plan_eviction(node_id, cluster, t, checkpoint_rate)
    if plan is None:
        return None
    cluster.start_draining(node_id, t)
    for pid, disp in plan.dispositions.items():
        cluster.release_pod(pid, t, "evicted")
        cluster.record(type="evict", t=t, pod=pid, node=node_id, reason="evicted",
                       **disp.to_dict())
    boundary = next_boundary(node.launch_time, node.template.billing_period, t)
    if boundary == t:
        cluster.terminate_node(node_id, t)
    else:
        cluster.kernel.push(boundary, EventKind.BILLING_BOUNDARY, node_id)
    return plan


def retire_if_drained(node_id: str, t: SimTime, cluster: Cluster) -> bool:
    node = cluster.nodes[node_id]
    if node.state is NodeState.DRAINING and not node.bound_pods:
        cluster.terminate_node(node_id, t)
        return True
    return False


def resume_evicted(pod_id: str, t: SimTime, cluster: Cluster, disposition: Disposition) -> bool:
    """Put an evicted pod back in the queue with the run time its disposition allows.

    The original submission time is kept, so the pod keeps its FCFS position
    and its scheduling delay is still measured from first submission.
    Returns True when the pod's deadline has already passed.
    """
    pod = cluster.pods[pod_id]
    if pod.state is not PodState.EVICTED:
        raise LifecycleError(f"pod {pod_id} is {pod.state.value}, not Evicted")
    pod.nominal_duration = disposition.remaining
    cluster.requeue(pod_id, t)
    return pod.deadline is not None and t > pod.deadline


class DeadlineChecker:
    """Certifies that evicting a node's pods now keeps every deadline reachable.

    A pod with a deadline is safe if, restarting right after its downtime,
    it could still finish: ``deadline - (t + downtime + remaining + overhead) >= 0``.
    Queueing delay after the requeue is not known in advance and is ignored.
    """

    def __init__(self, checkpoint_rate: float = DEFAULT_CHECKPOINT_RATE, runtime_overhead: int = 0):
        self.checkpoint_rate = checkpoint_rate
        self.runtime_overhead = runtime_overhead

    def slack(self, pod: Pod, t: SimTime) -> Optional[int]:
        if pod.deadline is None or pod.movability is Movability.PINNED:
            return None
        disp = disposition_for(pod, t, self.checkpoint_rate)
        remaining = disp.remaining if disp.remaining is not None else 0
        return pod.deadline - (t + disp.downtime + remaining + self.runtime_overhead)

    def __call__(self, node_id: str, t: SimTime, cluster: Cluster) -> bool:
        for pid in cluster.nodes[node_id].bound_pods:
            s = self.slack(cluster.pods[pid], t)
            if s is not None and s < 0:
                return False
        return True
