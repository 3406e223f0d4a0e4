"""Ground-truth cluster state: pods, nodes, bindings and capacity bookkeeping."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Callable, Optional

from .errors import CapacityError, LifecycleError, SimulationError
from .kernel import EventKind, Kernel, SimTime

if TYPE_CHECKING:
    from .estimator import UsageEstimator


@dataclass(frozen=True)
class ResourceVector:
    cpu: int = 0      # millicores
    memory: int = 0   # MiB

    def __post_init__(self):
        if self.cpu < 0 or self.memory < 0:
            raise ValueError(f"negative resources: cpu={self.cpu} memory={self.memory}")

    def __add__(self, other: ResourceVector) -> ResourceVector:
        return ResourceVector(self.cpu + other.cpu, self.memory + other.memory)

    def __sub__(self, other: ResourceVector) -> ResourceVector:
        """Component-wise difference, floored at zero."""
        return ResourceVector(max(0, self.cpu - other.cpu), max(0, self.memory - other.memory))

    def fits_in(self, other: ResourceVector) -> bool:
        return self.cpu <= other.cpu and self.memory <= other.memory

    def to_dict(self) -> dict:
        return {"cpu_m": self.cpu, "mem_mib": self.memory}


ZERO = ResourceVector(0, 0)


class AppClass(str, Enum):
    CUSTOMER_FACING_SERVICE = "CustomerFacingService"
    INTERNAL_SERVICE = "InternalService"
    BATCH_ANALYTICS = "BatchAnalytics"
    PREPROCESSING_TASK = "PreprocessingTask"
    CRON_JOB = "CronJob"

    @property
    def is_service(self) -> bool:
        return self in (AppClass.CUSTOMER_FACING_SERVICE, AppClass.INTERNAL_SERVICE)


class Movability(str, Enum):
    MOVABLE_STATELESS = "MovableStateless"
    MOVABLE_CHECKPOINTABLE = "MovableCheckpointable"
    PINNED = "Pinned"


class PodState(str, Enum):
    PENDING = "Pending"
    BOUND = "Bound"
    STARTING = "Starting"
    RUNNING = "Running"
    SUCCEEDED = "Succeeded"
    EVICTED = "Evicted"
    FAILED = "Failed"


POD_TRANSITIONS = {
    PodState.PENDING: {PodState.BOUND},
    PodState.BOUND: {PodState.STARTING, PodState.EVICTED, PodState.FAILED},
    PodState.STARTING: {PodState.RUNNING, PodState.EVICTED, PodState.FAILED},
    PodState.RUNNING: {PodState.SUCCEEDED, PodState.EVICTED, PodState.FAILED},
    PodState.EVICTED: {PodState.PENDING},
    PodState.SUCCEEDED: set(),
    PodState.FAILED: set(),
}

TERMINAL_POD_STATES = (PodState.SUCCEEDED, PodState.FAILED)
ACTIVE_POD_STATES = (PodState.BOUND, PodState.STARTING, PodState.RUNNING)


class NodeState(str, Enum):
    PROVISIONING = "Provisioning"
    READY = "Ready"
    DRAINING = "Draining"
    TERMINATED = "Terminated"


NODE_TRANSITIONS = {
    NodeState.PROVISIONING: {NodeState.READY, NodeState.TERMINATED},
    NodeState.READY: {NodeState.DRAINING, NodeState.TERMINATED},
    NodeState.DRAINING: {NodeState.TERMINATED},
    NodeState.TERMINATED: set(),
}


class PricingKind(str, Enum):
    RESERVED = "reserved"
    ON_DEMAND = "on_demand"
    PREEMPTIBLE = "preemptible"


@dataclass(frozen=True)
class PricingModel:
    kind: PricingKind = PricingKind.ON_DEMAND
    discount_factor: float = 1.0
    # Reserved nodes pay for this many periods up front, whatever they run
    commitment_periods: int = 0

    def __post_init__(self):
        if not 0.0 < self.discount_factor <= 1.0:
            raise ValueError("discount_factor must lie in (0, 1]")
        if self.kind is not PricingKind.PREEMPTIBLE and self.discount_factor != 1.0:
            raise ValueError("only preemptible pricing takes a discount")
        if self.commitment_periods < 0:
            raise ValueError("commitment_periods must be >= 0")


@dataclass(frozen=True)
class NodeTemplate:
    name: str
    capacity: ResourceVector
    pricing: PricingModel = PricingModel()
    rate: int = 792                 # micro-dollars per billing period
    billing_period: int = 60
    boot_delay: int = 90

    def __post_init__(self):
        if self.billing_period <= 0:
            raise ValueError("billing_period must be positive")
        if self.rate < 0:
            raise ValueError("rate must be >= 0")
        if self.boot_delay < 0:
            raise ValueError("boot_delay must be >= 0")

    def to_dict(self) -> dict:
        return {
            "cpu_m": self.capacity.cpu,
            "mem_mib": self.capacity.memory,
            "pricing": self.pricing.kind.value,
            "discount": self.pricing.discount_factor,
            "commitment_periods": self.pricing.commitment_periods,
            "rate_micro_usd": self.rate,
            "billing_period_s": self.billing_period,
            "boot_delay_s": self.boot_delay,
        }


@dataclass
class Pod:
    id: str
    submit_time: SimTime
    request: ResourceVector
    nominal_duration: Optional[int]  # None: runs until the horizon (services)
    app_class: AppClass = AppClass.BATCH_ANALYTICS
    movability: Movability = Movability.MOVABLE_STATELESS
    fault_tolerant: bool = True
    deadline: Optional[SimTime] = None
    usage_profile: Optional[list[tuple[int, ResourceVector]]] = None
    group: Optional[str] = None
    state: PodState = PodState.PENDING
    node_id: Optional[str] = None
    bind_time: Optional[SimTime] = None
    first_bind_time: Optional[SimTime] = None
    start_time: Optional[SimTime] = None
    finish_time: Optional[SimTime] = None
    attempt: int = 0
    executed: int = 0  # seconds of useful work across earlier placements
    full_duration: Optional[int] = None

    def __post_init__(self):
        if self.submit_time < 0:
            raise ValueError(f"pod {self.id}: negative submit time")
        if self.nominal_duration is not None and self.nominal_duration < 0:
            raise ValueError(f"pod {self.id}: negative duration")
        if self.full_duration is None:
            self.full_duration = self.nominal_duration

    @property
    def order_key(self) -> tuple:
        return (self.submit_time, self.id)

    def transition(self, new: PodState) -> None:
        if new not in POD_TRANSITIONS[self.state]:
            raise LifecycleError(f"pod {self.id}: {self.state.value} -> {new.value} not allowed")
        self.state = new

    def usage_at(self, t: SimTime) -> Optional[ResourceVector]:
        """Step-interpolated usage ``t`` seconds after the current start."""
        if not self.usage_profile or self.start_time is None:
            return None
        offset = t - self.start_time
        current = None
        for at, usage in self.usage_profile:
            if at > offset:
                break
            current = usage
        return current


@dataclass
class Node:
    id: str
    index: int
    template: NodeTemplate
    state: NodeState = NodeState.PROVISIONING
    launch_time: SimTime = 0
    ready_time: Optional[SimTime] = None
    terminate_time: Optional[SimTime] = None
    initial: bool = False
    # pod id -> None; a dict keeps insertion order deterministic
    bound_pods: dict[str, None] = field(default_factory=dict)
    allocated: ResourceVector = ZERO

    def transition(self, new: NodeState) -> None:
        if new not in NODE_TRANSITIONS[self.state]:
            raise LifecycleError(f"node {self.id}: {self.state.value} -> {new.value} not allowed")
        self.state = new

    @property
    def alive(self) -> bool:
        return self.state in (NodeState.PROVISIONING, NodeState.READY, NodeState.DRAINING)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "template": self.template.name,
            "state": self.state.value,
            "launch_time": self.launch_time,
            "ready_time": self.ready_time,
            "terminate_time": self.terminate_time,
            "bound_pods": list(self.bound_pods),
            "allocated": self.allocated.to_dict(),
        }


class CapacityMode(str, Enum):
    REQUESTED = "requested"
    OPPORTUNISTIC = "opportunistic"


ReleaseReason = str  # "completed" | "evicted" | "failed" | "revoked"


class Cluster:
    """Pods, nodes and their bindings.

    Mutating operations that imply a future state change push the matching
    kernel event (NodeReady after provisioning, PodStarted after binding).
    Every transition is reported to ``on_record`` so it lands in the run log.
    """

    def __init__(self, kernel: Kernel, pod_start_overhead: int = 0,
                 estimator: Optional[UsageEstimator] = None,
                 on_record: Optional[Callable[[dict], None]] = None):
        self.kernel = kernel
        self.pod_start_overhead = pod_start_overhead
        self.estimator = estimator
        self.nodes: dict[str, Node] = {}
        self.pods: dict[str, Pod] = {}
        self._on_record = on_record or (lambda rec: None)

    def record(self, **rec) -> None:
        self._on_record(rec)

    # -- nodes --------------------------------------------------------------

    def _new_node(self, template: NodeTemplate, t: SimTime, initial: bool) -> Node:
        index = len(self.nodes)
        node = Node(id=f"node-{index:03d}", index=index, template=template,
                    launch_time=t, initial=initial)
        self.nodes[node.id] = node
        self.record(type="node_launch", t=t, node=node.id, template=template.name,
                     initial=initial)
        return node

    def add_initial_node(self, template: NodeTemplate, t: SimTime = 0) -> str:
        """A node that already exists when the run begins: Ready at once."""
        node = self._new_node(template, t, initial=True)
        node.transition(NodeState.READY)
        node.ready_time = t
        self.record(type="node_ready", t=t, node=node.id)
        return node.id

    def provision_node(self, template: NodeTemplate, t: SimTime) -> str:
        node = self._new_node(template, t, initial=False)
        self.kernel.push(t + template.boot_delay, EventKind.NODE_READY, node.id)
        return node.id

    def mark_ready(self, node_id: str, t: SimTime) -> None:
        node = self.nodes[node_id]
        node.transition(NodeState.READY)
        node.ready_time = t
        self.record(type="node_ready", t=t, node=node_id)

    def start_draining(self, node_id: str, t: SimTime) -> None:
        node = self.nodes[node_id]
        node.transition(NodeState.DRAINING)
        self.record(type="node_draining", t=t, node=node_id)

    def terminate_node(self, node_id: str, t: SimTime) -> None:
        node = self.nodes[node_id]
        if node.bound_pods:
            raise LifecycleError(f"node {node_id} still hosts {list(node.bound_pods)}")
        node.transition(NodeState.TERMINATED)
        node.terminate_time = t
        self.record(type="node_terminate", t=t, node=node_id)

    def ready_nodes(self) -> list[Node]:
        return [n for n in self.nodes.values() if n.state is NodeState.READY]

    def alive_nodes(self) -> list[Node]:
        return [n for n in self.nodes.values() if n.alive]

    def worker_count(self) -> int:
        return sum(1 for n in self.nodes.values()
                   if n.state in (NodeState.PROVISIONING, NodeState.READY))

    # -- capacity -----------------------------------------------------------

    def reservation(self, pod: Pod) -> ResourceVector:
        """What a bound pod holds back under opportunistic accounting."""
        if self.estimator is None:
            return pod.request
        est = self.estimator.reservation(pod)
        return pod.request if est is None else est

    def free_capacity(self, node_id: str, mode: CapacityMode = CapacityMode.REQUESTED) -> ResourceVector:
        node = self.nodes[node_id]
        if node.state is not NodeState.READY:
            raise LifecycleError(f"node {node_id} is {node.state.value}, not Ready")
        if mode is CapacityMode.REQUESTED:
            return node.template.capacity - node.allocated
        held = ZERO
        for pid in node.bound_pods:
            held = held + self.reservation(self.pods[pid])
        return node.template.capacity - held

    # -- pods ---------------------------------------------------------------

    def submit(self, pod: Pod) -> None:
        if pod.id in self.pods:
            raise SimulationError(f"duplicate pod id {pod.id}")
        self.pods[pod.id] = pod

    def pending_pods(self) -> list[Pod]:
        pending = [p for p in self.pods.values() if p.state is PodState.PENDING]
        pending.sort(key=lambda p: p.order_key)
        return pending

    def bind_pod(self, pod_id: str, node_id: str, t: SimTime,
                 mode: CapacityMode = CapacityMode.REQUESTED) -> tuple[str, str, SimTime]:
        pod = self.pods[pod_id]
        node = self.nodes[node_id]
        if pod.state is not PodState.PENDING:
            raise LifecycleError(f"pod {pod_id} is {pod.state.value}, not Pending")
        if node.state is not NodeState.READY:
            raise LifecycleError(f"cannot bind to {node_id}: node is {node.state.value}")
        if not pod.request.fits_in(self.free_capacity(node_id, mode)):
            raise CapacityError(f"pod {pod_id} ({pod.request}) does not fit on {node_id}")
        pod.transition(PodState.BOUND)
        pod.attempt += 1
        pod.node_id = node_id
        pod.bind_time = t
        if pod.first_bind_time is None:
            pod.first_bind_time = t
        node.bound_pods[pod_id] = None
        node.allocated = node.allocated + pod.request
        self.record(type="bind", t=t, pod=pod_id, node=node_id, submit=pod.submit_time,
                     attempt=pod.attempt)
        self.kernel.push(t + self.pod_start_overhead, EventKind.POD_STARTED, pod_id, pod.attempt)
        return (pod_id, node_id, t)

    def mark_running(self, pod_id: str, t: SimTime) -> None:
        pod = self.pods[pod_id]
        # the launcher creates the container and it comes up within the same instant
        pod.transition(PodState.STARTING)
        pod.transition(PodState.RUNNING)
        pod.start_time = t
        self.record(type="start", t=t, pod=pod_id, node=pod.node_id)

    def release_pod(self, pod_id: str, t: SimTime, reason: ReleaseReason) -> PodState:
        """Detach a pod from its node and move it to the outcome ``reason`` implies.

        ``completed`` -> Succeeded, ``failed`` -> Failed, ``evicted`` -> Evicted.
        ``revoked`` (the node disappeared under it) -> Evicted for fault-tolerant
        pods, Failed otherwise.
        """
        pod = self.pods[pod_id]
        if pod.state not in ACTIVE_POD_STATES or pod.node_id is None:
            raise LifecycleError(f"pod {pod_id} is {pod.state.value}; nothing to release")
        if reason == "evicted" and pod.movability is Movability.PINNED:
            raise LifecycleError(f"pod {pod_id} is pinned and cannot be migrated")
        if reason == "completed":
            target = PodState.SUCCEEDED
        elif reason == "failed":
            target = PodState.FAILED
        elif reason == "evicted":
            target = PodState.EVICTED
        elif reason == "revoked":
            target = PodState.EVICTED if pod.fault_tolerant else PodState.FAILED
        else:
            raise ValueError(f"unknown release reason {reason!r}")
        if pod.start_time is not None and pod.state is PodState.RUNNING:
            pod.executed += t - pod.start_time
        node = self.nodes[pod.node_id]
        del node.bound_pods[pod_id]
        node.allocated = node.allocated - pod.request
        pod.transition(target)
        self.record(type="release", t=t, pod=pod_id, node=pod.node_id, reason=reason,
                     state=target.value)
        pod.node_id = None
        if target in TERMINAL_POD_STATES:
            pod.finish_time = t
        return target

    def requeue(self, pod_id: str, t: SimTime) -> None:
        pod = self.pods[pod_id]
        pod.transition(PodState.PENDING)
        pod.start_time = None
        pod.bind_time = None
        self.record(type="requeue", t=t, pod=pod_id)

    def state_counts(self) -> dict[str, int]:
        counts = {s.value: 0 for s in PodState}
        for p in self.pods.values():
            counts[p.state.value] += 1
        return counts

    def snapshot(self, t: SimTime) -> dict:
        return {
            "type": "snapshot",
            "t": t,
            "nodes": [n.to_dict() for n in self.nodes.values()],
            "pods": self.state_counts(),
        }
