"""Scenario documents: JSON schema, validation and construction of run inputs."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

import jsonschema

from . import accounting
from .cluster import AppClass, CapacityMode, Movability, NodeTemplate, Pod, ResourceVector
from .elasticity import PROVISIONING_CONTINGENCY, ServiceGroup
from .errors import ScenarioError, TraceFormatError
from .estimator import EstimatorConfig
from .metrics import template_from_dict
from .scheduling import PolicyKind, SchedulerPolicy
from .workload import homogeneous_batch, load_trace, pod_from_record

# VM boot-and-join time used by the reference scenarios; not reported for the
# original testbed, chosen so the simple autoscaler adds 11 workers
REFERENCE_BOOT_DELAY = 100

_NONNEG_INT = {"type": "integer", "minimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}

_POD_RECORD = {
    "type": "object",
    "required": ["id", "submit_s", "cpu_m", "mem_mib", "duration_s"],
    "properties": {
        "id": {"type": "string", "minLength": 1},
        "submit_s": _NONNEG_INT,
        "cpu_m": _NONNEG_INT,
        "mem_mib": _NONNEG_INT,
        "duration_s": _NONNEG_INT,
        "app_class": {"enum": [c.value for c in AppClass]},
        "movability": {"enum": [m.value for m in Movability]},
        "fault_tolerant": {"type": "boolean"},
        "deadline_s": {"type": ["integer", "null"], "minimum": 0},
    },
    "additionalProperties": False,
}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["name", "templates", "initial_nodes", "workload"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "seed": {"type": "integer"},
        "horizon_s": {"type": ["integer", "null"], "minimum": 0},
        "templates": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": {
                "type": "object",
                "required": ["cpu_m", "mem_mib"],
                "additionalProperties": False,
                "properties": {
                    "cpu_m": _NONNEG_INT,
                    "mem_mib": _NONNEG_INT,
                    "pricing": {"enum": ["reserved", "on_demand", "preemptible"]},
                    "discount": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                    "commitment_periods": _NONNEG_INT,
                    "rate_micro_usd": _NONNEG_INT,
                    "billing_period_s": _POS_INT,
                    "boot_delay_s": _NONNEG_INT,
                },
            },
        },
        "initial_nodes": {"type": "object", "additionalProperties": _NONNEG_INT},
        "scheduler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": [k.value for k in PolicyKind]},
                "capacity_mode": {"enum": [m.value for m in CapacityMode]},
                "cycle_s": _POS_INT,
                "requeue_on_release": {"type": "boolean"},
                "mixing_penalty": {"type": "number", "minimum": 0},
                "on_demand_penalty": {"type": "number", "minimum": 0},
            },
        },
        "autoscaler": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["void", "simple"]},
                "template": {"type": "string"},
                "provisioning_interval_s": _NONNEG_INT,
            },
        },
        "consolidation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "utilization_threshold": {"type": "number", "minimum": 0, "maximum": 1},
                "min_nodes": _NONNEG_INT,
            },
        },
        "overheads": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"pod_start_s": _NONNEG_INT, "runtime_s": _NONNEG_INT},
        },
        "monitoring_timestep_s": _POS_INT,
        "estimator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "statistic": {"enum": ["median", "mean"]},
                "window": _POS_INT,
                "safety_margin": {"type": "number", "minimum": 1},
            },
        },
        "checkpoint_rate_mib_s": {"type": "number", "exclusiveMinimum": 0},
        "preemption": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"rate_per_node_hour": {"type": "number", "minimum": 0}},
        },
        "accounting": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "convention": {"enum": list(accounting.CONVENTIONS)},
                "rate": {"oneOf": [_NONNEG_INT, {"enum": list(accounting.RATE_PRESETS)}]},
            },
        },
        "workload": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": ["homogeneous_batch", "trace", "pods"]}},
            "allOf": [
                {
                    "if": {"properties": {"kind": {"const": "homogeneous_batch"}}},
                    "then": {
                        "required": ["n", "interarrival_s", "cpu_m", "mem_mib", "duration_s"],
                        "additionalProperties": False,
                        "properties": {
                            "kind": {},
                            "n": _POS_INT,
                            "interarrival_s": _NONNEG_INT,
                            "cpu_m": _NONNEG_INT,
                            "mem_mib": _NONNEG_INT,
                            "duration_s": _NONNEG_INT,
                        },
                    },
                },
                {
                    "if": {"properties": {"kind": {"const": "trace"}}},
                    "then": {
                        "required": ["path"],
                        "additionalProperties": False,
                        "properties": {"kind": {}, "path": {"type": "string"},
                                       "format": {"enum": ["csv", "jsonl"]}},
                    },
                },
                {
                    "if": {"properties": {"kind": {"const": "pods"}}},
                    "then": {
                        "required": ["pods"],
                        "additionalProperties": False,
                        "properties": {"kind": {}, "pods": {"type": "array", "items": _POD_RECORD}},
                    },
                },
            ],
        },
        "services": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "cpu_m", "mem_mib", "load"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "cpu_m": _NONNEG_INT,
                    "mem_mib": _NONNEG_INT,
                    "app_class": {"enum": [c.value for c in AppClass]},
                    "movability": {"enum": [m.value for m in Movability]},
                    "fault_tolerant": {"type": "boolean"},
                    "replicas": _POS_INT,
                    "threshold": {"type": "number", "minimum": 0},
                    "lower_threshold": {"type": ["number", "null"], "minimum": 0},
                    "min_replicas": _POS_INT,
                    "max_replicas": {"type": ["integer", "null"], "minimum": 1},
                    "load": {
                        "type": "array",
                        "items": {"type": "array", "prefixItems": [_NONNEG_INT, {"type": "number", "minimum": 0}],
                                  "minItems": 2, "maxItems": 2},
                    },
                },
            },
        },
    },
}


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


@dataclass
class AutoscalerConfig:
    kind: str = "void"
    template: Optional[str] = None
    provisioning_interval: Optional[int] = None


@dataclass
class Scenario:
    name: str
    templates: dict[str, NodeTemplate]
    initial_nodes: dict[str, int]
    pods: list[Pod]
    seed: int = 0
    horizon: Optional[int] = None
    scheduler: SchedulerPolicy = field(default_factory=SchedulerPolicy)
    scheduling_cycle: int = 10
    requeue_on_release: bool = True
    autoscaler: AutoscalerConfig = field(default_factory=AutoscalerConfig)
    consolidation: bool = False
    utilization_threshold: float = 0.7
    min_nodes: int = 1
    pod_start_overhead: int = 0
    runtime_overhead: int = 25
    monitoring_timestep: int = 20
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    checkpoint_rate: float = 256.0
    preemption_rate: float = 0.0
    billing_convention: str = accounting.SCHEDULING_DURATION
    rate_override: Optional[int] = None
    services: list[ServiceGroup] = field(default_factory=list)

    def __post_init__(self):
        missing = [t for t in self.initial_nodes if t not in self.templates]
        if missing:
            raise ScenarioError(f"unknown template {missing[0]!r}", f"$.initial_nodes.{missing[0]}")
        if self.autoscaler.kind == "simple":
            if self.autoscaler.template is None:
                raise ScenarioError("simple autoscaler needs a template", "$.autoscaler.template")
            if self.autoscaler.template not in self.templates:
                raise ScenarioError(f"unknown template {self.autoscaler.template!r}",
                                    "$.autoscaler.template")
        if self.horizon is None and (self.services or self.preemption_rate > 0):
            raise ScenarioError("services and revocations need a finite horizon", "$.horizon_s")
        if self.horizon is not None and self.pods:
            last = max(p.submit_time for p in self.pods)
            if last > self.horizon:
                raise ScenarioError(f"horizon {self.horizon} precedes last arrival {last}",
                                    "$.horizon_s")

    @property
    def provisioning_interval(self) -> Optional[int]:
        if self.autoscaler.kind != "simple":
            return None
        if self.autoscaler.provisioning_interval is not None:
            return self.autoscaler.provisioning_interval
        return self.templates[self.autoscaler.template].boot_delay + PROVISIONING_CONTINGENCY

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed, pods=copy.deepcopy(self.pods),
                       services=copy.deepcopy(self.services))

    def fresh(self) -> "Scenario":
        """A copy whose pods and services carry no state from an earlier run."""
        return self.with_seed(self.seed)


def validate(doc: Any) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        # report the most specific error
        err = max(errors, key=lambda e: len(e.absolute_path))
        raise ScenarioError(err.message, _json_path(err.absolute_path))


def _pods_from(workload: dict, base_dir: Path) -> list[Pod]:
    kind = workload["kind"]
    if kind == "homogeneous_batch":
        return homogeneous_batch(workload["n"], workload["interarrival_s"],
                                 ResourceVector(workload["cpu_m"], workload["mem_mib"]),
                                 workload["duration_s"])
    if kind == "trace":
        path = Path(workload["path"])
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ScenarioError(f"trace file not found: {path}", "$.workload.path")
        try:
            return load_trace(path, workload.get("format"))
        except TraceFormatError as exc:
            raise ScenarioError(f"trace {path}: {exc}", "$.workload.path") from None
    pods = []
    for i, rec in enumerate(workload["pods"]):
        full = {"app_class": "BatchAnalytics", "movability": "MovableStateless",
                "fault_tolerant": True, **rec}
        try:
            pods.append(pod_from_record(full, i))
        except TraceFormatError as exc:
            raise ScenarioError(str(exc), f"$.workload.pods[{i}].{exc.field}") from None
    pods.sort(key=lambda p: p.submit_time)
    return pods


def from_dict(doc: dict, base_dir: Path | str = ".") -> Scenario:
    validate(doc)
    base_dir = Path(base_dir)
    templates = {}
    for name, t in doc["templates"].items():
        full = {"rate_micro_usd": accounting.FITTED_RATE_PER_MIN, "billing_period_s": 60,
                "boot_delay_s": 90, **t}
        try:
            templates[name] = template_from_dict(name, full)
        except ValueError as exc:
            raise ScenarioError(str(exc), f"$.templates.{name}") from None

    sched = doc.get("scheduler", {})
    policy = SchedulerPolicy(kind=PolicyKind(sched.get("kind", "random")),
                             capacity_mode=CapacityMode(sched.get("capacity_mode", "requested")),
                             mixing_penalty=sched.get("mixing_penalty", 1.0),
                             on_demand_penalty=sched.get("on_demand_penalty", 0.5))
    auto = doc.get("autoscaler", {"kind": "void"})
    cons = doc.get("consolidation", {})
    over = doc.get("overheads", {})
    est = doc.get("estimator", {})
    acct = doc.get("accounting", {})
    rate = acct.get("rate")
    if isinstance(rate, str):
        rate = accounting.RATE_PRESETS[rate]

    services = []
    for i, s in enumerate(doc.get("services", [])):
        services.append(ServiceGroup(
            name=s["name"], request=ResourceVector(s["cpu_m"], s["mem_mib"]),
            app_class=AppClass(s.get("app_class", "CustomerFacingService")),
            movability=Movability(s.get("movability", "MovableStateless")),
            fault_tolerant=s.get("fault_tolerant", False),
            initial_replicas=s.get("replicas", 1),
            threshold=s.get("threshold", 0.8),
            lower_threshold=s.get("lower_threshold"),
            min_replicas=s.get("min_replicas", 1),
            max_replicas=s.get("max_replicas"),
            load_trace=sorted((int(t), float(v)) for t, v in s["load"]),
        ))

    return Scenario(
        name=doc["name"],
        seed=doc.get("seed", 0),
        horizon=doc.get("horizon_s"),
        templates=templates,
        initial_nodes=dict(doc["initial_nodes"]),
        pods=_pods_from(doc["workload"], base_dir),
        scheduler=policy,
        scheduling_cycle=sched.get("cycle_s", 10),
        requeue_on_release=sched.get("requeue_on_release", True),
        autoscaler=AutoscalerConfig(auto["kind"], auto.get("template"),
                                    auto.get("provisioning_interval_s")),
        consolidation=cons.get("enabled", False),
        utilization_threshold=cons.get("utilization_threshold", 0.7),
        min_nodes=cons.get("min_nodes", 1),
        pod_start_overhead=over.get("pod_start_s", 0),
        runtime_overhead=over.get("runtime_s", 25),
        monitoring_timestep=doc.get("monitoring_timestep_s", 20),
        estimator=EstimatorConfig(est.get("statistic", "median"), est.get("window", 10),
                                  est.get("safety_margin", 1.2)),
        checkpoint_rate=doc.get("checkpoint_rate_mib_s", 256.0),
        preemption_rate=doc.get("preemption", {}).get("rate_per_node_hour", 0.0),
        billing_convention=acct.get("convention", accounting.SCHEDULING_DURATION),
        rate_override=rate,
        services=services,
    )


def load(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg} (line {exc.lineno})") from None
    return from_dict(doc, path.parent)


def reference_scenario(workers: int, autoscaler: str = "void", runtime_overhead: int = 25,
                       provisioning_interval: Optional[int] = None, seed: int = 42,
                       worker_cpu: int = 750, boot_delay: int = REFERENCE_BOOT_DELAY,
                       name: Optional[str] = None) -> Scenario:
    """The 100-pod batch experiment on ``workers`` m2.small workers."""
    doc = {
        "name": name or (f"void{workers}" if autoscaler == "void" else "simple"),
        "seed": seed,
        "templates": {"m2.small": {"cpu_m": worker_cpu, "mem_mib": 3788, "pricing": "on_demand",
                                   "rate_micro_usd": accounting.FITTED_RATE_PER_MIN,
                                   "billing_period_s": 60, "boot_delay_s": boot_delay}},
        "initial_nodes": {"m2.small": workers},
        "scheduler": {"kind": "random", "cycle_s": 10},
        "autoscaler": {"kind": autoscaler},
        "overheads": {"pod_start_s": 0, "runtime_s": runtime_overhead},
        "monitoring_timestep_s": 20,
        "workload": {"kind": "homogeneous_batch", "n": 100, "interarrival_s": 10,
                     "cpu_m": 250, "mem_mib": 64, "duration_s": 1000},
    }
    if autoscaler == "simple":
        doc["autoscaler"]["template"] = "m2.small"
        if provisioning_interval is not None:
            doc["autoscaler"]["provisioning_interval_s"] = provisioning_interval
    return from_dict(doc)
