"""Randomized small scenarios for invariant and property tests."""
from __future__ import annotations

import random

from orchestra_sim.cluster import (AppClass, Movability, NodeTemplate, Pod, PricingKind,
                                   PricingModel, ResourceVector)
from orchestra_sim.estimator import EstimatorConfig
from orchestra_sim.scenario import AutoscalerConfig, Scenario
from orchestra_sim.scheduling import PolicyKind, SchedulerPolicy

_PRICING = (
    PricingModel(PricingKind.ON_DEMAND),
    PricingModel(PricingKind.RESERVED, commitment_periods=5),
    PricingModel(PricingKind.PREEMPTIBLE, discount_factor=0.3),
)


def random_scenario(r: random.Random, index: int) -> Scenario:
    templates = {}
    for k in range(r.randint(1, 3)):
        templates[f"t{k}"] = NodeTemplate(
            name=f"t{k}",
            capacity=ResourceVector(r.choice((500, 750, 1000)), r.choice((1024, 2048))),
            pricing=r.choice(_PRICING), rate=r.choice((792, 1000)),
            billing_period=r.choice((60, 120, 300)), boot_delay=r.choice((0, 30, 90)))
    names = sorted(templates)
    initial: dict[str, int] = {}
    for _ in range(r.randint(1, 3)):
        name = r.choice(names)
        initial[name] = initial.get(name, 0) + 1
    pods = []
    for i in range(r.randint(1, 8)):
        submit = r.randrange(0, 300, 5)
        pods.append(Pod(
            id=f"p{i}", submit_time=submit,
            request=ResourceVector(r.choice((100, 250, 400, 600)), r.choice((64, 256, 512))),
            nominal_duration=r.randint(0, 600),
            app_class=r.choice(list(AppClass)), movability=r.choice(list(Movability)),
            fault_tolerant=r.random() < 0.5,
            deadline=submit + r.randint(300, 2000) if r.random() < 0.5 else None))
    auto = AutoscalerConfig()
    if r.random() < 0.4:
        auto = AutoscalerConfig("simple", r.choice(names), r.choice((0, 45, 120)))
    return Scenario(
        name=f"random-{index}", seed=index, horizon=1500, templates=templates,
        initial_nodes=initial, pods=pods,
        scheduler=SchedulerPolicy(kind=r.choice(list(PolicyKind))),
        scheduling_cycle=r.choice((5, 10, 20)), requeue_on_release=r.random() < 0.7,
        autoscaler=auto, consolidation=r.random() < 0.4,
        utilization_threshold=r.choice((0.5, 0.9, 1.01)),
        pod_start_overhead=r.choice((0, 3)), runtime_overhead=r.choice((0, 25)),
        monitoring_timestep=60, estimator=EstimatorConfig(),
        preemption_rate=r.choice((0.0, 0.0, 3.0)),
    )
