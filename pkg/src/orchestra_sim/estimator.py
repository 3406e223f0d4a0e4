"""Windowed usage estimation feeding opportunistic (oversubscribed) capacity."""
from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .cluster import Pod, ResourceVector
from .kernel import SimTime


@dataclass(frozen=True)
class EstimatorConfig:
    statistic: str = "median"   # "median" | "mean"
    window: int = 10
    safety_margin: float = 1.2

    def __post_init__(self):
        if self.statistic not in ("median", "mean"):
            raise ValueError(f"unknown statistic {self.statistic!r}")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.safety_margin < 1:
            raise ValueError("safety_margin must be >= 1")


def lower_median(values: list[int]) -> int:
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def floor_mean(values: list[int]) -> int:
    return sum(values) // len(values)


class UsageEstimator:
    """Keeps the newest ``window`` samples per key.

    Pods are recorded under their own id and under ``class:<AppClass>`` so a
    pod that has not yet filled its window can borrow its class's history.
    """

    def __init__(self, config: EstimatorConfig = EstimatorConfig()):
        self.config = config
        self._samples: dict[str, deque] = defaultdict(lambda: deque(maxlen=config.window))

    def record(self, key: str, t: SimTime, usage: ResourceVector) -> None:
        if not isinstance(usage, ResourceVector):
            raise TypeError("usage must be a ResourceVector")
        if usage.cpu < 0 or usage.memory < 0:
            raise ValueError("usage must be non-negative")
        self._samples[key].append((t, usage))

    def record_pod(self, pod: Pod, t: SimTime, usage: ResourceVector) -> None:
        self.record(pod.id, t, usage)
        self.record(class_key(pod), t, usage)

    def samples(self, key: str) -> list[tuple[SimTime, ResourceVector]]:
        return list(self._samples.get(key, ()))

    def estimate(self, key: str, config: Optional[EstimatorConfig] = None,
                 request: Optional[ResourceVector] = None) -> Optional[ResourceVector]:
        """Statistic of the windowed samples times the safety margin, capped at ``request``.

        Margins are applied exactly (as a fraction) and rounded up, since the
        result is a reservation and rounding down would under-reserve.
        """
        config = config or self.config
        window = list(self._samples.get(key, ()))[-config.window:]
        if not window:
            return None
        stat = lower_median if config.statistic == "median" else floor_mean
        margin = Fraction(config.safety_margin).limit_denominator(10_000)
        cpu = math.ceil(stat([u.cpu for _, u in window]) * margin)
        mem = math.ceil(stat([u.memory for _, u in window]) * margin)
        if request is not None:
            cpu = min(cpu, request.cpu)
            mem = min(mem, request.memory)
        return ResourceVector(cpu, mem)

    def reservation(self, pod: Pod) -> Optional[ResourceVector]:
        own = self._samples.get(pod.id)
        if own is not None and len(own) >= self.config.window:
            return self.estimate(pod.id, request=pod.request)
        shared = self.estimate(class_key(pod), request=pod.request)
        if shared is not None:
            return shared
        return self.estimate(pod.id, request=pod.request)


def class_key(pod: Pod) -> str:
    return f"class:{pod.app_class.value}"
