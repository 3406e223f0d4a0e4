"""Discrete-event kernel: ordered event queue, integer clock, handler dispatch.

Times are integer simulated seconds. Events are ordered by ``(time, seq)``
where ``seq`` is a global insertion counter, so two events at the same
instant are dispatched in the order they were pushed.
"""
from __future__ import annotations

import heapq
import math
import random
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

from .errors import CausalityError, SimulationError

SimTime = int

INFINITY = math.inf


class EventKind(str, Enum):
    POD_ARRIVAL = "PodArrival"
    POD_STARTED = "PodStarted"
    POD_COMPLETED = "PodCompleted"
    SCHEDULING_CYCLE = "SchedulingCycle"
    MONITORING_TICK = "MonitoringTick"
    NODE_READY = "NodeReady"
    BILLING_BOUNDARY = "BillingBoundary"
    PREEMPTION_REVOCATION = "PreemptionRevocation"
    SCALE_OUT_PERMITTED = "ScaleOutPermitted"


@dataclass(frozen=True, order=True)
class Event:
    time: SimTime
    seq: int
    kind: EventKind
    payload: Optional[str] = None
    # placement attempt of the pod this event refers to; stale events carry an old value
    attempt: int = 0

    def to_record(self) -> dict:
        return {
            "type": "event",
            "t": self.time,
            "seq": self.seq,
            "kind": self.kind.value,
            "payload": self.payload,
            "attempt": self.attempt,
        }


class Rng:
    """Seeded pseudo-random source.

    Backed by the standard library's Mersenne Twister (MT19937). Seeding goes
    through the version-2 string seeding path (SHA-512 of ``"<seed>:<stream>"``),
    which is identical on every platform and Python 3.x release. Only
    ``random()`` and ``randrange()`` are used, both of which have stable
    algorithms, so a given (seed, stream) yields the same sequence everywhere.

    Independent streams keep consumers from perturbing each other: the
    scheduler's draws do not shift the revocation times and vice versa.
    """

    def __init__(self, seed: int, stream: str = "main"):
        self.seed = seed
        self.stream = stream
        self._gen = random.Random(f"{seed}:{stream}")

    def random(self) -> float:
        return self._gen.random()

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        return self._gen.randrange(n)

    def exponential(self, rate: float) -> float:
        """Draw from Exp(rate) by inversion."""
        u = self._gen.random()
        return -math.log(1.0 - u) / rate

    def spawn(self, stream: str) -> "Rng":
        return Rng(self.seed, f"{self.stream}/{stream}")


Handler = Callable[[Event], None]


class Kernel:
    def __init__(self):
        self.now: SimTime = 0
        self._queue: list[Event] = []
        self._seq = 0
        self._handlers: dict[EventKind, Handler] = {}
        # called before / after each handler runs
        self.tracers: list[Callable[[Event], None]] = []
        self.observers: list[Callable[[Event], None]] = []
        self.dispatched: list[Event] = []

    def register(self, kind: EventKind, handler: Handler) -> None:
        self._handlers[kind] = handler

    def push(self, time: SimTime, kind: EventKind, payload: Optional[str] = None,
             attempt: int = 0) -> Event:
        if time < self.now:
            raise CausalityError(f"cannot schedule {kind.value} at t={time}, clock is {self.now}")
        if int(time) != time:
            raise SimulationError(f"event times are integer seconds, got {time!r}")
        ev = Event(int(time), self._seq, kind, payload, attempt)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def peek_time(self) -> Optional[SimTime]:
        return self._queue[0].time if self._queue else None

    def __len__(self) -> int:
        return len(self._queue)

    def run_until(self, t_end: float = INFINITY) -> Counter:
        """Dispatch every queued event with ``time <= t_end``.

        Returns a Counter of dispatched events keyed by kind name. When the
        queue drains before ``t_end`` the clock stays at the last dispatched
        event's time; with an empty queue it does not move at all.
        """
        counts: Counter = Counter()
        while self._queue and self._queue[0].time <= t_end:
            ev = heapq.heappop(self._queue)
            self.now = ev.time
            handler = self._handlers.get(ev.kind)
            if handler is None:
                raise SimulationError(f"no handler registered for {ev.kind.value}")
            for tracer in self.tracers:
                tracer(ev)
            handler(ev)
            self.dispatched.append(ev)
            counts[ev.kind.value] += 1
            for obs in self.observers:
                obs(ev)
        return counts
