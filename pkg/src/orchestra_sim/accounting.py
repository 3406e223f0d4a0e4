"""Per-node billing with period rounding and run-level cost totals.

Money is integer micro-dollars throughout; rounding to cents happens only
when a value is formatted for display.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from .cluster import Node, NodeTemplate, PricingKind
from .errors import SimulationError
from .kernel import SimTime

# fitted to the three static-cluster costs of the reference experiment
FITTED_RATE_PER_MIN = 792
# the per-minute price quoted alongside that experiment (B2S-class instance)
QUOTED_RATE_PER_MIN = 11_000

RATE_PRESETS = {
    "fitted": FITTED_RATE_PER_MIN,
    "quoted": QUOTED_RATE_PER_MIN,
}

SCHEDULING_DURATION = "scheduling_duration"
LIFETIME = "lifetime"
CONVENTIONS = (SCHEDULING_DURATION, LIFETIME)

Money = int


def format_usd(micro: Money) -> str:
    cents = round(Fraction(micro, 10_000))
    return f"${cents // 100}.{cents % 100:02d}"


def to_usd(micro: Money) -> float:
    return round(micro / 1_000_000, 2)


@dataclass(frozen=True)
class BillingRecord:
    node_id: str
    billed_from: SimTime
    billed_to: SimTime
    periods: int
    amount: Money

    def to_dict(self) -> dict:
        return {
            "node": self.node_id,
            "billed_from": self.billed_from,
            "billed_to": self.billed_to,
            "periods": self.periods,
            "amount_micro_usd": self.amount,
        }


def periods_between(start: SimTime, end: SimTime, period: int) -> int:
    """Billing periods in ``[start, end]``, any partial period rounded up."""
    if end <= start:
        return 0
    return -(-(end - start) // period)


def bill(node_id: str, template: NodeTemplate, billed_from: SimTime, billed_to: SimTime,
         rate: Optional[int] = None) -> BillingRecord:
    rate = template.rate if rate is None else rate
    pricing = template.pricing
    if pricing.kind is PricingKind.RESERVED:
        periods = pricing.commitment_periods
        amount = periods * rate
    else:
        periods = periods_between(billed_from, billed_to, template.billing_period)
        amount = periods * rate
        if pricing.kind is PricingKind.PREEMPTIBLE:
            amount = round(Fraction(amount) * Fraction(pricing.discount_factor).limit_denominator(10_000))
    return BillingRecord(node_id, billed_from, max(billed_from, billed_to), periods, int(amount))


def node_cost(node: Node, t_end: SimTime, rate: Optional[int] = None) -> Money:
    """Cost of ``node`` from launch to ``t_end`` (or its termination, if earlier)."""
    if t_end < node.launch_time:
        raise SimulationError(f"t_end={t_end} precedes launch of {node.id} at {node.launch_time}")
    end = t_end if node.terminate_time is None else min(t_end, node.terminate_time)
    return bill(node.id, node.template, node.launch_time, end, rate).amount


@dataclass(frozen=True)
class NodeLife:
    """The slice of a node's lifecycle that billing needs."""
    node_id: str
    template: NodeTemplate
    launch: SimTime
    terminate: Optional[SimTime]
    initial: bool


def billing_window(life: NodeLife, convention: str, first_submit: Optional[SimTime],
                   last_bind: Optional[SimTime], run_end: SimTime) -> tuple[SimTime, SimTime]:
    """The interval a node is charged for under ``convention``.

    ``scheduling_duration`` charges every node only while the workload is
    being scheduled: from the first submission (or the node's launch, if
    later) to the last binding (or its termination, if earlier). That is how
    the reference experiment priced its runs. ``lifetime`` charges launch to
    termination, or to the end of the run for nodes still alive.
    """
    stop = life.terminate if life.terminate is not None else run_end
    if convention == LIFETIME:
        return life.launch, min(stop, run_end)
    if convention != SCHEDULING_DURATION:
        raise ValueError(f"unknown billing convention {convention!r}")
    if first_submit is None or last_bind is None:
        return life.launch, life.launch
    start = max(life.launch, first_submit)
    end = min(stop, last_bind)
    return start, max(start, end)


def total_cost(lives: Iterable[NodeLife], convention: str, first_submit: Optional[SimTime],
               last_bind: Optional[SimTime], run_end: SimTime,
               rate: Optional[int] = None) -> tuple[Money, list[BillingRecord]]:
    records = []
    for life in lives:
        start, end = billing_window(life, convention, first_submit, last_bind, run_end)
        records.append(bill(life.node_id, life.template, start, end, rate))
    return sum(r.amount for r in records), records
