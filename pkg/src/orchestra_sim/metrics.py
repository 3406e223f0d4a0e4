"""Run-level monitoring and the summary report.

The simulator appends plain dict records to a run log; :func:`summary`
derives every reported number from that log alone, so a report can be
rebuilt offline from a saved ``trace.jsonl``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from . import accounting
from .cluster import (Cluster, NodeTemplate, PodState, PricingKind, PricingModel,
                      ResourceVector)
from .kernel import SimTime

log = logging.getLogger(__name__)


def sample(t: SimTime, cluster: Cluster) -> dict:
    pending = sum(1 for p in cluster.pods.values() if p.state is PodState.PENDING)
    return {"type": "sample", "t": t, "pending": pending, "workers": cluster.worker_count()}


@dataclass
class RunReport:
    scenario: str
    seed: int
    pods: int
    avg_scheduling_delay_min: Optional[float]
    total_scheduling_duration_min: float
    throughput_pods_per_min: Optional[float]
    cost_micro_usd: int
    cost_usd: str
    qos_violations: int
    launches: int
    evictions: int
    failed: int
    succeeded: int
    run_end_s: int
    warnings: list[str] = field(default_factory=list)
    billing: list[dict] = field(default_factory=list)
    event_counts: dict[str, int] = field(default_factory=dict)
    pending_series: list[tuple[int, int]] = field(default_factory=list)
    worker_series: list[tuple[int, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pending_series"] = [list(p) for p in self.pending_series]
        d["worker_series"] = [list(p) for p in self.worker_series]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def table_row(self) -> dict:
        return {
            "scenario": self.scenario,
            "avg_delay_min": _fmt(self.avg_scheduling_delay_min),
            "duration_min": _fmt(self.total_scheduling_duration_min),
            "throughput_pods_per_min": _fmt(self.throughput_pods_per_min),
            "cost": self.cost_usd,
        }


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.2f}"


def template_from_dict(name: str, d: dict) -> NodeTemplate:
    kind = PricingKind(d.get("pricing", "on_demand"))
    pricing = PricingModel(kind, float(d.get("discount", 1.0)), int(d.get("commitment_periods", 0)))
    return NodeTemplate(name=name, capacity=ResourceVector(int(d["cpu_m"]), int(d["mem_mib"])),
                        pricing=pricing, rate=int(d["rate_micro_usd"]),
                        billing_period=int(d["billing_period_s"]),
                        boot_delay=int(d.get("boot_delay_s", 0)))


def summary(records: Iterable[dict]) -> RunReport:
    """Compute the run report from a run log.

    Scheduling delay is the first binding minus submission, averaged over
    every pod that was bound. Total scheduling duration runs from the first
    submission to the last binding of any pod; throughput is pods bound per
    minute of that duration. A run with unbound pods reports its duration up
    to the end of the run and carries a warning.
    """
    header: dict = {}
    submits: dict[str, int] = {}
    first_bind: dict[str, int] = {}
    last_bind: Optional[int] = None
    pending_series: list[tuple[int, int]] = []
    worker_series: list[tuple[int, int]] = []
    launches: dict[str, dict] = {}
    terminations: dict[str, int] = {}
    qos = set()
    evictions = 0
    outcomes: dict[str, str] = {}
    counts: Counter = Counter()
    run_end = 0
    for rec in records:
        kind = rec["type"]
        if kind == "event":
            counts[rec["kind"]] += 1
        elif kind == "header":
            header = rec
        elif kind == "submit":
            submits.setdefault(rec["pod"], rec["t"])
        elif kind == "bind":
            first_bind.setdefault(rec["pod"], rec["t"])
            last_bind = rec["t"] if last_bind is None else max(last_bind, rec["t"])
        elif kind == "sample":
            pending_series.append((rec["t"], rec["pending"]))
            worker_series.append((rec["t"], rec["workers"]))
        elif kind == "node_launch":
            launches[rec["node"]] = rec
        elif kind == "node_terminate":
            terminations[rec["node"]] = rec["t"]
        elif kind == "qos_violation":
            qos.add(rec["pod"])
        elif kind == "evict":
            evictions += 1
        elif kind == "release":
            outcomes[rec["pod"]] = rec["state"]
        elif kind == "run_end":
            run_end = rec["t"]

    warnings = []
    delays = [first_bind[p] - submits[p] for p in first_bind if p in submits]
    avg_delay = sum(delays) / len(delays) / 60 if delays else None
    first_submit = min(submits.values()) if submits else None
    unbound = [p for p in submits if p not in first_bind]
    if unbound:
        warnings.append(f"{len(unbound)} pod(s) never bound; duration measured to run end")
        duration_end = run_end
    else:
        duration_end = last_bind if last_bind is not None else run_end
    duration_s = 0 if first_submit is None else max(0, duration_end - first_submit)
    duration_min = duration_s / 60
    n_bound = len(first_bind)
    throughput = n_bound / duration_min if duration_s > 0 else None
    if duration_s == 0 and n_bound:
        warnings.append("zero scheduling duration; throughput undefined")

    templates = {name: template_from_dict(name, d) for name, d in header.get("templates", {}).items()}
    acct = header.get("accounting", {})
    lives = [
        accounting.NodeLife(node_id=nid, template=templates[rec["template"]], launch=rec["t"],
                            terminate=terminations.get(nid), initial=rec.get("initial", False))
        for nid, rec in launches.items()
    ]
    # the scheduling-duration convention bills up to the same end point as the duration metric
    cost, bills = accounting.total_cost(
        lives, acct.get("convention", accounting.SCHEDULING_DURATION), first_submit,
        duration_end if first_submit is not None else None, run_end, acct.get("rate_micro_usd"))

    for w in warnings:
        log.warning("%s: %s", header.get("scenario", "?"), w)
    final = Counter(outcomes.values())
    return RunReport(
        scenario=header.get("scenario", ""),
        seed=header.get("seed", 0),
        pods=len(submits),
        avg_scheduling_delay_min=avg_delay,
        total_scheduling_duration_min=duration_min,
        throughput_pods_per_min=throughput,
        cost_micro_usd=cost,
        cost_usd=accounting.format_usd(cost),
        qos_violations=len(qos),
        launches=sum(1 for r in launches.values() if not r.get("initial")),
        evictions=evictions,
        failed=final.get(PodState.FAILED.value, 0),
        succeeded=final.get(PodState.SUCCEEDED.value, 0),
        run_end_s=run_end,
        warnings=warnings,
        billing=[b.to_dict() for b in bills],
        event_counts=dict(sorted(counts.items())),
        pending_series=pending_series,
        worker_series=worker_series,
    )


def series_csv(series: list[tuple[int, int]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t_s", "count"])
    writer.writerows(series)
    return buf.getvalue()


def trace_jsonl(records: Iterable[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in records)


def read_trace(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
