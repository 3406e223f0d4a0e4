"""Pod arrival streams: synthetic batches, trace files, revocation processes."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Optional

from .cluster import AppClass, Movability, Pod, ResourceVector
from .errors import TraceFormatError
from .kernel import Rng, SimTime

TRACE_FIELDS = ("id", "submit_s", "cpu_m", "mem_mib", "duration_s", "app_class",
                "movability", "fault_tolerant", "deadline_s")


def homogeneous_batch(n: int, interarrival: int, request: ResourceVector, duration: int,
                      prefix: str = "pod") -> list[Pod]:
    """``n`` identical fault-tolerant batch pods, one every ``interarrival`` seconds."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if interarrival < 0:
        raise ValueError("interarrival must be >= 0")
    width = max(3, len(str(n - 1)))
    return [
        Pod(id=f"{prefix}-{i:0{width}d}", submit_time=i * interarrival, request=request,
            nominal_duration=duration, app_class=AppClass.BATCH_ANALYTICS,
            movability=Movability.MOVABLE_STATELESS, fault_tolerant=True)
        for i in range(n)
    ]


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_int(value) -> int:
    if isinstance(value, bool):
        raise ValueError(f"not an integer: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"not an integer: {value!r}")
        return int(value)
    return int(str(value).strip())


def pod_from_record(rec: dict, line: int) -> Pod:
    """Build a Pod from one trace record, naming the offending field on failure."""
    missing = [f for f in TRACE_FIELDS if f not in rec and f not in ("deadline_s",)]
    if missing:
        raise TraceFormatError("missing field", line, missing[0])

    def field(name, conv):
        try:
            return conv(rec[name])
        except (TypeError, ValueError, KeyError) as exc:
            raise TraceFormatError(str(exc), line, name) from None

    pod_id = str(rec["id"]).strip()
    if not pod_id:
        raise TraceFormatError("empty id", line, "id")
    submit = field("submit_s", _parse_int)
    cpu = field("cpu_m", _parse_int)
    mem = field("mem_mib", _parse_int)
    duration = field("duration_s", _parse_int)
    app_class = field("app_class", AppClass)
    movability = field("movability", Movability)
    fault_tolerant = field("fault_tolerant",
                           lambda v: v if isinstance(v, bool) else _parse_bool(str(v)))
    raw_deadline = rec.get("deadline_s")
    deadline = None
    if raw_deadline not in (None, ""):
        deadline = field("deadline_s", _parse_int)

    for name, value in (("submit_s", submit), ("cpu_m", cpu), ("mem_mib", mem),
                        ("duration_s", duration)):
        if value < 0:
            raise TraceFormatError(f"must be >= 0, got {value}", line, name)
    if deadline is not None and deadline < submit:
        raise TraceFormatError("deadline precedes submission", line, "deadline_s")
    return Pod(id=pod_id, submit_time=submit, request=ResourceVector(cpu, mem),
               nominal_duration=duration, app_class=app_class, movability=movability,
               fault_tolerant=fault_tolerant, deadline=deadline)


def parse_trace(text: str, fmt: str = "csv") -> list[Pod]:
    pods = []
    if fmt == "csv":
        reader = csv.DictReader(io.StringIO(text))
        header = reader.fieldnames or []
        absent = [f for f in TRACE_FIELDS if f not in header]
        if absent:
            raise TraceFormatError("header lacks column", 1, absent[0])
        for row in reader:
            pods.append(pod_from_record(row, reader.line_num))
    elif fmt == "jsonl":
        for lineno, raw in enumerate(text.splitlines(), start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise TraceFormatError(f"invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(rec, dict):
                raise TraceFormatError("record is not an object", lineno)
            pods.append(pod_from_record(rec, lineno))
    else:
        raise ValueError(f"unknown trace format {fmt!r}")
    seen = set()
    for p in pods:
        if p.id in seen:
            raise TraceFormatError(f"duplicate pod id {p.id!r}", 0, "id")
        seen.add(p.id)
    pods.sort(key=lambda p: p.submit_time)  # stable: ties keep file order
    return pods


def load_trace(path, fmt: Optional[str] = None) -> list[Pod]:
    path = Path(path)
    if fmt is None:
        fmt = "jsonl" if path.suffix in (".jsonl", ".ndjson") else "csv"
    return parse_trace(path.read_text(), fmt)


def _record(pod: Pod) -> dict:
    return {
        "id": pod.id,
        "submit_s": pod.submit_time,
        "cpu_m": pod.request.cpu,
        "mem_mib": pod.request.memory,
        "duration_s": pod.nominal_duration,
        "app_class": pod.app_class.value,
        "movability": pod.movability.value,
        "fault_tolerant": pod.fault_tolerant,
        "deadline_s": pod.deadline,
    }


def dump_trace(pods: Iterable[Pod], fmt: str = "csv") -> str:
    """Canonical serialization; ``parse_trace(dump_trace(p))`` reproduces ``p``."""
    if fmt == "jsonl":
        return "".join(json.dumps(_record(p), separators=(",", ":")) + "\n" for p in pods)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_FIELDS)
    for p in pods:
        rec = _record(p)
        rec["fault_tolerant"] = "true" if p.fault_tolerant else "false"
        rec["deadline_s"] = "" if p.deadline is None else p.deadline
        writer.writerow([rec[f] for f in TRACE_FIELDS])
    return buf.getvalue()


def preemption_events(rng: Rng, rate: float, horizon: SimTime,
                      nodes: Iterable[str], start: SimTime = 0) -> list[tuple[SimTime, str]]:
    """Revocation times for each preemptible node as a Poisson process.

    ``rate`` is in revocations per node-hour. Each node draws from its own
    child stream of ``rng`` so the times for one node do not depend on which
    other nodes are in the set. Times are whole seconds (rounded up) in
    ``(start, horizon]``; the result is sorted by (time, node).
    """
    if rate < 0:
        raise ValueError("rate must be >= 0")
    events = []
    if rate == 0:
        return events
    per_second = rate / 3600.0
    for node in nodes:
        stream = rng.spawn(f"revoke:{node}")
        t = float(start)
        while True:
            t += stream.exponential(per_second)
            at = math.ceil(t)
            if at > horizon:
                break
            events.append((at, node))
    events.sort()
    return events
