"""Command-line entry point: ``orchestra-sim run|compare|validate``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from . import metrics
from . import scenario as scenario_mod
from .errors import ScenarioError, SimulationError
from .simulation import RunResult, run_scenario

EXIT_OK = 0
EXIT_RUN_FAILED = 1
EXIT_INVALID = 2

OUT_ENV = "ORCHESTRA_SIM_OUT"

log = logging.getLogger("orchestra_sim")


def _default_out() -> str:
    return os.environ.get(OUT_ENV, "out")


def _load(path: str, seed: Optional[int]):
    sc = scenario_mod.load(path)
    if seed is not None:
        sc = sc.with_seed(seed)
    return sc


def write_outputs(result: RunResult, out_dir: Path, trace: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    report = result.report
    (out_dir / "report.json").write_text(report.to_json())
    (out_dir / "pending.csv").write_text(metrics.series_csv(report.pending_series))
    (out_dir / "workers.csv").write_text(metrics.series_csv(report.worker_series))
    if trace:
        (out_dir / "trace.jsonl").write_text(metrics.trace_jsonl(result.records))


def format_table(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    widths = {c: max(len(c), *(len(str(r[c])) for r in rows)) for c in cols}
    lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
    lines.append("  ".join("-" * widths[c] for c in cols))
    for r in rows:
        lines.append("  ".join(str(r[c]).ljust(widths[c]) for c in cols))
    return "\n".join(lines)


def _rank(values: list, reverse: bool = False) -> list[int]:
    """Competition ranking (1, 2, 2, 4); None sorts last."""
    def key(v):
        if v is None:
            return float("inf")
        return -v if reverse else v
    keys = [key(v) for v in values]
    return [1 + sum(1 for other in keys if other < k) for k in keys]


def comparison_rows(reports: list[metrics.RunReport]) -> list[dict]:
    rows = [r.table_row() for r in reports]
    ranks = {
        "rank_delay": _rank([r.avg_scheduling_delay_min for r in reports]),
        "rank_duration": _rank([r.total_scheduling_duration_min for r in reports]),
        "rank_throughput": _rank([r.throughput_pods_per_min for r in reports], reverse=True),
        "rank_cost": _rank([r.cost_micro_usd for r in reports]),
    }
    for i, row in enumerate(rows):
        for name, col in ranks.items():
            row[name] = col[i]
    return rows


def cmd_run(args) -> int:
    sc = _load(args.scenario, args.seed)
    result = run_scenario(sc)
    out_dir = Path(args.out or _default_out())
    write_outputs(result, out_dir, args.trace)
    print(format_table([result.report.table_row()]))
    print(f"wrote {out_dir}/")
    return EXIT_OK


def cmd_compare(args) -> int:
    if len(args.scenarios) < 2:
        print("compare needs at least two scenarios", file=sys.stderr)
        return EXIT_INVALID
    scenarios = [_load(p, args.seed) for p in args.scenarios]
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(run_scenario, scenarios))
    out_dir = Path(args.out or _default_out())
    for i, (sc, result) in enumerate(zip(scenarios, results), start=1):
        write_outputs(result, out_dir / f"{i:02d}-{sc.name}", trace=False)
    rows = comparison_rows([r.report for r in results])
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "comparison.json").write_text(json.dumps(rows, indent=2) + "\n")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    (out_dir / "comparison.csv").write_text(buf.getvalue())
    print(format_table(rows))
    return EXIT_OK


def cmd_validate(args) -> int:
    for path in args.scenarios:
        sc = scenario_mod.load(path)
        print(f"{path}: ok ({sc.name}, {len(sc.pods)} pods)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orchestra-sim",
                                     description="Container orchestration cost/performance simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
    p.add_argument("--trace", action="store_true", help="also write trace.jsonl")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several scenarios and tabulate them")
    p.add_argument("scenarios", nargs="+")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=4)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="check scenario files without running them")
    p.add_argument("scenarios", nargs="+")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, SimulationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILED


if __name__ == "__main__":
    sys.exit(main())
