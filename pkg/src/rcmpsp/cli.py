"""Command line entry point, solution files, solution validation and the benchmark harness.

Usage::

    rcmp-solver <instance> <solution-out> <seconds> <seed> [--trace FILE]
    rcmp-solver bench <dir> --runs N --budget S --seed K --out results.csv
    rcmp-solver validate <instance> <solution>

``RCMP_THREADS`` overrides the worker count (default 4).

Solution files list one real activity per line as ``<id> <mode> <start>``,
where ``id`` is the 1-based global index (the dummy source is 1) and ``mode``
is 1-based, after a ``# tpd=.. tms=.. f=.. seed=..`` header.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .evaluation import Evaluation, EvaluationConfig, Genotype, Schedule
from .instance import Instance, InstanceFormatError, InstanceValidationError, load_instance
from .modes import RepairExhausted, excess
from .orchestrator import DEFAULT_WORKERS, solve
from .search import SearchConfig, Trace

log = logging.getLogger(__name__)

# share of the wall-clock budget kept back for writing the solution
WRITE_RESERVE = 0.02

EXIT_OK, EXIT_IO, EXIT_INFEASIBLE = 0, 1, 2


class SolutionFormatError(ValueError):
    pass


# --------------------------------------------------------------------------- solution files


def format_solution(instance: Instance, genotype: Genotype, schedule: Schedule,
                    evaluation: Evaluation, seed: int) -> str:
    lines = [f"# tpd={evaluation.tpd} tms={evaluation.tms} f={evaluation.f} seed={seed}"]
    for i in instance.real_activities:
        lines.append(f"{i + 1} {genotype.modes[i] + 1} {schedule.start[i]}")
    return "\n".join(lines) + "\n"


def write_solution(instance: Instance, genotype: Genotype, schedule: Schedule, path: str | Path,
                   evaluation: Evaluation, seed: int = 0) -> None:
    Path(path).write_text(format_solution(instance, genotype, schedule, evaluation, seed), encoding="utf-8")


@dataclass(frozen=True)
class Violation:
    kind: str
    activity: int | None  # 1-based global id
    time: int | None
    detail: str


@dataclass
class ValidationReport:
    evaluation: Evaluation | None
    violations: list[Violation] = field(default_factory=list)
    header: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


def parse_solution(text: str) -> tuple[dict[str, int], list[tuple[int, int, int, int]]]:
    """Return the header fields and ``(line, id, mode, start)`` rows (all 1-based as written)."""
    header: dict[str, int] = {}
    rows = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for item in line[1:].split():
                key, sep, value = item.partition("=")
                if sep:
                    try:
                        header[key] = int(value)
                    except ValueError:
                        raise SolutionFormatError(f"line {no}: bad header value {item!r}") from None
            continue
        parts = line.split()
        if len(parts) != 3:
            raise SolutionFormatError(f"line {no}: expected '<id> <mode> <start>', got {line!r}")
        try:
            rows.append((no, *map(int, parts)))
        except ValueError:
            raise SolutionFormatError(f"line {no}: non-integer field in {line!r}") from None
    return header, rows


def validate_solution(instance: Instance, solution: str | Path,
                      config: EvaluationConfig = EvaluationConfig()) -> ValidationReport:
    """Check a solution file from scratch and recompute its objective.

    Every violated constraint is reported; the evaluation is only filled in
    when there are none.
    """
    text = Path(solution).read_text(encoding="utf-8")
    header, rows = parse_solution(text)
    v: list[Violation] = []
    n = instance.n
    modes = [0] * n
    start: list[int | None] = [None] * n
    start[0] = 0

    for no, gid, mode, st in rows:
        i = gid - 1
        if not 0 < i < n - 1:
            v.append(Violation("structure", gid, None, f"line {no}: unknown activity id {gid}"))
            continue
        if start[i] is not None:
            v.append(Violation("structure", gid, None, f"line {no}: activity listed twice"))
            continue
        if not 1 <= mode <= instance.num_modes[i]:
            v.append(Violation("structure", gid, None,
                               f"line {no}: mode {mode} out of range 1..{instance.num_modes[i]}"))
            continue
        modes[i] = mode - 1
        start[i] = st
    for i in instance.real_activities:
        if start[i] is None and not any(x.activity == i + 1 for x in v):
            v.append(Violation("structure", i + 1, None, "activity missing"))
    if v:
        return ValidationReport(None, v, header)

    dur = [instance.durations[i][modes[i]] for i in range(n)]
    # the sink sits at the latest finish; it constrains nothing
    start[n - 1] = max((start[i] + dur[i] for i in range(n - 1)), default=0)
    finish = [start[i] + dur[i] for i in range(n)]

    for i in instance.real_activities:
        if start[i] < 0:
            v.append(Violation("negative-start", i + 1, start[i], "start before time 0"))
        if start[i] < instance.release_of[i]:
            v.append(Violation("release", i + 1, start[i],
                               f"starts before project release {instance.release_of[i]}"))
        for j in instance.predecessors[i]:
            if finish[j] > start[i]:
                v.append(Violation("precedence", i + 1, start[i],
                                   f"starts before predecessor {j + 1} finishes at {finish[j]}"))

    load: dict[tuple[int, int], int] = {}
    for i in instance.real_activities:
        for r, q in instance.renewable_use[i][modes[i]]:
            for t in range(start[i], finish[i]):
                load[r, t] = load.get((r, t), 0) + q
    for (r, t), used in sorted(load.items()):
        if used > instance.renewable_caps[r]:
            v.append(Violation("renewable", None, t,
                               f"resource {r + 1} uses {used} > capacity {instance.renewable_caps[r]}"))

    rep = excess(instance, modes)
    for r, over in enumerate(rep.per_resource):
        if over:
            v.append(Violation("nonrenewable", None, None,
                               f"non-renewable resource {r + 1} over capacity by {over}"))
    if v:
        return ValidationReport(None, v, header)

    tms = max(finish, default=0)
    tpd = 0
    for p, members in enumerate(instance.project_activities):
        release = instance.projects[p].release_date
        tpd += max((finish[i] for i in members), default=release) - release - instance.project_cpd[p]
    return ValidationReport(Evaluation(tpd, tms, config.alpha * tpd + tms), [], header)


# --------------------------------------------------------------------------- benchmark harness


BENCH_FIELDS = ("instance", "runs", "failures", "best_tpd", "best_tms", "best_f",
                "median_tpd", "median_tms", "median_f")


def summarize(evaluations: Sequence[Evaluation]) -> tuple[Evaluation, Evaluation]:
    """Best and lower-median run by f."""
    ranked = sorted(evaluations, key=lambda e: e.f)
    return ranked[0], ranked[(len(ranked) - 1) // 2]


def bench(instances: Sequence[str | Path], runs: int, budget: float, base_seed: int,
          out, workers: int = DEFAULT_WORKERS, config: SearchConfig | None = None) -> list[dict]:
    """Run every instance ``runs`` times (seeds ``base_seed + k``) and write a CSV summary."""
    config = config or SearchConfig()
    writer = csv.DictWriter(out, fieldnames=BENCH_FIELDS)
    writer.writeheader()
    rows = []
    for path in instances:
        path = Path(path)
        results, failures = [], 0
        try:
            instance = load_instance(path)
        except (OSError, ValueError) as exc:
            log.error("%s: %s", path, exc)
            instance, failures = None, runs
        for k in range(runs if instance is not None else 0):
            try:
                res = solve(instance, replace(config, time_budget=budget, seed=base_seed + k), workers)
                results.append(res.evaluation)
            except Exception as exc:  # noqa: BLE001 - harness records and moves on
                log.error("%s run %d: %s", path.name, k, exc)
                failures += 1
        row = {"instance": path.name, "runs": runs, "failures": failures}
        if results:
            best, median = summarize(results)
            row.update(best_tpd=best.tpd, best_tms=best.tms, best_f=best.f,
                       median_tpd=median.tpd, median_tms=median.tms, median_f=median.f)
        writer.writerow(row)
        rows.append(row)
    return rows


# --------------------------------------------------------------------------- entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


def worker_count() -> int:
    raw = os.environ.get("RCMP_THREADS")
    if not raw:
        return DEFAULT_WORKERS
    try:
        value = int(raw)
    except ValueError:
        raise SystemExit(f"RCMP_THREADS must be an integer, got {raw!r}")
    return max(1, value)


def _solve_command(argv: Sequence[str]) -> int:
    t0 = time.monotonic()
    parser = _Parser(prog="rcmp-solver", description="Iterated VNS for multi-mode multi-project scheduling.")
    parser.add_argument("instance")
    parser.add_argument("solution")
    parser.add_argument("seconds", type=int)
    parser.add_argument("seed", type=int)
    parser.add_argument("--trace", help="write a CSV trace of moves and perturbations")
    args = parser.parse_args(argv)
    if args.seconds <= 0:
        parser.error("seconds must be positive")

    try:
        instance = load_instance(args.instance)
    except OSError as exc:
        print(f"error: cannot read instance: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InstanceFormatError, InstanceValidationError) as exc:
        print(f"error: {args.instance}: {exc}", file=sys.stderr)
        return EXIT_IO

    remaining = args.seconds * (1 - WRITE_RESERVE) - (time.monotonic() - t0)
    config = SearchConfig(time_budget=max(remaining, 1e-3), seed=args.seed)
    trace_file = open(args.trace, "w", newline="", encoding="utf-8") if args.trace else None
    try:
        result = solve(instance, config, worker_count(), Trace(trace_file) if trace_file else None)
    except RepairExhausted as exc:
        print(f"error: no feasible mode assignment: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    finally:
        if trace_file:
            trace_file.close()

    try:
        write_solution(instance, result.genotype, result.schedule, args.solution, result.evaluation, args.seed)
    except OSError as exc:
        print(f"error: cannot write solution: {exc}", file=sys.stderr)
        return EXIT_IO
    ev = result.evaluation
    print(f"TPD={ev.tpd} TMS={ev.tms} F={ev.f}")
    return EXIT_OK


def _bench_command(argv: Sequence[str]) -> int:
    parser = _Parser(prog="rcmp-solver bench")
    parser.add_argument("directory")
    parser.add_argument("--runs", type=int, default=20)
    parser.add_argument("--budget", type=float, default=300.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="results.csv")
    parser.add_argument("--pattern", default="*", help="glob for instance files")
    args = parser.parse_args(argv)
    files = sorted(p for p in Path(args.directory).glob(args.pattern) if p.is_file())
    if not files:
        print(f"error: no instance files in {args.directory}", file=sys.stderr)
        return EXIT_IO
    with open(args.out, "w", newline="", encoding="utf-8") as out:
        bench(files, args.runs, args.budget, args.seed, out, worker_count())
    return EXIT_OK


def _validate_command(argv: Sequence[str]) -> int:
    parser = _Parser(prog="rcmp-solver validate")
    parser.add_argument("instance")
    parser.add_argument("solution")
    args = parser.parse_args(argv)
    try:
        instance = load_instance(args.instance)
        report = validate_solution(instance, args.solution)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if not report.ok:
        for x in report.violations:
            print(f"{x.kind}: activity={x.activity} time={x.time} {x.detail}")
        return EXIT_IO
    ev = report.evaluation
    print(f"valid TPD={ev.tpd} TMS={ev.tms} F={ev.f}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    commands = {"bench": _bench_command, "validate": _validate_command}
    try:
        if argv and argv[0] in commands:
            return commands[argv[0]](argv[1:])
        return _solve_command(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
