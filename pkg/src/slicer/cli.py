"""Command-line driver: parse, lower, reduce, compact, slice, validate, report."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from .engine import (
    SlicerConfig, Verdict, VerdictStatus, WeakeningMode, prepare_cfa, run_fixpoint, validate_invariant,
)
from .formula import to_text
from .lang import ParseError, load_program
from .rcnf import DEFAULT_EXPANSION_LIMIT
from .smt import DEFAULT_SOLVER, SolverError, SolverSession

EXIT_SAFE, EXIT_UNKNOWN, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("slicer")


@dataclass(frozen=True)
class RunConfig:
    input: Path
    solver_cmd: str = field(default_factory=lambda: os.environ.get("SLICER_SOLVER", DEFAULT_SOLVER))
    weakening: str = "cex"
    expansion_limit: int = DEFAULT_EXPANSION_LIMIT
    query_timeout_ms: int = 10_000
    wall_budget_s: float | None = None
    budget_nodes: int = 10_000
    dump_invariants: bool = False
    stats_out: Path | None = None
    smtlib_log: Path | None = None

    def __post_init__(self):
        if self.weakening not in ("cex", "syntactic"):
            raise ValueError(f"unknown weakening mode {self.weakening!r}")
        if self.expansion_limit < 1 or self.query_timeout_ms < 1 or self.budget_nodes < 1:
            raise ValueError("budgets must be positive")
        if self.wall_budget_s is not None and self.wall_budget_s <= 0:
            raise ValueError("budgets must be positive")

    def slicer_config(self) -> SlicerConfig:
        return SlicerConfig(weakening=WeakeningMode(self.weakening),
                            expansion_limit=self.expansion_limit,
                            node_budget=self.budget_nodes,
                            time_budget_s=self.wall_budget_s)


@dataclass
class Report:
    verdict: str
    reason: str
    invariants: dict[str, str]
    stats: dict
    witness: list[str] | None = None


def build_report(cfa, verdict: Verdict, sessions: Sequence[SolverSession], wall_time: float) -> Report:
    checks = {k: sum(getattr(s.stats, k) for s in sessions) for k in ("checks", "sat", "unsat", "unknown")}
    hist = verdict.stats.histogram()
    stats = {
        "art_size": verdict.stats.art_size,
        "cfa_edges": len(cfa.edges),
        "cfa_nodes": len(cfa.nodes),
        "coverage_checks": verdict.stats.coverage_checks,
        "histogram": [list(p) for p in hist],
        "solver_checks": checks["checks"],
        "solver_sat": checks["sat"],
        "solver_unknown": checks["unknown"],
        "solver_unsat": checks["unsat"],
        "wall_time": round(wall_time, 6),
        "weakening_queries": sum(e.queries for e in verdict.stats.weakenings),
        "weakenings": len(verdict.stats.weakenings),
    }
    invariants = {cfa.label(n): to_text(f) for n, f in sorted(verdict.invariant.items())}
    witness = None
    if verdict.witness_path is not None:
        witness = [str(i) for i in verdict.witness_path]
    return Report(verdict.status.value, verdict.reason, invariants, stats, witness)


def emit_report(r: Report, config: RunConfig | None = None) -> bytes:
    """Line-oriented ``key: value`` text with a fenced block per invariant."""
    lines = [f"verdict: {r.verdict}", f"reason: {r.reason}"]
    for k in sorted(r.stats):
        v = r.stats[k]
        if k == "histogram":
            v = " ".join(f"{q}:{n}" for q, n in v)
        lines.append(f"{k}: {v}")
    if r.witness is not None:
        lines.append(f"witness: {' -> '.join(r.witness)}")
    if config is None or config.dump_invariants:
        for node, text in r.invariants.items():
            lines += [f"invariant {node}:", "```", text, "```"]
    return ("\n".join(lines) + "\n").encode()


def run(config: RunConfig) -> tuple[Report, int]:
    start = time.monotonic()
    cfa = prepare_cfa(load_program(config.input.read_text(encoding="utf-8")))
    main_s = SolverSession(config.solver_cmd, config.query_timeout_ms, config.smtlib_log)
    sessions = [main_s]
    try:
        if cfa.is_empty:
            verdict = Verdict(VerdictStatus.SAFE, {}, reason="error location unreachable")
        else:
            _, verdict = run_fixpoint(cfa, config.slicer_config(), main_s)
            if verdict.safe:
                check_s = SolverSession(config.solver_cmd, config.query_timeout_ms, config.smtlib_log)
                sessions.append(check_s)
                if not validate_invariant(cfa, verdict.invariant, check_s):
                    verdict = Verdict(VerdictStatus.UNKNOWN, verdict.invariant, None, verdict.stats,
                                      "invariant failed independent validation")
        report = build_report(cfa, verdict, sessions, time.monotonic() - start)
    finally:
        for s in sessions:
            s.close()
    return report, EXIT_SAFE if verdict.safe else EXIT_UNKNOWN


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slicer", description="Inductive invariants by formula slicing.")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="verify the asserts of a program")
    v.add_argument("file", type=Path)
    v.add_argument("--solver-cmd", default=None,
                   help=f"solver command line (default: $SLICER_SOLVER or '{DEFAULT_SOLVER}')")
    v.add_argument("--weakening", choices=["cex", "syntactic"], default="cex")
    v.add_argument("--expansion-limit", type=int, default=DEFAULT_EXPANSION_LIMIT)
    v.add_argument("--query-timeout", type=int, default=10_000, metavar="MS")
    v.add_argument("--wall-budget", type=float, default=None, metavar="SECONDS")
    v.add_argument("--budget-nodes", type=int, default=10_000)
    v.add_argument("--dump-invariants", action="store_true")
    v.add_argument("--stats-out", type=Path, default=None)
    v.add_argument("--smtlib-log", type=Path, default=None, metavar="DIR")
    v.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_SAFE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = RunConfig(
            input=args.file,
            solver_cmd=args.solver_cmd or os.environ.get("SLICER_SOLVER", DEFAULT_SOLVER),
            weakening=args.weakening,
            expansion_limit=args.expansion_limit,
            query_timeout_ms=args.query_timeout,
            wall_budget_s=args.wall_budget,
            budget_nodes=args.budget_nodes,
            dump_invariants=args.dump_invariants,
            stats_out=args.stats_out,
            smtlib_log=args.smtlib_log,
        )
    except ValueError as e:
        print(f"slicer: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report, code = run(config)
    except OSError as e:
        print(f"slicer: cannot read {config.input}: {e.strerror or e}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as e:
        print(f"slicer: {config.input}:{e}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as e:
        print(f"slicer: solver error: {e}", file=sys.stderr)
        return EXIT_SOLVER
    sys.stdout.buffer.write(emit_report(report, config))
    sys.stdout.flush()
    if config.stats_out is not None:
        config.stats_out.write_text(json.dumps(asdict(report), indent=2, sort_keys=True) + "\n")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
