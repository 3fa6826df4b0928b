"""Incremental SMT-LIB session with an external solver process."""

from __future__ import annotations

import enum
import itertools
import logging
import os
import select
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .formula import (
    Formula, MissingValue, Value, Var, bool_vars, conj, evaluate as _evaluate,
    evaluate3, is_quantifier_free, neg, smt_symbol, to_smt,
)

log = logging.getLogger(__name__)

DEFAULT_SOLVER = "z3 -in"


class SolverError(RuntimeError):
    """Spawn failure, protocol error, or unexpected process death."""


class Status(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


@dataclass
class SolverStats:
    sat: int = 0
    unsat: int = 0
    unknown: int = 0
    checks: int = 0
    wall_time: float = 0.0

    def record(self, status: Status, elapsed: float) -> None:
        self.checks += 1
        self.wall_time += elapsed
        if status is Status.SAT:
            self.sat += 1
        elif status is Status.UNSAT:
            self.unsat += 1
        else:
            self.unknown += 1


@dataclass(frozen=True)
class Model:
    """Values reported by the solver; variables it omitted are don't-cares."""

    assignment: Mapping[Var, Value] = field(default_factory=dict)

    def __getitem__(self, v: Var) -> Value:
        return self.assignment[v]

    def __contains__(self, v: Var) -> bool:
        return v in self.assignment

    def get(self, v: Var, default=None):
        return self.assignment.get(v, default)


def evaluate(m: Model | Mapping[Var, Value], f: Formula) -> bool:
    """Evaluate ``f`` under ``m``; raises MissingValue for absent variables."""
    env = m.assignment if isinstance(m, Model) else m
    return _evaluate(f, env)


def evaluate_partial(m: Model, f: Formula) -> bool | None:
    """Three-valued evaluation; None means the model leaves ``f`` undetermined."""
    return evaluate3(f, m.assignment)


# --------------------------------------------------------------------------
# s-expression reader


def _tokens(text: str) -> Iterable[str]:
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield ch
            i += 1
        elif ch == "|":
            j = text.index("|", i + 1)
            yield text[i:j + 1]
            i = j + 1
        elif ch == '"':
            j = i + 1
            while True:
                j = text.index('"', j)
                if j + 1 < n and text[j + 1] == '"':
                    j += 2
                    continue
                break
            yield text[i:j + 1]
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in '();|"':
                j += 1
            yield text[i:j]
            i = j


def parse_sexprs(text: str) -> list:
    """Parse all complete s-expressions in ``text`` into nested lists of str."""
    stack: list[list] = [[]]
    for tok in _tokens(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise SolverError(f"unbalanced ')' in solver output: {text!r}")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise SolverError("incomplete s-expression")
    return stack[0]


def _complete(text: str) -> bool:
    """True when ``text`` holds at least one complete top-level s-expression."""
    depth = 0
    seen = False
    try:
        for tok in _tokens(text):
            if tok == "(":
                depth += 1
            elif tok == ")":
                depth -= 1
                if depth == 0:
                    return True
            elif depth == 0:
                seen = True
    except ValueError:  # unterminated quoted symbol or string
        return False
    return seen and depth == 0 and text.endswith("\n")


def _value(sx) -> Value:
    if sx == "true":
        return True
    if sx == "false":
        return False
    if isinstance(sx, str):
        return int(sx)
    if isinstance(sx, list) and len(sx) == 2 and sx[0] == "-":
        return -int(_value(sx[1]))
    raise SolverError(f"unsupported model value {sx!r}")


# --------------------------------------------------------------------------
# session

_session_ids = itertools.count()


class SolverSession:
    """One solver process; one query in flight at a time.

    Symbols are declared lazily on first use and declarations are global, so
    ``pop`` only retracts assertions.  On a per-query timeout the process is
    restarted and the assertion stack replayed, and the query reports UNKNOWN.
    """

    def __init__(self, solver_command: Sequence[str] | str | None = None,
                 timeout_ms: int = 10_000, log_dir: str | os.PathLike | None = None):
        if solver_command is None:
            solver_command = os.environ.get("SLICER_SOLVER", DEFAULT_SOLVER)
        if isinstance(solver_command, str):
            solver_command = shlex.split(solver_command)
        self.command = list(solver_command)
        self.timeout_ms = timeout_ms
        self.stats = SolverStats()
        self.sorts: dict[Var, str] = {}
        self._by_symbol: dict[str, Var] = {}
        self._frames: list[list[str]] = [[]]
        self._decls: list[str] = []
        self._proc: subprocess.Popen | None = None
        self._buf = b""
        self._log = None
        self.id = next(_session_ids)
        if log_dir is not None:
            Path(log_dir).mkdir(parents=True, exist_ok=True)
            self._log = open(Path(log_dir) / f"session-{os.getpid()}-{self.id}.smt2", "w")
        self._spawn()

    # -- process plumbing ---------------------------------------------------

    def _spawn(self) -> None:
        try:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, bufsize=0)
        except OSError as e:
            raise SolverError(f"cannot start solver {self.command!r}: {e}") from e
        self._buf = b""
        try:
            for cmd in ("(set-option :print-success true)",
                        "(set-option :global-declarations true)",
                        "(set-option :produce-models true)",
                        "(set-logic QF_LIA)"):
                self._command(cmd)
        except SolverError as e:
            self.close()
            raise SolverError(f"handshake with solver failed: {e}") from e

    def _send(self, text: str) -> None:
        if self._log:
            self._log.write(text + "\n")
        assert self._proc is not None and self._proc.stdin is not None
        try:
            self._proc.stdin.write((text + "\n").encode())
        except (BrokenPipeError, OSError) as e:
            raise SolverError(f"solver process died: {e}") from e

    def _receive(self, deadline: float | None = None) -> list | str:
        assert self._proc is not None and self._proc.stdout is not None
        fd = self._proc.stdout.fileno()
        while not _complete(self._buf.decode(errors="replace")):
            wait = None if deadline is None else max(0.0, deadline - time.monotonic())
            ready, _, _ = select.select([fd], [], [], wait)
            if not ready:
                raise TimeoutError
            chunk = os.read(fd, 65536)
            if not chunk:
                raise SolverError("solver closed its output")
            self._buf += chunk
        text = self._buf.decode()
        # split off exactly the first s-expression
        depth, end, i = 0, None, 0
        for i, ch in enumerate(text):
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
                if depth == 0:
                    end = i + 1
                    break
            elif ch == "\n" and depth == 0 and text[:i].strip():
                end = i
                break
        head, self._buf = text[:end], text[end:].encode()
        if self._log:
            self._log.write("; <- " + " ".join(head.split()) + "\n")
            self._log.flush()
        parsed = parse_sexprs(head)
        if len(parsed) != 1:
            raise SolverError(f"unexpected solver output {head!r}")
        return parsed[0]

    def _command(self, text: str) -> None:
        self._send(text)
        try:
            resp = self._receive(time.monotonic() + max(self.timeout_ms, 1000) / 1000)
        except TimeoutError as e:
            raise SolverError(f"no response to {text!r}") from e
        if resp != "success":
            raise SolverError(f"solver answered {resp!r} to {text!r}")

    def close(self) -> None:
        if self._proc is not None:
            try:
                if self._proc.poll() is None:
                    self._proc.stdin.write(b"(exit)\n")
                    self._proc.stdin.close()
                    self._proc.wait(timeout=1)
            except Exception:
                self._proc.kill()
                self._proc.wait()
            self._proc = None
        if self._log:
            self._log.close()
            self._log = None

    def __enter__(self) -> "SolverSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    def _restart(self) -> None:
        proc = self._proc
        if proc is not None:
            proc.kill()
            proc.wait()
        self._proc = None
        self._spawn()
        for d in self._decls:
            self._command(d)
        for depth, frame in enumerate(self._frames):
            if depth:
                self._command("(push 1)")
            for cmd in frame:
                self._command(cmd)

    # -- public API -----------------------------------------------------------

    def declare(self, v: Var, sort: str = "Int") -> None:
        known = self.sorts.get(v)
        if known == sort:
            return
        if known is not None:
            raise SolverError(f"{v} used as both {known} and {sort}")
        sym = smt_symbol(v)
        cmd = f"(declare-fun {sym} () {sort})"
        self._command(cmd)
        self._decls.append(cmd)
        self.sorts[v] = sort
        self._by_symbol[sym.strip("|")] = v

    def _declare_free(self, f: Formula) -> None:
        bools = bool_vars(f)
        for v in sorted(f.free_vars):
            self.declare(v, "Bool" if v in bools else "Int")

    def assert_formula(self, f: Formula) -> None:
        if not is_quantifier_free(f):
            raise ValueError("only quantifier-free formulas can be asserted")
        self._declare_free(f)
        cmd = f"(assert {to_smt(f)})"
        self._command(cmd)
        self._frames[-1].append(cmd)

    def push(self) -> None:
        self._command("(push 1)")
        self._frames.append([])

    def pop(self) -> None:
        if len(self._frames) == 1:
            raise SolverError("pop without matching push")
        self._command("(pop 1)")
        self._frames.pop()

    @property
    def level(self) -> int:
        return len(self._frames) - 1

    def check_with_assumptions(
        self, assumptions: Iterable[tuple[Var, bool]] = (),
    ) -> tuple[Status, Model | None]:
        """``check-sat-assuming``; on SAT the model is fetched with ``get-model``."""
        lits = []
        for sel, polarity in assumptions:
            self.declare(sel, "Bool")
            s = smt_symbol(sel)
            lits.append(s if polarity else f"(not {s})")
        cmd = f"(check-sat-assuming ({' '.join(lits)}))" if lits else "(check-sat)"
        start = time.monotonic()
        self._send(cmd)
        try:
            resp = self._receive(start + self.timeout_ms / 1000)
        except TimeoutError:
            log.warning("solver query timed out after %d ms; restarting", self.timeout_ms)
            self._restart()
            self.stats.record(Status.UNKNOWN, time.monotonic() - start)
            return Status.UNKNOWN, None
        try:
            status = Status(resp)
        except ValueError:
            raise SolverError(f"unexpected check-sat answer {resp!r}") from None
        self.stats.record(status, time.monotonic() - start)
        if status is not Status.SAT:
            return status, None
        return status, self._model()

    def check(self) -> Status:
        return self.check_with_assumptions()[0]

    def _model(self) -> Model:
        self._send("(get-model)")
        try:
            resp = self._receive(time.monotonic() + max(self.timeout_ms, 1000) / 1000)
        except TimeoutError as e:
            raise SolverError("no response to (get-model)") from e
        if not isinstance(resp, list):
            raise SolverError(f"unexpected model {resp!r}")
        entries = resp[1:] if resp and resp[0] == "model" else resp
        out: dict[Var, Value] = {}
        for entry in entries:
            if not (isinstance(entry, list) and len(entry) == 5 and entry[0] == "define-fun"):
                continue
            if entry[2]:  # has arguments: not a constant
                continue
            v = self._by_symbol.get(entry[1].strip("|"))
            if v is not None:
                out[v] = _value(entry[4])
        return Model(out)

    def is_sat(self, f: Formula) -> Status:
        """Satisfiability of ``f`` in a scratch frame."""
        self.push()
        try:
            self.assert_formula(f)
            return self.check()
        finally:
            self.pop()

    def implies(self, a: Formula, b: Formula) -> bool:
        """Validity of ``a -> b``; UNKNOWN counts as not implied."""
        return self.is_sat(conj(a, neg(b))) is Status.UNSAT


def start_session(solver_command: Sequence[str] | str | None = None, timeout_ms: int = 10_000,
                  log_dir: str | os.PathLike | None = None) -> SolverSession:
    return SolverSession(solver_command, timeout_ms, log_dir)


__all__ = [
    "SolverSession", "SolverError", "Status", "Model", "SolverStats", "start_session",
    "evaluate", "evaluate_partial", "MissingValue", "parse_sexprs",
]
