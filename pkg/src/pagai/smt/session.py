"""An SMT-LIB 2 solver driven over stdin/stdout pipes."""

from __future__ import annotations

import os
import select
import shlex
import subprocess
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from .sexpr import first_end, parse_model

DEFAULT_SOLVER = "z3 -in"


class SolverError(Exception):
    pass


class SolverMissing(SolverError):
    def __init__(self, command):
        super().__init__(f"cannot start solver: {' '.join(command)}")
        self.command = command


class SolverCrashed(SolverError):
    pass


class SolverInconclusive(SolverError):
    pass


class ProtocolError(SolverError):
    def __init__(self, message, raw=""):
        super().__init__(f"{message}: {raw[:200]!r}" if raw else message)
        self.raw = raw


class _Timeout(Exception):
    pass


def solver_command(cmd: Optional[str] = None) -> list[str]:
    """Explicit command, else $PAGAI_SOLVER, else ``z3 -in``."""
    text = cmd or os.environ.get("PAGAI_SOLVER") or DEFAULT_SOLVER
    return shlex.split(text)


@dataclass
class SolverStats:
    queries: int = 0
    solver_time: float = 0.0
    restarts: int = 0


class SolverSession:
    """One solver process with a stack of assertion frames.

    Every command is recorded per frame so the session can be restarted and replayed
    after a timeout (which kills the process).
    """

    def __init__(self, command: Optional[str] = None, timeout_ms: Optional[int] = None,
                 logic: str = "QF_LIRA", dump=None):
        self.command = solver_command(command)
        self.timeout = None if not timeout_ms else timeout_ms / 1000.0
        self.requested_logic = logic
        self.logic = logic
        self.dump = dump
        self.stats = SolverStats()
        self.frames: list[list[str]] = [[]]
        self.proc: Optional[subprocess.Popen] = None
        self._buf = ""
        self.key = None  # identifies what is asserted at frame 0 (used by callers)
        self._start()

    # process management
    def _start(self):
        try:
            self.proc = subprocess.Popen(self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                         stderr=subprocess.DEVNULL, text=True, bufsize=1)
        except (FileNotFoundError, PermissionError) as e:
            raise SolverMissing(self.command) from e
        self._buf = ""
        self._raw("(set-option :print-success true)")
        self._command("(set-option :produce-models true)")
        resp = self._command(f"(set-logic {self.logic})", check=False)
        if resp != "success":
            self.logic = "ALL"
            self._command("(reset)")
            self._command("(set-option :produce-models true)")
            self._command("(set-logic ALL)")

    def close(self):
        if self.proc is not None:
            try:
                if self.proc.poll() is None:
                    self.proc.stdin.write("(exit)\n")
                    self.proc.stdin.flush()
                    self.proc.wait(timeout=1)
            except Exception:
                pass
            if self.proc.poll() is None:
                self.proc.kill()
                self.proc.wait()
            self.proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    def _restart(self):
        self.stats.restarts += 1
        if self.proc is not None and self.proc.poll() is None:
            self.proc.kill()
            self.proc.wait()
        self.proc = None
        self._start()
        for i, frame in enumerate(self.frames):
            if i > 0:
                self._command("(push 1)")
            for cmd in frame:
                self._command(cmd)

    # low-level IO
    def _write(self, text: str):
        if self.dump is not None:
            self.dump.write(text + "\n")
        if self.proc is None or self.proc.poll() is not None:
            raise SolverCrashed("solver process is not running")
        try:
            self.proc.stdin.write(text + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise SolverCrashed(f"solver process died: {e}") from e

    def _read(self, timeout: Optional[float] = None) -> str:
        deadline = None if timeout is None else time.monotonic() + timeout
        fd = self.proc.stdout.fileno()
        while True:
            end = first_end(self._buf)
            if end >= 0:
                out, self._buf = self._buf[:end], self._buf[end:]
                return out.strip()
            wait = None if deadline is None else max(0.0, deadline - time.monotonic())
            ready, _, _ = select.select([fd], [], [], wait)
            if not ready:
                raise _Timeout()
            chunk = os.read(fd, 65536)
            if not chunk:
                raise SolverCrashed("solver process closed its output")
            self._buf += chunk.decode()

    def _raw(self, cmd: str) -> str:
        self._write(cmd)
        return self._read()

    def _command(self, cmd: str, check=True) -> str:
        resp = self._raw(cmd)
        if check and resp != "success":
            raise ProtocolError(f"solver rejected {cmd[:80]}", resp)
        return resp

    # public API
    @property
    def depth(self) -> int:
        return len(self.frames) - 1

    def send(self, cmd: str):
        """Send a command that must answer ``success``; it is recorded in the current frame."""
        self._command(cmd)
        self.frames[-1].append(cmd)

    def declare(self, name: str, sort: str):
        self.send(f"(declare-fun {name} () {sort})")

    def assert_(self, formula: str):
        self.send(f"(assert {formula})")

    def push(self):
        self._command("(push 1)")
        self.frames.append([])

    def pop(self):
        if len(self.frames) == 1:
            raise SolverError("pop without matching push")
        self._command("(pop 1)")
        self.frames.pop()

    def reset(self):
        self._command("(reset)")
        self.frames = [[]]
        self.key = None
        self._command("(set-option :produce-models true)")
        self._command(f"(set-logic {self.logic})")

    def check(self) -> str:
        """``sat``, ``unsat`` or ``unknown`` (a timeout counts as unknown)."""
        self.stats.queries += 1
        t0 = time.perf_counter()
        self._write("(check-sat)")
        try:
            resp = self._read(self.timeout)
        except _Timeout:
            self.stats.solver_time += time.perf_counter() - t0
            self._restart()
            return "unknown"
        self.stats.solver_time += time.perf_counter() - t0
        if resp not in ("sat", "unsat", "unknown"):
            raise ProtocolError("unexpected check-sat answer", resp)
        return resp

    def model(self) -> dict[str, object]:
        raw = self._raw("(get-model)")
        try:
            return parse_model(raw)
        except ValueError as e:
            raise ProtocolError(f"unparseable model ({e})", raw) from e

    def solve(self, assertions: Sequence[str] = (), want_model=True) -> tuple[str, Optional[dict]]:
        """push; assert; check-sat; get-model when sat; pop."""
        self.push()
        try:
            for a in assertions:
                self.assert_(a)
            status = self.check()
            model = self.model() if status == "sat" and want_model else None
        finally:
            if self.proc is not None and self.proc.poll() is None:
                self.pop()
        return status, model


def solve(session: SolverSession, assertions: Sequence[str], declarations: Sequence[str] = ()):
    """Run one self-contained query (declarations live in the pushed frame)."""
    session.push()
    try:
        for d in declarations:
            session.send(d)
        return session.solve(assertions)
    finally:
        session.pop()
