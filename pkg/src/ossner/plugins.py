"""Line-protocol subprocess plugins.

External taggers, POS taggers, and classifier scorers all speak the same
newline-delimited JSON protocol on stdin/stdout: one request object (or
array) per line in, one response per line out, in order.
"""

from __future__ import annotations

import json
import subprocess
from typing import Optional, Sequence

from .core import PipelineError


class ProtocolError(PipelineError):
    pass


class LineProtocolProcess:
    """Long-running child process exchanging one JSON line per request."""

    def __init__(self, command: Sequence[str]):
        self.command = list(command)
        self._proc: Optional[subprocess.Popen] = None

    def _ensure_started(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def request(self, payload) -> object:
        proc = self._ensure_started()
        try:
            proc.stdin.write(json.dumps(payload) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"plugin {self.command[0]} died: {exc}") from exc
        if not line:
            raise ProtocolError(f"plugin {self.command[0]} closed its stdout")
        try:
            return json.loads(line)
        except ValueError as exc:
            raise ProtocolError(f"plugin sent malformed JSON: {line!r}") from exc

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)
        self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
