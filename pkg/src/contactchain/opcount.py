"""Thread-safe tally of cryptographic operations, keyed by protocol phase."""

from __future__ import annotations

import threading
from collections import Counter
from contextlib import contextmanager

OPS = ("pairing", "hash", "mul", "add", "exp")


class OpCounter:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._counts: Counter[tuple[str, str]] = Counter()
        self._local = threading.local()

    @property
    def phase(self) -> str:
        return getattr(self._local, "phase", "other")

    @contextmanager
    def in_phase(self, name: str):
        prev = self.phase
        self._local.phase = name
        try:
            yield self
        finally:
            self._local.phase = prev

    def bump(self, op: str, n: int = 1) -> None:
        key = (self.phase, op)
        with self._lock:
            self._counts[key] += n

    def get(self, op: str, phase: str | None = None) -> int:
        with self._lock:
            if phase is not None:
                return self._counts[(phase, op)]
            return sum(v for (_, o), v in self._counts.items() if o == op)

    def snapshot(self) -> dict[tuple[str, str], int]:
        with self._lock:
            return dict(self._counts)

    def reset(self) -> None:
        with self._lock:
            self._counts.clear()


COUNTER = OpCounter()
