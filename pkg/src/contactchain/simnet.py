"""Deterministic discrete-event scheduler and message transport.

Time is integer milliseconds.  Events fire in (time, insertion sequence)
order.  Every random draw (latency, loss) comes from a generator seeded by
the simulator seed, so equal seeds give byte-identical traces.
"""

from __future__ import annotations

import hashlib
import heapq
import random
import struct
from dataclasses import dataclass, field
from typing import Callable

SECOND = 1000
MINUTE = 60 * SECOND
HOUR = 60 * MINUTE
DAY = 24 * HOUR


class SchedulingError(ValueError):
    pass


@dataclass(frozen=True)
class LinkModel:
    latency_ms: tuple[int, int] = (5, 20)
    loss: float = 0.0

    def __post_init__(self):
        lo, hi = self.latency_ms
        if not 0 <= lo <= hi:
            raise ValueError("latency range must satisfy 0 <= lo <= hi")
        if not 0.0 <= self.loss <= 1.0:
            raise ValueError("loss probability must be within [0, 1]")


@dataclass(frozen=True)
class Partition:
    groups: tuple[frozenset, ...]
    start: int
    end: int

    def separates(self, a, b, now: int) -> bool:
        if not self.start <= now < self.end:
            return False
        ga = next((i for i, g in enumerate(self.groups) if a in g), None)
        gb = next((i for i, g in enumerate(self.groups) if b in g), None)
        return ga is not None and gb is not None and ga != gb


@dataclass(frozen=True)
class TraceRecord:
    sent: int
    delivered: int | None  # None when dropped
    src: str
    dst: str
    frame: bytes
    fate: str  # delivered | lost | partitioned

    def encode(self) -> bytes:
        src, dst = self.src.encode(), self.dst.encode()
        head = struct.pack(">qqBHH", self.sent, -1 if self.delivered is None else self.delivered,
                           ("delivered", "lost", "partitioned").index(self.fate), len(src), len(dst))
        body = head + src + dst + self.frame
        return struct.pack(">I", len(body)) + body

    @classmethod
    def decode(cls, body: bytes) -> "TraceRecord":
        sent, deliv, fate, ls, ld = struct.unpack_from(">qqBHH", body)
        off = struct.calcsize(">qqBHH")
        src = body[off:off + ls].decode()
        dst = body[off + ls:off + ls + ld].decode()
        return cls(sent, None if deliv < 0 else deliv, src, dst, bytes(body[off + ls + ld:]),
                   ("delivered", "lost", "partitioned")[fate])

    def summary(self) -> str:
        tag = f"0x{self.frame[0]:02x}" if self.frame else "----"
        return f"{self.sent}\t{self.delivered if self.delivered is not None else '-'}\t{self.src}\t{self.dst}\t{tag}\t{len(self.frame) - 1}\t{self.fate}"


@dataclass
class Trace:
    records: list[TraceRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def to_bytes(self) -> bytes:
        return b"".join(r.encode() for r in self.records)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Trace":
        out, off = [], 0
        while off < len(data):
            if off + 4 > len(data):
                raise ValueError(f"truncated trace at byte {off}")
            (n,) = struct.unpack_from(">I", data, off)
            if off + 4 + n > len(data):
                raise ValueError(f"truncated trace record at byte {off}")
            out.append(TraceRecord.decode(data[off + 4:off + 4 + n]))
            off += 4 + n
        return cls(out)

    def summary(self) -> str:
        lines = ["sent\tdelivered\tsrc\tdst\tstep\tbytes\tfate"]
        lines += [r.summary() for r in self.records]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha224(self.to_bytes()).hexdigest()


class Simulator:
    """Event loop plus transport.

    Handlers are registered per address and called as ``handler(src, frame_bytes)``.
    """

    def __init__(self, seed: int = 0, link: LinkModel | None = None):
        self.seed = seed
        self.now = 0
        self._queue: list = []
        self._seq = 0
        self.rng = random.Random(f"net:{seed}")
        self.default_link = link or LinkModel()
        self._links: dict[tuple[str, str], LinkModel] = {}
        self._handlers: dict[str, Callable[[str, bytes], None]] = {}
        self.partitions: list[Partition] = []
        self.trace = Trace()

    def substream(self, name: str) -> random.Random:
        """Independent seeded generator for a named purpose."""
        return random.Random(f"{name}:{self.seed}")

    # -- scheduling
    def schedule(self, at: int, fn: Callable, *args) -> None:
        if at < self.now:
            raise SchedulingError(f"cannot schedule at {at}, simulation time is already {self.now}")
        heapq.heappush(self._queue, (int(at), self._seq, fn, args))
        self._seq += 1

    def schedule_in(self, delay: int, fn: Callable, *args) -> None:
        self.schedule(self.now + delay, fn, *args)

    def pending(self) -> int:
        return len(self._queue)

    def run_until(self, t_end: int) -> Trace:
        if t_end < self.now:
            raise SchedulingError("run_until target is in the past")
        q = self._queue
        while q and q[0][0] <= t_end:
            at, _, fn, args = heapq.heappop(q)
            self.now = at
            fn(*args)
        self.now = t_end
        return self.trace

    # -- transport
    def register(self, addr: str, handler: Callable[[str, bytes], None]) -> None:
        self._handlers[addr] = handler

    def set_link(self, src: str, dst: str, link: LinkModel) -> None:
        self._links[(src, dst)] = link

    def partition(self, groups, start: int, end: int) -> None:
        gs = tuple(frozenset(g) for g in groups)
        seen: set = set()
        for g in gs:
            if seen & g:
                raise ValueError("partition groups overlap")
            seen |= g
        if end < start:
            raise ValueError("partition ends before it starts")
        self.partitions.append(Partition(gs, start, end))

    def _fate(self, src: str, dst: str) -> tuple[str, int]:
        link = self._links.get((src, dst), self.default_link)
        # draw both numbers unconditionally so the stream does not depend on outcomes
        lost = self.rng.random() < link.loss
        latency = self.rng.randint(*link.latency_ms)
        if any(p.separates(src, dst, self.now) for p in self.partitions):
            return "partitioned", latency
        return ("lost" if lost else "delivered"), latency

    def send(self, src: str, dst: str, frame: bytes) -> bool:
        """Queue a frame for asynchronous delivery; returns False if it was dropped."""
        fate, latency = self._fate(src, dst)
        at = self.now + latency if fate == "delivered" else None
        self.trace.records.append(TraceRecord(self.now, at, src, dst, frame, fate))
        if at is not None:
            self.schedule(at, self._deliver, src, dst, frame)
        return at is not None

    def exchange(self, src: str, dst: str, frame: bytes) -> bool:
        """Record one hop of an atomic short-range session; no handler is invoked.

        The caller drives both ends of the session itself and only needs to
        know whether the hop survived the link.
        """
        fate, _ = self._fate(src, dst)
        self.trace.records.append(TraceRecord(self.now, self.now if fate == "delivered" else None,
                                              src, dst, frame, fate))
        return fate == "delivered"

    def _deliver(self, src: str, dst: str, frame: bytes) -> None:
        h = self._handlers.get(dst)
        if h is not None:
            h(src, frame)
