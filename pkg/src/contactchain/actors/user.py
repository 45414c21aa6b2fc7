"""User device: current credential and the aggregated record store."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..crypto import AggregateSignature, Certificate, PrivateKey, PublicKey, Signature
from ..wire import BASELINE_RECORD_BYTES, RECORD_BYTES, SIG_BYTES, ContactRecord
from .config import ProtocolConfig


class Health(enum.Enum):
    HEALTHY = "healthy"
    INFECTED = "infected"
    SUSPECTED = "suspected"
    RECOVERED = "recovered"


@dataclass
class RecordGroup:
    """Records sharing one aggregate signature (or, in baseline mode, none)."""

    epoch: int
    records: list[ContactRecord] = field(default_factory=list)
    aggregate: AggregateSignature | None = None
    sealed: bool = False

    def add(self, record: ContactRecord, sig: Signature, aggregated: bool) -> None:
        if self.sealed:
            raise RuntimeError("group is sealed")
        if aggregated:
            self.records.append(ContactRecord(record.message, record.cert))
            self.aggregate = (AggregateSignature(sig.point, 1) if self.aggregate is None
                              else self.aggregate.extend(sig))
        else:
            self.records.append(ContactRecord(record.message, record.cert, sig))

    def __len__(self) -> int:
        return len(self.records)

    @property
    def oldest(self) -> int:
        return min(r.message.time for r in self.records)

    def storage_bytes(self) -> int:
        if not self.records:
            return 0
        if self.aggregate is not None:
            return RECORD_BYTES * len(self.records) + SIG_BYTES
        return BASELINE_RECORD_BYTES * len(self.records)


class UserActor:
    def __init__(self, index: int, label: str, cfg: ProtocolConfig):
        self.index = index
        self.addr = f"u{index}"
        self.label = label  # real identity; stays inside the simulation
        self.cfg = cfg
        self.sk: PrivateKey | None = None
        self.cert: Certificate | None = None
        self.groups: list[RecordGroup] = []
        self.health = Health.HEALTHY
        self.keys_held: list[PublicKey] = []
        self.renewals_refused = 0

    @property
    def pk(self) -> PublicKey:
        return self.cert.subject

    def install(self, sk: PrivateKey, cert: Certificate) -> None:
        self.sk, self.cert = sk, cert
        self.keys_held.append(cert.subject)
        self.seal()

    def _open_group(self, now: int) -> RecordGroup:
        g = self.groups[-1] if self.groups else None
        if g is None or g.sealed:
            g = RecordGroup(self.cfg.epoch_of(now))
            self.groups.append(g)
        return g

    def store(self, record: ContactRecord, sig: Signature, now: int) -> None:
        g = self._open_group(now)
        g.add(record, sig, self.cfg.aggregation)
        if self.cfg.group_size is not None and len(g) >= self.cfg.group_size:
            g.sealed = True

    def seal(self) -> None:
        if self.groups and self.groups[-1].records:
            self.groups[-1].sealed = True
        elif self.groups and not self.groups[-1].records:
            self.groups.pop()

    def purge(self, now: int) -> int:
        """Drop every group holding a record older than the retention window."""
        cutoff = now - self.cfg.window_ms
        keep = [g for g in self.groups if not g.records or g.oldest >= cutoff]
        dropped = len(self.groups) - len(keep)
        self.groups = keep
        return dropped

    def record_count(self) -> int:
        return sum(len(g) for g in self.groups)

    def storage_bytes(self) -> int:
        return sum(g.storage_bytes() for g in self.groups)
