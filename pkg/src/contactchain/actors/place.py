"""Public place: long-term credential, zone, and a log of visitors' signed proofs."""

from __future__ import annotations

from dataclasses import dataclass

from ..crypto import Certificate, PrivateKey, PublicKey, Signature, aggregate
from ..wire import BaselineUpload, Frame, GroupUpload, Location, ProofMessage, Step, WireError, decode_frame
from .config import ProtocolConfig


@dataclass(frozen=True)
class Visit:
    message: ProofMessage  # signed by the visitor, names this place's key
    cert: Certificate  # visitor's certificate
    signature: Signature


class PlaceActor:
    def __init__(self, index: int, name: str, zone: int, location: Location, cfg: ProtocolConfig):
        self.index = index
        self.addr = f"p{index}"
        self.name = name
        self.zone = zone
        self.location = location
        self.cfg = cfg
        self.sk: PrivateKey | None = None
        self.cert: Certificate | None = None
        self.log: list[Visit] = []
        self.admitted = 0
        self.denied: dict[str, int] = {}

    @property
    def pk(self) -> PublicKey:
        return self.cert.subject

    def log_visit(self, visit: Visit) -> None:
        self.log.append(visit)

    def purge(self, now: int) -> None:
        cutoff = now - self.cfg.window_ms
        self.log = [v for v in self.log if v.message.time >= cutoff]

    def groups_for_window(self, start: int, end: int) -> list:
        """Visits in [start, end], one message per credential epoch.

        Keeping epochs apart means no message ever carries two keys of one visitor.
        """
        by_epoch: dict[int, list[Visit]] = {}
        for v in self.log:
            if start <= v.message.time <= end:
                by_epoch.setdefault(self.cfg.epoch_of(v.message.time), []).append(v)
        out = []
        for _, visits in sorted(by_epoch.items()):
            if self.cfg.aggregation:
                out.append(GroupUpload(tuple((v.message, v.cert) for v in visits),
                                       aggregate(v.signature for v in visits)))
            else:
                out.append(BaselineUpload(tuple((v.message, v.signature, v.cert) for v in visits)))
        return out

    # -- network
    def attach(self, sim) -> None:
        self.sim = sim
        sim.register(self.addr, self.handle)

    def handle(self, src: str, data: bytes) -> None:
        try:
            frame = decode_frame(data)
        except WireError:
            return
        if frame.step != Step.PLACE_LOG_REQUEST:
            return
        self.purge(self.sim.now)
        req = frame.message
        for group in self.groups_for_window(req.start, req.end):
            step = Step.PLACE_LOG if isinstance(group, GroupUpload) else Step.PLACE_LOG_BASELINE
            self.sim.send(self.addr, src, Frame(step, group).encode())
