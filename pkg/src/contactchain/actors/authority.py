"""Health authority: a validator that collects evidence and maintains both ledgers."""

from __future__ import annotations

from dataclasses import dataclass

from ..crypto import keygen, verify
from ..opcount import COUNTER
from ..ledger import (BlockError, Chain, build_status_block, build_zone_block, query_status, query_zone,
                      status_body)
from ..raft import RaftNode, Role, Vote
from ..simnet import MINUTE, Simulator
from ..wire import (BaselineUpload, Frame, KeyList, SignatureMessage, Step, WindowRequest, WireError,
                    decode_frame)
from .config import KDC_ADDR, ProtocolConfig, validator_addr
from .evidence import (Directory, Evidence, Kind, TraceState, UpdateEntry, derive, request_keys,
                       verify_evidence, zone_records)
from .kdc import resolution_message

SETTLE_MS = MINUTE  # evidence younger than this waits for the next update
TICK_OFFSET_MS = MINUTE  # keeps updates clear of renewals on epoch boundaries

_KIND_OF = {Step.UPLOAD: Kind.UPLOAD, Step.UPLOAD_BASELINE: Kind.UPLOAD,
            Step.PLACE_LOG: Kind.PLACE_LOG, Step.PLACE_LOG_BASELINE: Kind.PLACE_LOG,
            Step.FORWARD_UPLOAD: Kind.UPLOAD, Step.FORWARD_UPLOAD_BASELINE: Kind.UPLOAD,
            Step.FORWARD_PLACE_LOG: Kind.PLACE_LOG, Step.FORWARD_PLACE_LOG_BASELINE: Kind.PLACE_LOG,
            Step.FORWARD_TEST_RESULT: Kind.TEST}
_FORWARD = {(Kind.UPLOAD, True): Step.FORWARD_UPLOAD, (Kind.UPLOAD, False): Step.FORWARD_UPLOAD_BASELINE,
            (Kind.PLACE_LOG, True): Step.FORWARD_PLACE_LOG, (Kind.PLACE_LOG, False): Step.FORWARD_PLACE_LOG_BASELINE,
            (Kind.TEST, True): Step.FORWARD_TEST_RESULT}


@dataclass
class _Pooled:
    evidence: Evidence
    received: int


class HealthAuthorityActor:
    def __init__(self, index: int, n_validators: int, sim: Simulator, cfg: ProtocolConfig):
        self.index = index
        self.addr = validator_addr(index)
        self.sim = sim
        self.cfg = cfg
        self.sk, self.pk = keygen(seed=sim.substream(f"ha-key-{index}").randbytes(32))
        self.rng = sim.substream(f"ha-{index}")
        self.directory: Directory | None = None
        self.kdc = None  # reached only through exchanges on the simulated link
        self.place_addr: dict[bytes, str] = {}
        self.raft = RaftNode(index, list(range(n_validators)), sim, address=validator_addr,
                             timing=cfg.raft_timing, validate=self.validate_entry, apply=self.apply_entry,
                             dropped=self._on_dropped)
        self.status_chain = Chain("status", bloom=cfg.bloom)
        self.zone_chain = Chain("zone")
        self.state = TraceState()
        self.pool: dict[bytes, _Pooled] = {}
        self.consumed: set[bytes] = set()
        self._verified: dict[bytes, bool] = {}
        self.false_reports = 0  # uploads whose signatures failed on receipt
        self.rejected_evidence = 0  # committed as refused by derive
        self.dropped_proposals = 0
        self.kdc_failures = 0
        self.last_update = None
        self.tamper = None  # test hook: (infected, suspected, zones) -> altered triple

    # -- wiring
    def start(self) -> None:
        self.sim.register(self.addr, self.handle)
        first = self.cfg.update_interval_ms + TICK_OFFSET_MS
        self.sim.schedule(max(self.sim.now, first), self._tick)

    # -- queries served to users and places
    def lookup(self, key):
        return query_status(self.status_chain, key)

    def zone(self, zone_id: int):
        return query_zone(self.zone_chain, zone_id, self.cfg.unknown_zone)

    # -- inbound frames
    def handle(self, src: str, data: bytes) -> None:
        step = Step(data[0])
        if step >> 4 == 0x6:
            self.raft.handle_frame(src, data)
            return
        try:
            frame = decode_frame(data)
        except WireError:
            return
        kind = _KIND_OF.get(step)
        if kind is None:
            return
        ev = Evidence(kind, frame.message)
        if step in (Step.UPLOAD, Step.UPLOAD_BASELINE, Step.PLACE_LOG, Step.PLACE_LOG_BASELINE):
            self.receive(ev)
        else:
            self._store(ev)

    def receive(self, ev: Evidence) -> bool:
        """Evidence arriving first-hand: verify, keep, share with the other validators."""
        with COUNTER.in_phase("tracing"):
            ok = self._check(ev)
        if not ok:
            self.false_reports += 1
            return False
        if not self._store(ev):
            return True
        step = _FORWARD[(ev.kind, not isinstance(ev.message, BaselineUpload))]
        frame = Frame(step, ev.message).encode()
        for p in self.raft.peers:
            self.sim.send(self.addr, validator_addr(p), frame)
        if ev.kind == Kind.UPLOAD:
            self._request_place_logs(ev)
        return True

    def _store(self, ev: Evidence) -> bool:
        dg = ev.digest
        if dg in self.pool or dg in self.consumed:
            return False
        self.pool[dg] = _Pooled(ev, self.sim.now)
        return True

    def _check(self, ev: Evidence) -> bool:
        dg = ev.digest
        if dg not in self._verified:
            self._verified[dg] = verify_evidence(ev, self.directory)
        return self._verified[dg]

    def _request_place_logs(self, ev: Evidence) -> None:
        for m, c in ev.records():
            addr = self.place_addr.get(c.subject.to_bytes())
            if addr is None:
                continue
            start = max(0, m.time - self.cfg.stay_ms)
            end = m.time + self.cfg.stay_ms + self.cfg.contamination_ms
            self.sim.send(self.addr, addr, Frame(Step.PLACE_LOG_REQUEST, WindowRequest(start, end)).encode())

    # -- the leader's periodic status update
    def _tick(self) -> None:
        self.sim.schedule_in(self.cfg.update_interval_ms, self._tick)
        r = self.raft
        if not r.alive or r.role != Role.LEADER:
            return
        if r.pending or r.inflight is not None or r.commit_index != r.last_index:
            return
        if self._update_due():
            with COUNTER.in_phase("status"):
                self.run_status_update()

    def _eligible(self) -> list[Evidence]:
        cutoff = self.sim.now - SETTLE_MS
        return [p.evidence for _, p in sorted(self.pool.items()) if p.received <= cutoff]

    def _update_due(self) -> bool:
        if self._eligible():
            return True
        if self.state.empty():
            return False
        if self.last_update is None or self.cfg.epoch_of(self.last_update) < self.cfg.epoch_of(self.sim.now):
            return True
        head = self.zone_chain.head
        return head is None or head.records != zone_records(self.state, self.sim.now, self.cfg, self.directory)

    def _resolve(self, request: list[bytes]):
        """KDC round trip: bare keys out, newest keys and an attestation back."""
        if not request:
            return (), None
        req = KeyList(tuple(request))
        if not self.sim.exchange(self.addr, KDC_ADDR, Frame(Step.STATUS_1, req).encode()):
            return None
        reply = KeyList(tuple(self.kdc.resolve(request)))
        if not self.sim.exchange(KDC_ADDR, self.addr, Frame(Step.STATUS_2, reply).encode()):
            return None
        att = self.kdc.attest(req.payload(), reply.payload())
        if not self.sim.exchange(KDC_ADDR, self.addr, Frame(Step.STATUS_2_ATTEST, SignatureMessage(att)).encode()):
            return None
        return reply.keys, att

    def run_status_update(self) -> UpdateEntry | None:
        """Resolve keys, derive the next state, build both blocks, and propose them."""
        now = self.sim.now
        batch = []
        for ev in self._eligible():
            if self._check(ev):
                batch.append(ev)
            else:
                del self.pool[ev.digest]
        seed = self.rng.getrandbits(64)
        request = request_keys(self.state, batch, seed, self.directory)
        resolved = self._resolve(request)
        if resolved is None:
            self.kdc_failures += 1
            return None
        reply, att = resolved
        new_state, rep = derive(self.state, batch, dict(zip(request, reply)), now, self.cfg, self.directory)
        inf, sus = set(new_state.infected), set(new_state.suspected)
        zones = zone_records(new_state, now, self.cfg, self.directory)
        if self.tamper is not None:
            inf, sus, zones = self.tamper(inf, sus, zones)
        sblk = build_status_block(self.status_chain.head, inf, sus, self.sk, now, self.index, self.cfg.bloom)
        zblk = build_zone_block(self.zone_chain.head, zones, self.sk, now, self.index)
        entry = UpdateEntry(now, seed, tuple(sorted(ev.digest for ev in batch)), tuple(reply), att,
                            new_state.encode(), len(rep.rejected), sblk.to_bytes(), zblk.to_bytes())
        self.raft.propose(entry.encode())
        return entry

    def _on_dropped(self, data: bytes) -> None:
        self.dropped_proposals += 1

    # -- follower checks
    def validate_entry(self, data: bytes) -> Vote:
        with COUNTER.in_phase("status"):
            return self._validate(data)

    def _validate(self, data: bytes) -> Vote:
        try:
            e = UpdateEntry.decode(data)
            sblk, zblk = e.blocks(self.cfg.bloom)
        except (WireError, BlockError, ValueError):
            return Vote.REJECT
        if sblk.header.prev_hash != self.status_chain.head_hash() or zblk.header.prev_hash != self.zone_chain.head_hash():
            return Vote.REJECT
        if e.time > self.sim.now or (self.last_update is not None and e.time < self.last_update):
            return Vote.REJECT
        if any(dg in self.consumed for dg in e.consumed) or len(set(e.consumed)) != len(e.consumed):
            return Vote.REJECT
        if any(dg not in self.pool for dg in e.consumed):
            return Vote.BEHIND
        batch = [self.pool[dg].evidence for dg in e.consumed]
        if not all(self._check(ev) for ev in batch):
            return Vote.REJECT

        request = request_keys(self.state, batch, e.seed, self.directory)
        if len(request) != len(e.reply):
            return Vote.REJECT
        if request:
            msg = resolution_message(KeyList(tuple(request)).payload(), KeyList(e.reply).payload())
            if e.attestation is None or not verify(self.directory.kdc_pk, msg, e.attestation):
                return Vote.REJECT
        elif e.attestation is not None:
            return Vote.REJECT

        new_state, rep = derive(self.state, batch, dict(zip(request, e.reply)), e.time, self.cfg, self.directory)
        if new_state.encode() != e.state or len(rep.rejected) != e.rejected:
            return Vote.REJECT
        pks = self.directory.validator_pks
        for blk in (sblk, zblk):
            h = blk.header
            if h.timestamp != e.time or h.leader_id >= len(pks) or not blk.verify_signature(pks[h.leader_id]):
                return Vote.REJECT
        if sblk.header.leader_id != zblk.header.leader_id:
            return Vote.REJECT
        shape, body = status_body(new_state.infected, new_state.suspected, self.cfg.bloom)
        if body != sblk.payload or shape != sblk.header.shape:
            return Vote.REJECT
        if zblk.records != zone_records(new_state, e.time, self.cfg, self.directory):
            return Vote.REJECT
        return Vote.APPROVE

    def apply_entry(self, index: int, data: bytes) -> None:
        e = UpdateEntry.decode(data)
        sblk, zblk = e.blocks(self.cfg.bloom)
        self.state = TraceState.decode(e.state)
        self.status_chain.append(sblk, (frozenset(self.state.infected), frozenset(self.state.suspected)))
        self.zone_chain.append(zblk)
        for dg in e.consumed:
            self.consumed.add(dg)
            self.pool.pop(dg, None)
        self.rejected_evidence += e.rejected
        self.last_update = e.time
