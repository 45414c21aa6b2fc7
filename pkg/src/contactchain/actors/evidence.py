"""Tracing evidence, the validators' shared tracing state, and the update entry.

Every validator holds the same ``TraceState``.  A status update turns the
current state plus a batch of evidence into the next state with ``derive``,
a pure function, so any follower can recompute what the leader proposes and
compare it byte for byte.
"""

from __future__ import annotations

import enum
import hashlib
import random
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from ..crypto import CertStatus, PublicKey, Signature, aggregate_verify, validate_certificate, verify
from ..ledger import StatusBlock, ZoneBlock, categorize_zone
from ..wire import (KEY_BYTES, NOT_FOUND_KEY, SIG_BYTES, GroupUpload, TestResult, WireError, ZoneRecord,
                    decode_time, encode_time)
from .config import ProtocolConfig, ZoneMap


class Kind(enum.IntEnum):
    TEST = 1
    UPLOAD = 2
    PLACE_LOG = 3


@dataclass(frozen=True)
class Evidence:
    kind: Kind
    message: object  # TestResult | GroupUpload | BaselineUpload

    def payload(self) -> bytes:
        return self.message.payload()

    @property
    def digest(self) -> bytes:
        return evidence_digest(self.kind, self.payload())

    def records(self):
        """(ProofMessage, Certificate) pairs of an upload or place log."""
        if isinstance(self.message, GroupUpload):
            return list(self.message.records)
        return [(m, c) for m, _, c in self.message.records]


def evidence_digest(kind: Kind, payload: bytes) -> bytes:
    return hashlib.sha224(bytes([kind]) + payload).digest()


@dataclass(frozen=True)
class Directory:
    """Public system knowledge every validator shares."""

    kdc_pk: PublicKey
    validator_pks: tuple[PublicKey, ...]
    place_keys: frozenset  # 29-byte keys of registered public places
    zone_map: ZoneMap


def verify_evidence(ev: Evidence, d: Directory) -> bool:
    """Cryptographic checks only; semantic checks happen in ``derive``."""
    if ev.kind == Kind.TEST:
        t: TestResult = ev.message
        if not 0 <= t.authority < len(d.validator_pks):
            return False
        return verify(d.validator_pks[t.authority], t.signed_bytes(), t.signature)
    msg = ev.message
    for m, c in ev.records():
        if validate_certificate(d.kdc_pk, c, m.time) != CertStatus.VALID:
            return False
    if isinstance(msg, GroupUpload):
        return aggregate_verify([c.subject for _, c in msg.records], [m.to_bytes() for m, _ in msg.records],
                                msg.aggregate)
    return all(verify(c.subject, m.to_bytes(), s) for m, s, c in msg.records)


# ---- state ------------------------------------------------------------------------

@dataclass
class TraceState:
    infected: dict[bytes, int] = field(default_factory=dict)  # key -> positive test time
    suspected: dict[bytes, int] = field(default_factory=dict)  # key -> earliest exposure
    cleared: dict[bytes, int] = field(default_factory=dict)  # key -> negative test time
    presence: dict[bytes, tuple] = field(default_factory=dict)  # key -> ((time, zone), ...)
    visits: tuple = ()  # ((place key, time), ...) visits made while infectious

    def copy(self) -> "TraceState":
        return TraceState(dict(self.infected), dict(self.suspected), dict(self.cleared), dict(self.presence),
                          self.visits)

    def empty(self) -> bool:
        return not (self.infected or self.suspected or self.cleared or self.visits)

    def keys(self) -> set[bytes]:
        return set(self.infected) | set(self.suspected) | set(self.cleared)

    def encode(self) -> bytes:
        out = []
        for d in (self.infected, self.suspected, self.cleared):
            out.append(struct.pack(">I", len(d)))
            out += [k + encode_time(d[k]) for k in sorted(d)]
        out.append(struct.pack(">I", len(self.presence)))
        for k in sorted(self.presence):
            evs = self.presence[k]
            out.append(k + struct.pack(">H", len(evs)))
            out += [encode_time(t) + struct.pack(">H", z) for t, z in evs]
        out.append(struct.pack(">I", len(self.visits)))
        out += [k + encode_time(t) for k, t in self.visits]
        return b"".join(out)

    @classmethod
    def decode(cls, data: bytes) -> "TraceState":
        off = 0

        def take(n):
            nonlocal off
            if off + n > len(data):
                raise WireError("truncated trace state")
            chunk = data[off:off + n]
            off += n
            return chunk

        dicts = []
        for _ in range(3):
            (n,) = struct.unpack(">I", take(4))
            dicts.append({bytes(take(KEY_BYTES)): decode_time(take(8)) for _ in range(n)})
        (n,) = struct.unpack(">I", take(4))
        presence = {}
        for _ in range(n):
            k = bytes(take(KEY_BYTES))
            (c,) = struct.unpack(">H", take(2))
            presence[k] = tuple((decode_time(take(8)), struct.unpack(">H", take(2))[0]) for _ in range(c))
        (n,) = struct.unpack(">I", take(4))
        visits = tuple((bytes(take(KEY_BYTES)), decode_time(take(8))) for _ in range(n))
        if off != len(data):
            raise WireError("trailing bytes after trace state")
        return cls(*dicts, presence, visits)


def request_keys(state: TraceState, batch: Iterable[Evidence], seed: int, d: Directory) -> list[bytes]:
    """Keys sent to the KDC for resolution: bare, deduplicated, shuffled by ``seed``."""
    keys = state.keys()
    for ev in batch:
        if ev.kind == Kind.TEST:
            keys.add(ev.message.key.to_bytes())
            continue
        for m, c in ev.records():
            keys.add(m.counterpart.to_bytes())
            keys.add(c.subject.to_bytes())
    keys -= d.place_keys
    out = sorted(keys)
    random.Random(seed).shuffle(out)
    return out


@dataclass
class DeriveReport:
    rejected: list[bytes] = field(default_factory=list)  # digests of evidence refused on semantic grounds


def _order(batch: Iterable[Evidence]):
    tests = sorted((e for e in batch if e.kind == Kind.TEST), key=lambda e: (e.message.time, e.digest))
    ups = sorted((e for e in batch if e.kind == Kind.UPLOAD), key=lambda e: e.digest)
    logs = sorted((e for e in batch if e.kind == Kind.PLACE_LOG), key=lambda e: e.digest)
    return tests, ups, logs


def derive(state: TraceState, batch: Iterable[Evidence], mapping: Mapping[bytes, bytes], now: int,
           cfg: ProtocolConfig, d: Directory) -> tuple[TraceState, DeriveReport]:
    """Next tracing state.  Pure and deterministic in all arguments."""
    rep = DeriveReport()

    def latest(k: bytes) -> bytes:
        v = mapping.get(k)
        return k if v is None or v == NOT_FOUND_KEY else v

    horizon = now - cfg.window_ms

    # carry the state over to everyone's newest key
    inf: dict[bytes, int] = {}
    sus: dict[bytes, int] = {}
    clr: dict[bytes, int] = {}
    pres: dict[bytes, list] = {}
    for k, t in state.infected.items():
        inf[latest(k)] = min(t, inf.get(latest(k), t))
    for k, t in state.suspected.items():
        sus[latest(k)] = min(t, sus.get(latest(k), t))
    for k, t in state.cleared.items():
        clr[latest(k)] = max(t, clr.get(latest(k), t))
    for k, evs in state.presence.items():
        pres.setdefault(latest(k), []).extend(evs)
    visits = list(state.visits)
    for k in inf:
        sus.pop(k, None)

    def expose(key: bytes, t: int, zone: int) -> None:
        if key in inf or clr.get(key, -1) >= t:
            return
        sus[key] = min(t, sus.get(key, t))
        pres.setdefault(key, []).append((t, zone))

    tests, ups, logs = _order(batch)
    for ev in tests:
        t: TestResult = ev.message
        k = latest(t.key.to_bytes())
        if t.time > now:
            rep.rejected.append(ev.digest)
            continue
        if t.positive:
            inf[k] = min(t.time, inf.get(k, t.time))
            sus.pop(k, None)
            clr.pop(k, None)
        else:
            inf.pop(k, None)
            sus.pop(k, None)
            pres.pop(k, None)
            clr[k] = max(t.time, clr.get(k, t.time))

    for ev in ups:
        recs = ev.records()
        owners = {latest(m.counterpart.to_bytes()) for m, _ in recs}
        owner = next(iter(owners))
        if len(owners) != 1 or owner not in inf or any(m.time > now for m, _ in recs):
            rep.rejected.append(ev.digest)
            continue
        for m, c in recs:
            if m.time < horizon:
                continue
            zone = d.zone_map.zone_of(m.location)
            pres.setdefault(owner, []).append((m.time, zone))
            signer = c.subject.to_bytes()
            if signer in d.place_keys:
                visits.append((signer, m.time))
                continue
            s = latest(signer)
            if s != owner:
                expose(s, m.time, zone)

    before, after = cfg.stay_ms, cfg.stay_ms + cfg.contamination_ms
    for ev in logs:
        recs = ev.records()
        places = {m.counterpart.to_bytes() for m, _ in recs}
        place = next(iter(places))
        if len(places) != 1 or place not in d.place_keys or any(m.time > now for m, _ in recs):
            rep.rejected.append(ev.digest)
            continue
        times = [tv for p, tv in visits if p == place]
        for m, c in recs:
            if m.time < horizon:
                continue
            if any(tv - before <= m.time <= tv + after for tv in times):
                expose(latest(c.subject.to_bytes()), m.time, d.zone_map.zone_of(m.location))

    # age out what the retention window no longer covers
    clr = {k: t for k, t in clr.items() if t >= horizon}
    live = set(inf) | set(sus)
    presence = {}
    for k, evs in pres.items():
        kept = tuple(sorted({e for e in evs if e[0] >= horizon}))
        if k in live and kept:
            presence[k] = kept
    visits = tuple(sorted({v for v in visits if v[1] >= horizon}))
    return TraceState(inf, sus, clr, presence, visits), rep


def zone_records(state: TraceState, now: int, cfg: ProtocolConfig, d: Directory) -> tuple[ZoneRecord, ...]:
    """Per-zone counts of infected and suspected users seen there within the window."""
    horizon = now - cfg.window_ms
    counts = {z: [0, 0] for z in d.zone_map.ids()}
    for col, keys in ((0, state.infected), (1, state.suspected)):
        for k in keys:
            for z in {z for t, z in state.presence.get(k, ()) if t >= horizon}:
                if z in counts:
                    counts[z][col] += 1
    out = []
    for z, (i, s) in sorted(counts.items()):
        cat = categorize_zone(i, s, cfg.weights, cfg.th1, cfg.th2).category
        out.append(ZoneRecord(z, min(i, 0xFFFF), min(s, 0xFFFF), cat))
    return tuple(out)


# ---- the replicated log entry -------------------------------------------------------

@dataclass(frozen=True)
class UpdateEntry:
    time: int
    seed: int
    consumed: tuple[bytes, ...]
    reply: tuple[bytes, ...]  # KDC answer, position for position with the rebuilt request
    attestation: Signature | None
    state: bytes  # encoded TraceState after the update
    rejected: int
    status_block: bytes
    zone_block: bytes

    def encode(self) -> bytes:
        parts = [b"UPD1", encode_time(self.time), struct.pack(">QH", self.seed, len(self.consumed)),
                 *self.consumed, struct.pack(">I", len(self.reply)), *self.reply]
        parts.append(b"\x01" + self.attestation.to_bytes() if self.attestation else b"\x00")
        for blob in (self.state, self.status_block, self.zone_block):
            parts.append(struct.pack(">I", len(blob)) + blob)
        parts.append(struct.pack(">I", self.rejected))
        return b"".join(parts)

    @classmethod
    def decode(cls, data: bytes) -> "UpdateEntry":
        try:
            if data[:4] != b"UPD1":
                raise WireError("not an update entry")
            off = 4
            t = decode_time(data[off:off + 8])
            seed, nc = struct.unpack_from(">QH", data, off + 8)
            off += 18
            consumed = tuple(bytes(data[off + 28 * i:off + 28 * (i + 1)]) for i in range(nc))
            off += 28 * nc
            (nv,) = struct.unpack_from(">I", data, off)
            off += 4
            reply = tuple(bytes(data[off + KEY_BYTES * i:off + KEY_BYTES * (i + 1)]) for i in range(nv))
            off += KEY_BYTES * nv
            att = None
            if data[off]:
                att = Signature.from_bytes(data[off + 1:off + 1 + SIG_BYTES])
                off += SIG_BYTES
            off += 1
            blobs = []
            for _ in range(3):
                (n,) = struct.unpack_from(">I", data, off)
                blobs.append(bytes(data[off + 4:off + 4 + n]))
                off += 4 + n
            (rejected,) = struct.unpack_from(">I", data, off)
            if off + 4 != len(data) or any(len(c) != 28 for c in consumed):
                raise WireError("malformed update entry")
        except (struct.error, IndexError, ValueError) as e:
            raise WireError(f"malformed update entry: {e}") from None
        return cls(t, seed, consumed, reply, att, blobs[0], rejected, blobs[1], blobs[2])

    def blocks(self, bloom: bool) -> tuple[StatusBlock, ZoneBlock]:
        return StatusBlock.from_bytes(self.status_block, bloom), ZoneBlock.from_bytes(self.zone_block)
