"""Status and zone chains: block layouts, hash links, queries.

Header (100 bytes):
    prev hash 28 | timestamp 8 | leader signature 56 | leader reference 8

The 8-byte leader reference holds the leader's validator id (2 bytes) and
the body shape (two 3-byte counts: N1, N2 for status blocks, Z and 0 for
zone blocks), which makes each block self-describing.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .bloom import BloomFilter, build_filter
from .crypto import PrivateKey, PublicKey, Signature, sign, verify
from .wire import (KEY_BYTES, ZONE_RECORD_BYTES, WireError, ZoneCategory, ZoneRecord, decode_time,
                   encode_time, pack_filters, unpack_filters)

HASH_BYTES = 28
HEADER_BYTES = 100
GENESIS_HASH = bytes(HASH_BYTES)
_SHAPE_MAX = (1 << 24) - 1


class LedgerStatus(enum.IntEnum):
    NOT_FOUND = 0
    INFECTED = 1
    CLOSE_CONTACT = 2


class BlockError(ValueError):
    pass


@dataclass(frozen=True)
class BlockHeader:
    prev_hash: bytes
    timestamp: int
    signature: Signature
    leader_id: int
    shape: tuple[int, int]

    def __post_init__(self):
        if len(self.prev_hash) != HASH_BYTES:
            raise BlockError("prev hash must be 28 bytes")
        if not 0 <= self.leader_id <= 0xFFFF:
            raise BlockError("leader id must fit in 2 bytes")
        if not all(0 <= s <= _SHAPE_MAX for s in self.shape):
            raise BlockError("body counts must fit in 3 bytes")

    def reference(self) -> bytes:
        a, b = self.shape
        return self.leader_id.to_bytes(2, "big") + a.to_bytes(3, "big") + b.to_bytes(3, "big")

    def to_bytes(self) -> bytes:
        return self.prev_hash + encode_time(self.timestamp) + self.signature.to_bytes() + self.reference()

    @classmethod
    def from_bytes(cls, data: bytes) -> "BlockHeader":
        if len(data) != HEADER_BYTES:
            raise BlockError("block header must be 100 bytes")
        try:
            sig = Signature.from_bytes(data[36:92])
        except ValueError as e:
            raise BlockError(f"bad leader signature encoding: {e}") from None
        ref = data[92:]
        return cls(bytes(data[:28]), decode_time(data[28:36]), sig, int.from_bytes(ref[:2], "big"),
                   (int.from_bytes(ref[2:5], "big"), int.from_bytes(ref[5:8], "big")))


def _signing_digest(kind: bytes, prev_hash: bytes, timestamp: int, leader_id: int, shape, body: bytes) -> bytes:
    a, b = shape
    return hashlib.sha224(kind + prev_hash + encode_time(timestamp) + leader_id.to_bytes(2, "big")
                          + a.to_bytes(3, "big") + b.to_bytes(3, "big") + hashlib.sha224(body).digest()).digest()


class _Block:
    KIND = b""

    header: BlockHeader

    def body(self) -> bytes:
        raise NotImplementedError

    def to_bytes(self) -> bytes:
        return self.header.to_bytes() + self.body()

    def __len__(self) -> int:
        return HEADER_BYTES + len(self.body())

    def block_hash(self) -> bytes:
        return hashlib.sha224(self.to_bytes()).digest()

    def signing_digest(self) -> bytes:
        h = self.header
        return _signing_digest(self.KIND, h.prev_hash, h.timestamp, h.leader_id, h.shape, self.body())

    def verify_signature(self, leader_pk: PublicKey) -> bool:
        return verify(leader_pk, self.signing_digest(), self.header.signature)


def _sign_header(kind, prev, leader_sk, leader_id, now, shape, body) -> BlockHeader:
    prev_hash = prev.block_hash() if prev is not None else GENESIS_HASH
    sig = sign(leader_sk, _signing_digest(kind, prev_hash, now, leader_id, shape, body))
    return BlockHeader(prev_hash, now, sig, leader_id, shape)


def _key_bytes(k) -> bytes:
    b = k.to_bytes() if isinstance(k, PublicKey) else bytes(k)
    if len(b) != KEY_BYTES:
        raise BlockError("keys must be 29-byte public keys")
    return b


@dataclass(frozen=True, eq=False)
class StatusBlock(_Block):
    """Infected and suspected key sets, as Bloom filters or (baseline) raw keys."""

    KIND = b"STAT"
    header: BlockHeader
    payload: bytes
    bloom: bool = True

    @property
    def n_infected(self) -> int:
        return self.header.shape[0]

    @property
    def n_suspected(self) -> int:
        return self.header.shape[1]

    def body(self) -> bytes:
        return self.payload

    def __eq__(self, other):
        return isinstance(other, StatusBlock) and self.to_bytes() == other.to_bytes() and self.bloom == other.bloom

    def __hash__(self):
        return hash(self.to_bytes())

    def filters(self) -> tuple[BloomFilter | None, BloomFilter | None]:
        if not self.bloom:
            raise BlockError("baseline block carries raw keys, not filters")
        return unpack_filters(self.payload, self.n_infected, self.n_suspected)

    def raw_sets(self) -> tuple[frozenset, frozenset]:
        if self.bloom:
            raise BlockError("block carries filters, not raw keys")
        n1 = self.n_infected * KEY_BYTES
        split = lambda b: frozenset(b[i:i + KEY_BYTES] for i in range(0, len(b), KEY_BYTES))
        return split(self.payload[:n1]), split(self.payload[n1:])

    def lookup(self, key) -> LedgerStatus:
        kb = _key_bytes(key)
        if self.bloom:
            inf, sus = _cached_filters(self)
            if inf is not None and kb in inf:
                return LedgerStatus.INFECTED
            if sus is not None and kb in sus:
                return LedgerStatus.CLOSE_CONTACT
            return LedgerStatus.NOT_FOUND
        inf, sus = self.raw_sets()
        if kb in inf:
            return LedgerStatus.INFECTED
        if kb in sus:
            return LedgerStatus.CLOSE_CONTACT
        return LedgerStatus.NOT_FOUND

    @classmethod
    def from_bytes(cls, data: bytes, bloom: bool = True) -> "StatusBlock":
        header = BlockHeader.from_bytes(data[:HEADER_BYTES])
        n1, n2 = header.shape
        body = bytes(data[HEADER_BYTES:])
        expected = status_body_size(n1, n2, bloom)
        if len(body) != expected:
            raise BlockError(f"status body is {len(body)} bytes, header implies {expected}")
        return cls(header, body, bloom)


_FILTER_CACHE: dict[bytes, tuple] = {}


def _cached_filters(block: StatusBlock):
    key = block.block_hash()
    hit = _FILTER_CACHE.get(key)
    if hit is None:
        if len(_FILTER_CACHE) > 256:
            _FILTER_CACHE.clear()
        hit = _FILTER_CACHE[key] = block.filters()
    return hit


def status_body_size(n1: int, n2: int, bloom: bool = True) -> int:
    if bloom:
        return (10 * n1 + 10 * n2 + 7) // 8
    return KEY_BYTES * (n1 + n2)


@dataclass(frozen=True)
class ZoneBlock(_Block):
    KIND = b"ZONE"
    header: BlockHeader
    records: tuple[ZoneRecord, ...]

    def body(self) -> bytes:
        return b"".join(r.to_bytes() for r in self.records)

    def get(self, zone_id: int) -> ZoneRecord | None:
        for r in self.records:
            if r.zone_id == zone_id:
                return r
        return None

    @classmethod
    def from_bytes(cls, data: bytes) -> "ZoneBlock":
        header = BlockHeader.from_bytes(data[:HEADER_BYTES])
        body = data[HEADER_BYTES:]
        z = header.shape[0]
        if len(body) != ZONE_RECORD_BYTES * z or header.shape[1] != 0:
            raise BlockError("zone body length does not match header")
        try:
            recs = tuple(ZoneRecord.from_bytes(body[i:i + 6]) for i in range(0, len(body), 6))
        except WireError as e:
            raise BlockError(str(e)) from None
        return cls(header, recs)


def status_body(infected: Iterable, suspected: Iterable, bloom: bool = True) -> tuple[tuple[int, int], bytes]:
    """Body shape (N1, N2) and bytes for the given key sets."""
    inf = sorted({_key_bytes(k) for k in infected})
    sus = sorted({_key_bytes(k) for k in suspected})
    if set(inf) & set(sus):
        raise BlockError("a key cannot be both infected and suspected")
    if bloom:
        return (len(inf), len(sus)), pack_filters(build_filter(inf), build_filter(sus))
    return (len(inf), len(sus)), b"".join(inf) + b"".join(sus)


def build_status_block(prev: StatusBlock | None, infected: Iterable, suspected: Iterable,
                       leader_sk: PrivateKey, now: int, leader_id: int = 0, bloom: bool = True) -> StatusBlock:
    """Fresh filters (10 bits per key, k = 5) over the authoritative key sets."""
    shape, body = status_body(infected, suspected, bloom)
    return StatusBlock(_sign_header(StatusBlock.KIND, prev, leader_sk, leader_id, now, shape, body), body, bloom)


def build_zone_block(prev: ZoneBlock | None, zone_stats: Iterable[ZoneRecord], leader_sk: PrivateKey,
                     now: int, leader_id: int = 0) -> ZoneBlock:
    recs = tuple(sorted(zone_stats, key=lambda r: r.zone_id))
    ids = [r.zone_id for r in recs]
    if len(set(ids)) != len(ids):
        raise BlockError("duplicate zone id")
    body = b"".join(r.to_bytes() for r in recs)
    return ZoneBlock(_sign_header(ZoneBlock.KIND, prev, leader_sk, leader_id, now, (len(recs), 0), body), recs)


@dataclass(frozen=True)
class ZoneStatus:
    weighted_average: float
    category: ZoneCategory
    th1: float
    th2: float


def categorize_zone(infected: int, suspected: int, weights: tuple[float, float] = (1.0, 0.5),
                    th1: float = 10, th2: float = 50) -> ZoneStatus:
    if th1 >= th2:
        raise ValueError("thresholds must satisfy th1 < th2")
    wi, ws = weights
    if wi < 0 or ws < 0 or wi + ws == 0:
        raise ValueError("weights must be non-negative and not both zero")
    w = (wi * infected + ws * suspected) / (wi + ws)
    if w > th2:
        cat = ZoneCategory.RED
    elif w > th1:
        cat = ZoneCategory.ORANGE
    else:
        cat = ZoneCategory.GREEN
    return ZoneStatus(w, cat, th1, th2)


# ---- chains -----------------------------------------------------------------------

@dataclass
class Chain:
    """Append-only list of blocks of one kind, with hash-link checking on append."""

    kind: str  # "status" | "zone"
    blocks: list = field(default_factory=list)
    bloom: bool = True
    # authoritative key sets behind each status block, kept by validators only
    truth: dict[int, tuple[frozenset, frozenset]] = field(default_factory=dict)
    fp_events: int = 0

    def __len__(self):
        return len(self.blocks)

    @property
    def head(self):
        return self.blocks[-1] if self.blocks else None

    def head_hash(self) -> bytes:
        return self.blocks[-1].block_hash() if self.blocks else GENESIS_HASH

    def append(self, block, truth: tuple[frozenset, frozenset] | None = None) -> None:
        if block.header.prev_hash != self.head_hash():
            raise BlockError("block does not extend the chain head")
        self.blocks.append(block)
        if truth is not None:
            self.truth[len(self.blocks) - 1] = truth

    def storage_bytes(self) -> int:
        return sum(len(b) for b in self.blocks)

    def verify(self, leader_keys: Mapping[int, PublicKey]) -> int | None:
        """Index of the first block that breaks a link or signature, or None."""
        prev = GENESIS_HASH
        for i, b in enumerate(self.blocks):
            if b.header.prev_hash != prev:
                return i
            pk = leader_keys.get(b.header.leader_id)
            if pk is None or not b.verify_signature(pk):
                return i
            prev = b.block_hash()
        return None

    def to_hex_dump(self) -> str:
        return "".join(b.to_bytes().hex() + "\n" for b in self.blocks)

    @classmethod
    def from_hex_dump(cls, text: str, kind: str, bloom: bool = True) -> "Chain":
        chain = cls(kind, bloom=bloom)
        for n, line in enumerate(text.splitlines()):
            line = line.strip()
            if not line:
                continue
            try:
                raw = bytes.fromhex(line)
                blk = StatusBlock.from_bytes(raw, bloom) if kind == "status" else ZoneBlock.from_bytes(raw)
            except (ValueError, WireError) as e:
                raise BlockError(f"block {n}: {e}") from None
            chain.blocks.append(blk)  # links are checked by verify()
        return chain


def query_status(chain: Chain, pk) -> LedgerStatus:
    """Latest block only; infected filter first, then suspected."""
    if not chain.blocks:
        return LedgerStatus.NOT_FOUND
    idx = len(chain.blocks) - 1
    status = chain.blocks[idx].lookup(pk)
    truth = chain.truth.get(idx)
    if truth is not None and status != LedgerStatus.NOT_FOUND:
        kb = _key_bytes(pk)
        real = truth[0] if status == LedgerStatus.INFECTED else truth[1]
        if kb not in real:
            chain.fp_events += 1
    return status


def query_zone(chain: Chain, zone_id: int, default: ZoneCategory | None = ZoneCategory.GREEN) -> ZoneRecord | None:
    """Latest block's record for the zone; unknown zones get ``default`` (None means unknown)."""
    rec = chain.blocks[-1].get(zone_id) if chain.blocks else None
    if rec is not None:
        return rec
    return None if default is None else ZoneRecord(zone_id, 0, 0, default)
