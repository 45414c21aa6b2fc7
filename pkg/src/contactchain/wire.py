"""Fixed-layout binary messages.

Every protocol message has a payload whose length depends only on its
counts (M records, V keys, N1/N2 filter sizes, Z zones).  On the simulated
transport a frame is ``step tag (1 byte) || payload``; byte accounting uses
the payload alone.
"""

from __future__ import annotations

import enum
import os
import struct
from dataclasses import dataclass
from typing import ClassVar, Sequence

from .bloom import BloomFilter
from .crypto import CERT_BYTES, AggregateSignature, Certificate, PublicKey, Signature

NONCE_BYTES = 5
LOCATION_BYTES = 6
TIME_BYTES = 8
KEY_BYTES = 29
SIG_BYTES = 56
PROOF_BYTES = KEY_BYTES + TIME_BYTES + LOCATION_BYTES  # 43
RECORD_BYTES = PROOF_BYTES + CERT_BYTES  # 136, stored form inside a group
BASELINE_RECORD_BYTES = PROOF_BYTES + SIG_BYTES + CERT_BYTES  # 192
ZONE_RECORD_BYTES = 6
NOT_FOUND_KEY = bytes(KEY_BYTES)


class WireError(ValueError):
    pass


def encode_time(t: int) -> bytes:
    if not 0 <= t < 1 << 64:
        raise WireError(f"time {t} does not fit in {TIME_BYTES} bytes")
    return t.to_bytes(TIME_BYTES, "big")


def decode_time(data: bytes) -> int:
    if len(data) != TIME_BYTES:
        raise WireError("timestamp must be 8 bytes")
    return int.from_bytes(data, "big")


def _need(data: bytes, n: int, what: str) -> None:
    if len(data) != n:
        raise WireError(f"{what}: expected {n} bytes, got {len(data)}")


@dataclass(frozen=True)
class Nonce:
    value: bytes

    def __post_init__(self):
        if len(self.value) != NONCE_BYTES:
            raise WireError(f"nonce must be {NONCE_BYTES} bytes")

    @classmethod
    def random(cls, rng=None) -> "Nonce":
        if rng is None:
            return cls(os.urandom(NONCE_BYTES))
        return cls(rng.randbytes(NONCE_BYTES))


_LAT_SCALE = (1 << 24) - 1


@dataclass(frozen=True, order=True)
class Location:
    """24-bit fixed-point latitude and longitude."""

    lat_q: int
    lon_q: int

    def __post_init__(self):
        if not (0 <= self.lat_q <= _LAT_SCALE and 0 <= self.lon_q <= _LAT_SCALE):
            raise WireError("location out of range")

    @classmethod
    def from_degrees(cls, lat: float, lon: float) -> "Location":
        if not (-90 <= lat <= 90 and -180 <= lon <= 180):
            raise WireError(f"coordinates out of range: {lat}, {lon}")
        return cls(round((lat + 90) / 180 * _LAT_SCALE), round((lon + 180) / 360 * _LAT_SCALE))

    @property
    def degrees(self) -> tuple[float, float]:
        return self.lat_q / _LAT_SCALE * 180 - 90, self.lon_q / _LAT_SCALE * 360 - 180

    def to_bytes(self) -> bytes:
        return self.lat_q.to_bytes(3, "big") + self.lon_q.to_bytes(3, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> "Location":
        _need(data, LOCATION_BYTES, "location")
        return cls(int.from_bytes(data[:3], "big"), int.from_bytes(data[3:], "big"))


@dataclass(frozen=True)
class ProofMessage:
    """Counterpart key, time and place of an encounter; the signed message body."""

    counterpart: PublicKey
    time: int
    location: Location

    def to_bytes(self) -> bytes:
        return self.counterpart.to_bytes() + encode_time(self.time) + self.location.to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "ProofMessage":
        _need(data, PROOF_BYTES, "proof message")
        return cls(_key(data[:KEY_BYTES]), decode_time(data[KEY_BYTES:KEY_BYTES + TIME_BYTES]),
                   Location.from_bytes(data[KEY_BYTES + TIME_BYTES:]))


@dataclass(frozen=True)
class ContactRecord:
    """A proof message with the certificate of whoever signed it.

    ``signature`` is kept only when aggregation is disabled; otherwise the
    signature lives in the enclosing group's aggregate.
    """

    message: ProofMessage
    cert: Certificate
    signature: Signature | None = None

    @property
    def signer(self) -> PublicKey:
        return self.cert.subject


class ZoneCategory(enum.IntEnum):
    GREEN = 0
    ORANGE = 1
    RED = 2


ZONE_ID_MAX = (1 << 14) - 1


@dataclass(frozen=True)
class ZoneRecord:
    """Zone id with status folded into its top two bits, then two 16-bit counts."""

    zone_id: int
    infected: int
    suspected: int
    category: ZoneCategory = ZoneCategory.GREEN

    def __post_init__(self):
        if not 0 <= self.zone_id <= ZONE_ID_MAX:
            raise WireError(f"zone id {self.zone_id} outside 0..{ZONE_ID_MAX}")
        if not (0 <= self.infected <= 0xFFFF and 0 <= self.suspected <= 0xFFFF):
            raise WireError("zone counts must fit in 16 bits")

    def to_bytes(self) -> bytes:
        return struct.pack(">HHH", (int(self.category) << 14) | self.zone_id, self.infected, self.suspected)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ZoneRecord":
        _need(data, ZONE_RECORD_BYTES, "zone record")
        head, inf, sus = struct.unpack(">HHH", data)
        cat = head >> 14
        if cat > 2:
            raise WireError("bad zone category")
        return cls(head & ZONE_ID_MAX, inf, sus, ZoneCategory(cat))


def _key(data: bytes) -> PublicKey:
    try:
        return PublicKey.from_bytes(data)
    except ValueError as e:
        raise WireError(f"bad public key: {e}") from None


def _sig(data: bytes) -> Signature:
    try:
        return Signature.from_bytes(data)
    except ValueError as e:
        raise WireError(f"bad signature element: {e}") from None


def _cert(data: bytes) -> Certificate:
    try:
        return Certificate.from_bytes(data)
    except ValueError as e:
        raise WireError(f"bad certificate: {e}") from None


# ---- step tags -----------------------------------------------------------------

class Step(enum.IntEnum):
    CONTACT_1 = 0x11
    CONTACT_2 = 0x12
    CONTACT_3 = 0x13
    CONTACT_4_1 = 0x14
    CONTACT_4_2 = 0x15
    CONTACT_5 = 0x16
    CONTACT_6 = 0x17
    CONTACT_STATUS = 0x18

    UPLOAD = 0x21
    UPLOAD_BASELINE = 0x22
    PLACE_LOG_REQUEST = 0x23
    PLACE_LOG = 0x24
    PLACE_LOG_BASELINE = 0x25
    TEST_NONCE = 0x26
    TEST_AUTH = 0x27
    TEST_RESULT = 0x28

    STATUS_1 = 0x31
    STATUS_2 = 0x32
    STATUS_2_ATTEST = 0x33
    STATUS_5_1 = 0x35
    STATUS_5_2 = 0x36
    STATUS_REPLY = 0x37
    ZONE_REPLY = 0x38

    ACCESS_1 = 0x41
    ACCESS_2 = 0x42
    ACCESS_3 = 0x43
    ACCESS_4 = 0x44
    ACCESS_5 = 0x45
    VISIT_5 = 0x46
    VISIT_6 = 0x47
    ACCESS_STATUS = 0x48

    RENEW_REQUEST = 0x51
    RENEW_GRANT = 0x52
    RENEW_REFUSED = 0x53

    RAFT_VOTE_REQUEST = 0x61
    RAFT_VOTE_REPLY = 0x62
    RAFT_PROPOSE = 0x63
    RAFT_PROPOSAL_VOTE = 0x64
    RAFT_APPEND = 0x65
    RAFT_APPEND_REPLY = 0x66
    RAFT_FORWARD = 0x67

    FORWARD_UPLOAD = 0x71
    FORWARD_PLACE_LOG = 0x72
    FORWARD_TEST_RESULT = 0x73
    FORWARD_UPLOAD_BASELINE = 0x74
    FORWARD_PLACE_LOG_BASELINE = 0x75


PHASE_OF: dict[Step, str] = {}
for _s in Step:
    PHASE_OF[_s] = {0x1: "contact", 0x2: "tracing", 0x3: "status", 0x4: "access",
                    0x5: "credentials", 0x6: "consensus", 0x7: "evidence"}[_s >> 4]

# steps whose payloads appear in the message-size tables
TABLE_STEPS = frozenset({
    Step.CONTACT_1, Step.CONTACT_2, Step.CONTACT_3, Step.CONTACT_4_1, Step.CONTACT_4_2,
    Step.CONTACT_5, Step.CONTACT_6, Step.UPLOAD, Step.UPLOAD_BASELINE,
    Step.STATUS_1, Step.STATUS_2, Step.STATUS_5_1, Step.STATUS_5_2,
    Step.ACCESS_1, Step.ACCESS_2, Step.ACCESS_3, Step.ACCESS_4, Step.ACCESS_5,
})


# ---- message types ---------------------------------------------------------------

class Message:
    STEPS: ClassVar[tuple[Step, ...]] = ()

    def payload(self) -> bytes:
        raise NotImplementedError

    @classmethod
    def decode(cls, data: bytes) -> "Message":
        raise NotImplementedError


@dataclass(frozen=True)
class NonceMessage(Message):
    STEPS: ClassVar = (Step.CONTACT_1, Step.ACCESS_1, Step.TEST_NONCE)
    nonce: Nonce

    def payload(self) -> bytes:
        return self.nonce.value

    @classmethod
    def decode(cls, data):
        _need(data, NONCE_BYTES, "nonce message")
        return cls(Nonce(bytes(data)))


@dataclass(frozen=True)
class ChallengeMessage(Message):
    """Certificate, signature over the peer's nonce, and a fresh nonce of our own."""

    STEPS: ClassVar = (Step.CONTACT_2, Step.ACCESS_2)
    cert: Certificate
    signature: Signature
    nonce: Nonce

    def payload(self) -> bytes:
        return self.cert.to_bytes() + self.signature.to_bytes() + self.nonce.value

    @classmethod
    def decode(cls, data):
        _need(data, CERT_BYTES + SIG_BYTES + NONCE_BYTES, "challenge")
        return cls(_cert(data[:CERT_BYTES]), _sig(data[CERT_BYTES:CERT_BYTES + SIG_BYTES]),
                   Nonce(bytes(data[CERT_BYTES + SIG_BYTES:])))


@dataclass(frozen=True)
class AuthMessage(Message):
    STEPS: ClassVar = (Step.CONTACT_3, Step.ACCESS_3, Step.TEST_AUTH)
    cert: Certificate
    signature: Signature

    def payload(self) -> bytes:
        return self.cert.to_bytes() + self.signature.to_bytes()

    @classmethod
    def decode(cls, data):
        _need(data, CERT_BYTES + SIG_BYTES, "auth message")
        return cls(_cert(data[:CERT_BYTES]), _sig(data[CERT_BYTES:]))


@dataclass(frozen=True)
class KeyQuery(Message):
    STEPS: ClassVar = (Step.CONTACT_4_1, Step.CONTACT_4_2, Step.ACCESS_4, Step.STATUS_5_1)
    key: PublicKey

    def payload(self) -> bytes:
        return self.key.to_bytes()

    @classmethod
    def decode(cls, data):
        _need(data, KEY_BYTES, "key query")
        return cls(_key(data))


@dataclass(frozen=True)
class ByteMessage(Message):
    """Single status/verdict/outcome byte."""

    STEPS: ClassVar = (Step.CONTACT_STATUS, Step.STATUS_REPLY, Step.ACCESS_STATUS, Step.ACCESS_5,
                       Step.RENEW_REFUSED)
    code: int

    def payload(self) -> bytes:
        return bytes([self.code])

    @classmethod
    def decode(cls, data):
        _need(data, 1, "status byte")
        return cls(data[0])


@dataclass(frozen=True)
class SignedProof(Message):
    STEPS: ClassVar = (Step.CONTACT_5, Step.CONTACT_6, Step.VISIT_5, Step.VISIT_6)
    message: ProofMessage
    signature: Signature

    def payload(self) -> bytes:
        return self.message.to_bytes() + self.signature.to_bytes()

    @classmethod
    def decode(cls, data):
        _need(data, PROOF_BYTES + SIG_BYTES, "signed proof")
        return cls(ProofMessage.from_bytes(data[:PROOF_BYTES]), _sig(data[PROOF_BYTES:]))


@dataclass(frozen=True)
class GroupUpload(Message):
    """M stored records followed by their single aggregate signature."""

    STEPS: ClassVar = (Step.UPLOAD, Step.PLACE_LOG, Step.FORWARD_UPLOAD, Step.FORWARD_PLACE_LOG)
    records: tuple[tuple[ProofMessage, Certificate], ...]
    aggregate: AggregateSignature

    def __post_init__(self):
        if not self.records:
            raise WireError("a group upload needs at least one record")
        if self.aggregate.count != len(self.records):
            raise WireError("aggregate count does not match record count")

    def payload(self) -> bytes:
        body = b"".join(m.to_bytes() + c.to_bytes() for m, c in self.records)
        return body + self.aggregate.to_bytes()

    @classmethod
    def decode(cls, data):
        n, rem = divmod(len(data) - SIG_BYTES, RECORD_BYTES)
        if n < 1 or rem:
            raise WireError(f"group upload length {len(data)} is not 136*M + 56")
        recs = []
        for i in range(n):
            chunk = data[i * RECORD_BYTES:(i + 1) * RECORD_BYTES]
            recs.append((ProofMessage.from_bytes(chunk[:PROOF_BYTES]), _cert(chunk[PROOF_BYTES:])))
        try:
            agg = AggregateSignature.from_bytes(data[-SIG_BYTES:], n)
        except ValueError as e:
            raise WireError(f"bad aggregate: {e}") from None
        return cls(tuple(recs), agg)


@dataclass(frozen=True)
class BaselineUpload(Message):
    """Records each carrying an individual signature (aggregation disabled)."""

    STEPS: ClassVar = (Step.UPLOAD_BASELINE, Step.PLACE_LOG_BASELINE, Step.FORWARD_UPLOAD_BASELINE,
                       Step.FORWARD_PLACE_LOG_BASELINE)
    records: tuple[tuple[ProofMessage, Signature, Certificate], ...]

    def __post_init__(self):
        if not self.records:
            raise WireError("an upload needs at least one record")

    def payload(self) -> bytes:
        return b"".join(m.to_bytes() + s.to_bytes() + c.to_bytes() for m, s, c in self.records)

    @classmethod
    def decode(cls, data):
        n, rem = divmod(len(data), BASELINE_RECORD_BYTES)
        if n < 1 or rem:
            raise WireError(f"baseline upload length {len(data)} is not 192*M")
        recs = []
        for i in range(n):
            c = data[i * BASELINE_RECORD_BYTES:(i + 1) * BASELINE_RECORD_BYTES]
            recs.append((ProofMessage.from_bytes(c[:PROOF_BYTES]), _sig(c[PROOF_BYTES:PROOF_BYTES + SIG_BYTES]),
                         _cert(c[PROOF_BYTES + SIG_BYTES:])))
        return cls(tuple(recs))


@dataclass(frozen=True)
class WindowRequest(Message):
    STEPS: ClassVar = (Step.PLACE_LOG_REQUEST,)
    start: int
    end: int

    def payload(self) -> bytes:
        return encode_time(self.start) + encode_time(self.end)

    @classmethod
    def decode(cls, data):
        _need(data, 2 * TIME_BYTES, "window request")
        return cls(decode_time(data[:8]), decode_time(data[8:]))


@dataclass(frozen=True)
class TestResult(Message):
    """Health-authority attestation that the holder of ``key`` tested positive/negative."""

    STEPS: ClassVar = (Step.TEST_RESULT, Step.FORWARD_TEST_RESULT)
    key: PublicKey
    positive: bool
    time: int
    authority: int
    signature: Signature

    def signed_bytes(self) -> bytes:
        return signed_test_bytes(self.key, self.positive, self.time, self.authority)

    def payload(self) -> bytes:
        return self.signed_bytes() + self.signature.to_bytes()

    @classmethod
    def decode(cls, data):
        _need(data, KEY_BYTES + 1 + TIME_BYTES + 2 + SIG_BYTES, "test result")
        flag = data[KEY_BYTES]
        if flag > 1:
            raise WireError("bad test outcome flag")
        return cls(_key(data[:KEY_BYTES]), bool(flag), decode_time(data[KEY_BYTES + 1:KEY_BYTES + 9]),
                   int.from_bytes(data[KEY_BYTES + 9:KEY_BYTES + 11], "big"), _sig(data[KEY_BYTES + 11:]))


def signed_test_bytes(key: PublicKey, positive: bool, time: int, authority: int) -> bytes:
    return key.to_bytes() + bytes([int(positive)]) + encode_time(time) + authority.to_bytes(2, "big")


@dataclass(frozen=True)
class KeyList(Message):
    """Bare public keys, 29 bytes each; all-zero entries mean not found."""

    STEPS: ClassVar = (Step.STATUS_1, Step.STATUS_2)
    keys: tuple[bytes, ...]

    def __post_init__(self):
        for k in self.keys:
            if len(k) != KEY_BYTES:
                raise WireError("key list entries must be 29 bytes")

    def payload(self) -> bytes:
        return b"".join(self.keys)

    @classmethod
    def decode(cls, data):
        if len(data) % KEY_BYTES:
            raise WireError("key list length is not a multiple of 29")
        return cls(tuple(bytes(data[i:i + KEY_BYTES]) for i in range(0, len(data), KEY_BYTES)))


@dataclass(frozen=True)
class SignatureMessage(Message):
    STEPS: ClassVar = (Step.STATUS_2_ATTEST,)
    signature: Signature

    def payload(self) -> bytes:
        return self.signature.to_bytes()

    @classmethod
    def decode(cls, data):
        _need(data, SIG_BYTES, "signature")
        return cls(_sig(data))


@dataclass(frozen=True)
class ZoneQuery(Message):
    STEPS: ClassVar = (Step.STATUS_5_2,)
    zone_id: int

    def payload(self) -> bytes:
        return self.zone_id.to_bytes(2, "big")

    @classmethod
    def decode(cls, data):
        _need(data, 2, "zone query")
        return cls(int.from_bytes(data, "big"))


@dataclass(frozen=True)
class ZoneReply(Message):
    STEPS: ClassVar = (Step.ZONE_REPLY,)
    record: ZoneRecord

    def payload(self) -> bytes:
        return self.record.to_bytes()

    @classmethod
    def decode(cls, data):
        return cls(ZoneRecord.from_bytes(data))


@dataclass(frozen=True)
class RenewRequest(Message):
    """Current key plus a signature with it over the renewal context."""

    STEPS: ClassVar = (Step.RENEW_REQUEST,)
    key: PublicKey
    signature: Signature

    def payload(self) -> bytes:
        return self.key.to_bytes() + self.signature.to_bytes()

    @classmethod
    def decode(cls, data):
        _need(data, KEY_BYTES + SIG_BYTES, "renew request")
        return cls(_key(data[:KEY_BYTES]), _sig(data[KEY_BYTES:]))


@dataclass(frozen=True)
class RenewGrant(Message):
    STEPS: ClassVar = (Step.RENEW_GRANT,)
    secret: bytes
    cert: Certificate

    def payload(self) -> bytes:
        return self.secret + self.cert.to_bytes()

    @classmethod
    def decode(cls, data):
        _need(data, 28 + CERT_BYTES, "renew grant")
        return cls(bytes(data[:28]), _cert(data[28:]))


@dataclass(frozen=True)
class RawMessage(Message):
    """Opaque payload whose structure is owned by another module."""

    STEPS: ClassVar = (Step.RAFT_VOTE_REQUEST, Step.RAFT_VOTE_REPLY, Step.RAFT_PROPOSE,
                       Step.RAFT_PROPOSAL_VOTE, Step.RAFT_APPEND, Step.RAFT_APPEND_REPLY, Step.RAFT_FORWARD)
    data: bytes

    def payload(self) -> bytes:
        return self.data

    @classmethod
    def decode(cls, data):
        return cls(bytes(data))


_REGISTRY: dict[Step, type[Message]] = {}
for _cls in (NonceMessage, ChallengeMessage, AuthMessage, KeyQuery, ByteMessage, SignedProof, GroupUpload,
             BaselineUpload, WindowRequest, TestResult, KeyList, SignatureMessage, ZoneQuery, ZoneReply,
             RenewRequest, RenewGrant, RawMessage):
    for _s in _cls.STEPS:
        assert _s not in _REGISTRY
        _REGISTRY[_s] = _cls
assert set(_REGISTRY) == set(Step)


@dataclass(frozen=True)
class Frame:
    step: Step
    message: Message

    def __post_init__(self):
        if not isinstance(self.message, _REGISTRY[self.step]):
            raise WireError(f"{type(self.message).__name__} cannot travel as {self.step.name}")

    def payload(self) -> bytes:
        return self.message.payload()

    def encode(self) -> bytes:
        return bytes([self.step]) + self.payload()


def decode_frame(data: bytes) -> Frame:
    if not data:
        raise WireError("empty frame")
    try:
        step = Step(data[0])
    except ValueError:
        raise WireError(f"unknown step id 0x{data[0]:02x}") from None
    return Frame(step, _REGISTRY[step].decode(bytes(data[1:])))


def counted_size(step: Step, payload_len: int, table_mode: bool = True) -> int:
    """Bytes a frame contributes to the overhead tables."""
    if table_mode and step == Step.ACCESS_5:
        return 0
    return payload_len


# ---- per-phase encoders ----------------------------------------------------------

_CONTACT = {1: Step.CONTACT_1, 2: Step.CONTACT_2, 3: Step.CONTACT_3, 4.1: Step.CONTACT_4_1,
            4.2: Step.CONTACT_4_2, 5: Step.CONTACT_5, 6: Step.CONTACT_6}
_ACCESS = {1: Step.ACCESS_1, 2: Step.ACCESS_2, 3: Step.ACCESS_3, 4: Step.ACCESS_4, 5: Step.ACCESS_5}


def _encode(table, step_id, payload: Message) -> bytes:
    if step_id not in table:
        raise WireError(f"no step {step_id} in this phase")
    return Frame(table[step_id], payload).payload()


def encode_contact_step(step_id, payload: Message) -> bytes:
    return _encode(_CONTACT, step_id, payload)


def encode_access_step(step_id, payload: Message) -> bytes:
    return _encode(_ACCESS, step_id, payload)


def encode_tracing_upload(records: Sequence[ContactRecord], agg: AggregateSignature | None = None) -> bytes:
    """Aggregated group (136M + 56) or, with ``agg=None``, per-record signatures (192M)."""
    if not records:
        raise WireError("empty group")
    if agg is None:
        if any(r.signature is None for r in records):
            raise WireError("baseline upload needs every individual signature")
        return BaselineUpload(tuple((r.message, r.signature, r.cert) for r in records)).payload()
    return GroupUpload(tuple((r.message, r.cert) for r in records), agg).payload()


def pack_filters(infected: BloomFilter | None, suspected: BloomFilter | None) -> bytes:
    """Both filters' bits back to back, padded once to a byte boundary."""
    acc, width = 0, 0
    for f in (infected, suspected):
        if f is None:
            continue
        pad = 8 * len(f.bits) - f.m
        acc = (acc << f.m) | (int.from_bytes(f.bits, "big") >> pad)
        width += f.m
    pad = -width % 8
    return (acc << pad).to_bytes((width + pad) // 8, "big")


def unpack_filters(data: bytes, n1: int, n2: int, bits_per_key: int = 10, k: int = 5):
    m1, m2 = bits_per_key * n1, bits_per_key * n2
    width = m1 + m2
    if len(data) != (width + 7) // 8:
        raise WireError(f"filter payload is {len(data)} bytes, expected {(width + 7) // 8}")
    acc = int.from_bytes(data, "big") >> (-width % 8)
    out = []
    for m, n, shift in ((m1, n1, m2), (m2, n2, 0)):
        if m == 0:
            out.append(None)
            continue
        bits = (acc >> shift) & ((1 << m) - 1)
        nbytes = (m + 7) // 8
        out.append(BloomFilter(m, k, n, bytearray((bits << (8 * nbytes - m)).to_bytes(nbytes, "big"))))
    return tuple(out)


def encode_status_update_step(step_id, payload) -> bytes:
    """Status-phase payloads.

    1, 2: sequence of 29-byte keys; 3: (infected filter, suspected filter);
    4: sequence of ZoneRecord; 5.1: PublicKey; 5.2: zone id.
    """
    if step_id in (1, 2):
        return KeyList(tuple(k if isinstance(k, bytes) else k.to_bytes() for k in payload)).payload()
    if step_id == 3:
        return pack_filters(*payload)
    if step_id == 4:
        return b"".join(z.to_bytes() for z in payload)
    if step_id == 5.1:
        return KeyQuery(payload).payload()
    if step_id == 5.2:
        return ZoneQuery(payload).payload()
    raise WireError(f"no status step {step_id}")
