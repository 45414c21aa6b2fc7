"""Protocol sessions between actors.

Short-range sessions (contact, visit, test, renewal, ledger queries) run as a
sequence of ``exchange`` hops: each hop is traced on the simulated link and
decoded on the receiving side, and a lost hop ends the session.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from ..crypto import CertStatus, PrivateKey, sign, validate_certificate, verify
from ..ledger import LedgerStatus
from ..opcount import COUNTER
from ..wire import (AuthMessage, BaselineUpload, ByteMessage, ChallengeMessage, ContactRecord, Frame,
                    GroupUpload, KeyQuery, Location, Nonce, NonceMessage, ProofMessage, RenewRequest,
                    SignedProof, Step, TestResult, ZoneQuery, ZoneReply, decode_frame, signed_test_bytes)
from .authority import SETTLE_MS, HealthAuthorityActor
from .config import KDC_ADDR
from .evidence import Evidence, Kind
from .kdc import renewal_message
from .place import PlaceActor, Visit
from .user import Health, RecordGroup, UserActor


class Abort(enum.Enum):
    LOST = "lost"
    INVALID_CERT = "invalid-cert"
    BAD_SIGNATURE = "bad-signature"
    INFECTED = "infected"
    CLOSE_CONTACT = "close-contact"


_STATUS_ABORT = {LedgerStatus.INFECTED: Abort.INFECTED, LedgerStatus.CLOSE_CONTACT: Abort.CLOSE_CONTACT}


@dataclass(frozen=True)
class HandshakeResult:
    reason: Abort | None = None
    step: float | None = None  # where the session stopped
    records: tuple = ()

    @property
    def ok(self) -> bool:
        return self.reason is None


class Verdict(enum.IntEnum):
    ADMIT = 0
    DENY_INFECTED = 1
    DENY_CLOSE_CONTACT = 2
    DENY_AUTH = 3
    LOST = 4


def _hop(world, src: str, dst: str, step: Step, msg):
    """Carry one frame; the receiver gets the decoded message, or None if it was lost."""
    data = Frame(step, msg).encode()
    if not world.sim.exchange(src, dst, data):
        return None
    return decode_frame(data).message


def _authentic(world, cert, challenge: bytes, sig, now: int, allow_expired: bool = False) -> Abort | None:
    st = validate_certificate(world.directory.kdc_pk, cert, now)
    if st == CertStatus.BAD_SIGNATURE or (st == CertStatus.EXPIRED and not allow_expired):
        return Abort.INVALID_CERT
    if not verify(cert.subject, challenge, sig):
        return Abort.BAD_SIGNATURE
    return None


def _ledger_query(world, asker: str, key, step: Step, reply_step: Step) -> LedgerStatus | None:
    gw = world.gateway
    q = _hop(world, asker, gw.addr, step, KeyQuery(key))
    if q is None:
        return None
    r = _hop(world, gw.addr, asker, reply_step, ByteMessage(int(gw.lookup(q.key))))
    return None if r is None else LedgerStatus(r.code)


def contact_handshake(world, a: UserActor, b: UserActor, location: Location) -> HandshakeResult:
    """Mutual authentication, status checks, and exchange of signed proofs of contact."""
    now = world.sim.now
    with COUNTER.in_phase("contact"):
        r1 = Nonce.random(world.rng)
        m1 = _hop(world, a.addr, b.addr, Step.CONTACT_1, NonceMessage(r1))
        if m1 is None:
            return HandshakeResult(Abort.LOST, 1)

        r2 = Nonce.random(world.rng)
        m2 = _hop(world, b.addr, a.addr, Step.CONTACT_2, ChallengeMessage(b.cert, sign(b.sk, m1.nonce.value), r2))
        if m2 is None:
            return HandshakeResult(Abort.LOST, 2)
        bad = _authentic(world, m2.cert, r1.value, m2.signature, now)
        if bad:
            return HandshakeResult(bad, 2)

        # the initiator signs both nonces
        m3 = _hop(world, a.addr, b.addr, Step.CONTACT_3, AuthMessage(a.cert, sign(a.sk, r1.value + m2.nonce.value)))
        if m3 is None:
            return HandshakeResult(Abort.LOST, 3)
        bad = _authentic(world, m3.cert, r1.value + r2.value, m3.signature, now)
        if bad:
            return HandshakeResult(bad, 3)

        peer_b, peer_a = m2.cert, m3.cert
        for step_id, asker, key, step in ((4.1, a, peer_b.subject, Step.CONTACT_4_1),
                                          (4.2, b, peer_a.subject, Step.CONTACT_4_2)):
            st = _ledger_query(world, asker.addr, key, step, Step.CONTACT_STATUS)
            if st is None:
                return HandshakeResult(Abort.LOST, step_id)
            if st != LedgerStatus.NOT_FOUND:
                return HandshakeResult(_STATUS_ABORT[st], step_id)

        msg_b = ProofMessage(peer_a.subject, now, location)
        m5 = _hop(world, b.addr, a.addr, Step.CONTACT_5, SignedProof(msg_b, sign(b.sk, msg_b.to_bytes())))
        if m5 is None:
            return HandshakeResult(Abort.LOST, 5)
        if m5.message.counterpart != a.pk or not verify(peer_b.subject, m5.message.to_bytes(), m5.signature):
            return HandshakeResult(Abort.BAD_SIGNATURE, 5)

        msg_a = ProofMessage(peer_b.subject, now, location)
        m6 = _hop(world, a.addr, b.addr, Step.CONTACT_6, SignedProof(msg_a, sign(a.sk, msg_a.to_bytes())))
        if m6 is None:
            return HandshakeResult(Abort.LOST, 6)
        if m6.message.counterpart != b.pk or not verify(peer_a.subject, m6.message.to_bytes(), m6.signature):
            return HandshakeResult(Abort.BAD_SIGNATURE, 6)

        rec_a = ContactRecord(m5.message, peer_b)
        rec_b = ContactRecord(m6.message, peer_a)
        a.store(rec_a, m5.signature, now)
        b.store(rec_b, m6.signature, now)
    return HandshakeResult(records=(rec_a, rec_b))


def visit_place(world, u: UserActor, p: PlaceActor) -> Verdict:
    """Digital-pass check at a public place; admitted visits leave proofs on both sides."""
    now = world.sim.now
    with COUNTER.in_phase("access"):
        r1 = Nonce.random(world.rng)
        m1 = _hop(world, u.addr, p.addr, Step.ACCESS_1, NonceMessage(r1))
        if m1 is None:
            return Verdict.LOST
        r2 = Nonce.random(world.rng)
        m2 = _hop(world, p.addr, u.addr, Step.ACCESS_2, ChallengeMessage(p.cert, sign(p.sk, m1.nonce.value), r2))
        if m2 is None:
            return Verdict.LOST
        if _authentic(world, m2.cert, r1.value, m2.signature, now):
            return Verdict.DENY_AUTH  # the user walks away from an unauthenticated place
        m3 = _hop(world, u.addr, p.addr, Step.ACCESS_3, AuthMessage(u.cert, sign(u.sk, m2.nonce.value)))
        if m3 is None:
            return Verdict.LOST

        if _authentic(world, m3.cert, r2.value, m3.signature, now):
            verdict = Verdict.DENY_AUTH
        else:
            st = _ledger_query(world, p.addr, m3.cert.subject, Step.ACCESS_4, Step.ACCESS_STATUS)
            if st is None:
                return Verdict.LOST
            verdict = {LedgerStatus.NOT_FOUND: Verdict.ADMIT, LedgerStatus.INFECTED: Verdict.DENY_INFECTED,
                       LedgerStatus.CLOSE_CONTACT: Verdict.DENY_CLOSE_CONTACT}[st]
        if _hop(world, p.addr, u.addr, Step.ACCESS_5, ByteMessage(int(verdict))) is None:
            return Verdict.LOST
        if verdict != Verdict.ADMIT:
            p.denied[verdict.name] = p.denied.get(verdict.name, 0) + 1
            return verdict
        p.admitted += 1

        visitor = m3.cert
        msg_p = ProofMessage(visitor.subject, now, p.location)
        m5 = _hop(world, p.addr, u.addr, Step.VISIT_5, SignedProof(msg_p, sign(p.sk, msg_p.to_bytes())))
        if m5 is not None and verify(m2.cert.subject, m5.message.to_bytes(), m5.signature):
            u.store(ContactRecord(m5.message, m2.cert), m5.signature, now)
        msg_u = ProofMessage(m2.cert.subject, now, p.location)
        m6 = _hop(world, u.addr, p.addr, Step.VISIT_6, SignedProof(msg_u, sign(u.sk, msg_u.to_bytes())))
        if m6 is not None and verify(visitor.subject, m6.message.to_bytes(), m6.signature):
            p.log_visit(Visit(m6.message, visitor, m6.signature))
    return verdict


@dataclass
class TestOutcome:
    result: TestResult | None
    reason: Abort | None = None
    upload: "UploadPlan | None" = None


def run_test(world, u: UserActor, ha: HealthAuthorityActor, positive: bool) -> TestOutcome:
    """Authenticated testing session; the signed result becomes tracing evidence."""
    now = world.sim.now
    with COUNTER.in_phase("tracing"):
        nonce = Nonce.random(world.rng)
        m1 = _hop(world, ha.addr, u.addr, Step.TEST_NONCE, NonceMessage(nonce))
        if m1 is None:
            return TestOutcome(None, Abort.LOST)
        m2 = _hop(world, u.addr, ha.addr, Step.TEST_AUTH, AuthMessage(u.cert, sign(u.sk, m1.nonce.value)))
        if m2 is None:
            return TestOutcome(None, Abort.LOST)
        # blocked users keep an expired certificate, and they still need testing
        bad = _authentic(world, m2.cert, nonce.value, m2.signature, now, allow_expired=True)
        if bad:
            return TestOutcome(None, bad)
        key = m2.cert.subject
        result = TestResult(key, positive, now, ha.index, sign(ha.sk, signed_test_bytes(key, positive, now, ha.index)))
        if _hop(world, ha.addr, u.addr, Step.TEST_RESULT, result) is None:
            return TestOutcome(None, Abort.LOST)
        ha.receive(Evidence(Kind.TEST, result))
    if positive:
        u.health = Health.INFECTED
        return TestOutcome(result, upload=report_infection(world, u, ha))
    u.health = Health.RECOVERED if u.health != Health.HEALTHY else Health.HEALTHY
    return TestOutcome(result)


@dataclass
class UploadPlan:
    times: list[int] = field(default_factory=list)
    sizes: list[int] = field(default_factory=list)
    sent: int = 0
    purged: int = 0

    @property
    def total_bytes(self) -> int:
        return sum(self.sizes)


def group_message(g: RecordGroup):
    if g.aggregate is not None:
        return Step.UPLOAD, GroupUpload(tuple((r.message, r.cert) for r in g.records), g.aggregate)
    return Step.UPLOAD_BASELINE, BaselineUpload(tuple((r.message, r.signature, r.cert) for r in g.records))


def report_infection(world, u: UserActor, ha: HealthAuthorityActor) -> UploadPlan:
    """Send every stored group to ``ha``, each at its own random time in the jitter window."""
    now = world.sim.now
    u.seal()
    u.purge(now)
    groups = [g for g in u.groups if g.records]
    u.groups = []
    plan = UploadPlan()
    if not groups:
        return plan
    rng = random.Random(f"upload:{world.seed}:{u.index}:{now}")
    lo, hi = now + SETTLE_MS, now + max(world.cfg.upload_jitter_ms, SETTLE_MS + len(groups))
    times = rng.sample(range(lo, hi + 1), len(groups))
    for g, t in zip(groups, times):
        step, msg = group_message(g)
        plan.times.append(t)
        plan.sizes.append(len(msg.payload()))
        world.sim.schedule(t, _send_group, world, u, g, ha, plan)
    return plan


def _send_group(world, u: UserActor, g: RecordGroup, ha: HealthAuthorityActor, plan: UploadPlan) -> None:
    if g.oldest < world.sim.now - world.cfg.window_ms:
        plan.purged += 1  # aged out while waiting
        return
    step, msg = group_message(g)
    world.sim.send(u.addr, ha.addr, Frame(step, msg).encode())
    plan.sent += 1


def renew_credentials(world, u: UserActor):
    """Ask the KDC for a fresh credential; returns the new certificate, or None."""
    now = world.sim.now
    with COUNTER.in_phase("credentials"):
        req = RenewRequest(u.pk, sign(u.sk, renewal_message(u.pk, now)))
        m = _hop(world, u.addr, KDC_ADDR, Step.RENEW_REQUEST, req)
        if m is None:
            return None
        grant = world.kdc.renew(m, now)
        if grant is None:
            _hop(world, KDC_ADDR, u.addr, Step.RENEW_REFUSED, ByteMessage(1))
            u.renewals_refused += 1
            return None
        g = _hop(world, KDC_ADDR, u.addr, Step.RENEW_GRANT, grant)
        if g is None:
            return None
        u.install(PrivateKey.from_bytes(g.secret), g.cert)
    return g.cert


def resolve_latest_keys(world, ha: HealthAuthorityActor, keys, seed: int):
    """Newest key for each input key (input order kept); None if the exchange failed.

    The KDC sees only the bare keys, in an order shuffled by ``seed``.
    """
    raw = [k if isinstance(k, bytes) else k.to_bytes() for k in keys]
    order = list(range(len(raw)))
    random.Random(seed).shuffle(order)
    with COUNTER.in_phase("status"):
        res = ha._resolve([raw[i] for i in order])
    if res is None:
        return None
    reply, _ = res
    out = [None] * len(raw)
    for pos, i in enumerate(order):
        out[i] = reply[pos]
    return out


def check_status(world, u: UserActor) -> LedgerStatus | None:
    with COUNTER.in_phase("status"):
        return _ledger_query(world, u.addr, u.pk, Step.STATUS_5_1, Step.STATUS_REPLY)


def check_zone(world, u: UserActor, zone_id: int):
    with COUNTER.in_phase("status"):
        gw = world.gateway
        q = _hop(world, u.addr, gw.addr, Step.STATUS_5_2, ZoneQuery(zone_id))
        if q is None:
            return None
        rec = gw.zone(q.zone_id)
        if rec is None:
            return None
        r = _hop(world, gw.addr, u.addr, Step.ZONE_REPLY, ZoneReply(rec))
        return None if r is None else r.record


def run_status_update(world):
    """Have the current leader start an update now; returns its entry or None."""
    leader = world.leader()
    if leader is None:
        return None
    with COUNTER.in_phase("status"):
        return leader.run_status_update()
