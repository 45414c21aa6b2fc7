"""Key distribution centre: issues short-term credentials and links them to identities.

The KDC is the only party that can map a short-term key back to its owner.
It refuses renewal to anyone whose latest key is listed on the status
ledger, so blocking follows the committed ledger state.
"""

from __future__ import annotations

import random
from typing import Callable

from ..crypto import Certificate, PrivateKey, PublicKey, Signature, issue_certificate, keygen, sign, verify
from ..ledger import Chain, LedgerStatus, query_status
from ..wire import NOT_FOUND_KEY, RenewGrant, RenewRequest, encode_time
from .config import ProtocolConfig


PLACE_PREFIX = "place:"


def renewal_message(key: PublicKey, now: int) -> bytes:
    return b"RENEW" + key.to_bytes() + encode_time(now)


def resolution_message(request: bytes, reply: bytes) -> bytes:
    return b"RESOLVE" + request + reply


class KdcActor:
    def __init__(self, cfg: ProtocolConfig, rng: random.Random):
        self.cfg = cfg
        self.rng = rng
        self.sk, self.pk = keygen(seed=rng.randbytes(32))
        self.chains: dict[str, list[PublicKey]] = {}
        self.owner: dict[bytes, str] = {}
        self.ledger_view: Callable[[], Chain | None] = lambda: None
        self.refused = 0
        self.issued = 0

    def _issue(self, identity: str, not_before: int, not_after: int) -> tuple[PrivateKey, Certificate]:
        sk, pk = keygen(seed=self.rng.randbytes(32))
        cert = issue_certificate(self.sk, pk, not_before, not_after)
        self.chains.setdefault(identity, []).append(pk)
        self.owner[pk.to_bytes()] = identity
        self.issued += 1
        return sk, cert

    def enroll(self, identity: str, now: int) -> tuple[PrivateKey, Certificate]:
        """In-person enrolment; happens outside the simulated network."""
        if identity in self.chains or identity.startswith(PLACE_PREFIX):
            raise ValueError(f"cannot enrol {identity!r}")
        return self._issue(identity, now, self.cfg.epoch_end(now))

    def enroll_place(self, name: str, now: int) -> tuple[PrivateKey, Certificate]:
        return self._issue(PLACE_PREFIX + name, now, now + self.cfg.place_validity_ms)

    def latest(self, identity: str) -> PublicKey:
        return self.chains[identity][-1]

    def is_blocked(self, identity: str) -> bool:
        chain = self.ledger_view()
        if chain is None or not chain.blocks:
            return False
        return query_status(chain, self.latest(identity)) != LedgerStatus.NOT_FOUND

    def renew(self, req: RenewRequest, now: int) -> RenewGrant | None:
        """Grant a fresh credential, or None when refused."""
        # any key of the chain may ask, so a grant lost in transit is recoverable
        identity = self.owner.get(req.key.to_bytes())
        if identity is None or identity.startswith(PLACE_PREFIX):
            self.refused += 1
            return None
        if not verify(req.key, renewal_message(req.key, now), req.signature):
            self.refused += 1
            return None
        if self.is_blocked(identity):
            self.refused += 1
            return None
        sk, cert = self._issue(identity, now, self.cfg.epoch_end(now))
        return RenewGrant(sk.to_bytes(), cert)

    def resolve(self, keys: list[bytes]) -> list[bytes]:
        """Newest key of each key's owner, position for position; zeros when unknown."""
        out = []
        for k in keys:
            ident = self.owner.get(k)
            out.append(self.latest(ident).to_bytes() if ident is not None else NOT_FOUND_KEY)
        return out

    def attest(self, request: bytes, reply: bytes) -> Signature:
        return sign(self.sk, resolution_message(request, reply))
