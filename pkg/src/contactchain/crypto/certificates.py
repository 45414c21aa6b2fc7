"""KDC-issued certificates binding a short-term public key to an expiry time.

Layout (93 bytes): subject key (29) | not_after ms (8, big-endian) | KDC signature (56).
The start of validity is kept in memory only.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .signatures import PrivateKey, PublicKey, Signature, sign, verify

CERT_BYTES = 93


class CertStatus(enum.Enum):
    VALID = "valid"
    EXPIRED = "expired"
    BAD_SIGNATURE = "bad-signature"


def _tbs(subject: PublicKey, not_after: int) -> bytes:
    return b"CERT" + subject.to_bytes() + not_after.to_bytes(8, "big")


@dataclass(frozen=True)
class Certificate:
    subject: PublicKey
    not_after: int
    signature: Signature
    not_before: int = field(default=0, compare=False)

    def to_bytes(self) -> bytes:
        return self.subject.to_bytes() + self.not_after.to_bytes(8, "big") + self.signature.to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Certificate":
        data = bytes(data)
        if len(data) != CERT_BYTES:
            raise ValueError(f"certificate must be {CERT_BYTES} bytes, got {len(data)}")
        return cls(PublicKey.from_bytes(data[:29]), int.from_bytes(data[29:37], "big"),
                   Signature.from_bytes(data[37:]))


def issue_certificate(kdc_sk: PrivateKey, subject_pk: PublicKey, not_before: int, not_after: int) -> Certificate:
    if not not_before < not_after:
        raise ValueError("certificate validity window is empty or inverted")
    return Certificate(subject_pk, not_after, sign(kdc_sk, _tbs(subject_pk, not_after)), not_before)


def validate_certificate(kdc_pk: PublicKey, cert: Certificate, now: int) -> CertStatus:
    """Signature first, then the half-open window [not_before, not_after)."""
    if not verify(kdc_pk, _tbs(cert.subject, cert.not_after), cert.signature):
        return CertStatus.BAD_SIGNATURE
    if not cert.not_before <= now < cert.not_after:
        return CertStatus.EXPIRED
    return CertStatus.VALID
