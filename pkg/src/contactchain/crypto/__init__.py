from .certificates import CERT_BYTES, Certificate, CertStatus, issue_certificate, validate_certificate
from .group import COMPRESSED_BYTES, GENERATOR, ORDER, P_MOD, POINT_BYTES, SCALAR_BYTES
from .signatures import (
    DEFAULT_PARAMS,
    AggregateSignature,
    GroupParams,
    PrivateKey,
    PublicKey,
    Signature,
    aggregate,
    aggregate_verify,
    keygen,
    sign,
    verify,
)

__all__ = [
    "AggregateSignature", "CERT_BYTES", "COMPRESSED_BYTES", "CertStatus", "Certificate",
    "DEFAULT_PARAMS", "GENERATOR", "GroupParams", "ORDER", "POINT_BYTES", "P_MOD", "PrivateKey",
    "PublicKey", "SCALAR_BYTES", "Signature", "aggregate", "aggregate_verify", "issue_certificate",
    "keygen", "sign", "validate_certificate", "verify",
]
