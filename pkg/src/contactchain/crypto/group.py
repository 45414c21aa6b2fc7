"""Supersingular curve y^2 = x^3 + x over F_p with a symmetric (Type-1) Tate pairing.

p = 4q - 1 with q prime, so the curve has p + 1 = 4q points and embedding
degree 2.  The distortion map phi(x, y) = (-x, i*y), with i^2 = -1 in
F_p2 = F_p[i], sends the order-q subgroup to a linearly independent one,
which makes e(P, Q) = t(P, phi(Q)) non-degenerate on G x G.

Points are affine tuples ``(x, y)``; ``None`` is the point at infinity.
F_p2 elements are tuples ``(a, b)`` meaning a + b*i.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache

from ..opcount import COUNTER

ORDER = 0x3FFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF67F1
P_MOD = 4 * ORDER - 1
COFACTOR = 4
FIELD_BYTES = 28
SCALAR_BYTES = 28
COMPRESSED_BYTES = FIELD_BYTES + 1
POINT_BYTES = 2 * FIELD_BYTES

_p = P_MOD


def is_on_curve(pt) -> bool:
    if pt is None:
        return True
    x, y = pt
    if not (0 <= x < _p and 0 <= y < _p):
        return False
    return (y * y - x * x * x - x) % _p == 0


def neg(pt):
    if pt is None:
        return None
    x, y = pt
    return (x, -y % _p)


def _add(p1, p2):
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    x1, y1 = p1
    x2, y2 = p2
    if x1 == x2:
        if (y1 + y2) % _p == 0:
            return None
        lam = (3 * x1 * x1 + 1) * pow(2 * y1, -1, _p) % _p
    else:
        lam = (y2 - y1) * pow(x2 - x1, -1, _p) % _p
    x3 = (lam * lam - x1 - x2) % _p
    return (x3, (lam * (x1 - x3) - y1) % _p)


def _jac_double(X, Y, Z):
    if Y == 0 or Z == 0:
        return (1, 1, 0)
    YY = Y * Y % _p
    S = 4 * X * YY % _p
    ZZ = Z * Z % _p
    M = (3 * X * X + ZZ * ZZ) % _p  # curve a = 1
    X3 = (M * M - 2 * S) % _p
    Y3 = (M * (S - X3) - 8 * YY * YY) % _p
    Z3 = 2 * Y * Z % _p
    return (X3, Y3, Z3)


def _jac_add_affine(X1, Y1, Z1, x2, y2):
    if Z1 == 0:
        return (x2, y2, 1)
    Z1Z1 = Z1 * Z1 % _p
    U2 = x2 * Z1Z1 % _p
    S2 = y2 * Z1 * Z1Z1 % _p
    H = (U2 - X1) % _p
    r = (S2 - Y1) % _p
    if H == 0:
        if r == 0:
            return _jac_double(X1, Y1, Z1)
        return (1, 1, 0)
    HH = H * H % _p
    HHH = H * HH % _p
    V = X1 * HH % _p
    X3 = (r * r - HHH - 2 * V) % _p
    Y3 = (r * (V - X3) - Y1 * HHH) % _p
    Z3 = Z1 * H % _p
    return (X3, Y3, Z3)


def _mul(k: int, pt):
    if pt is None or k == 0:
        return None
    if k < 0:
        return _mul(-k, neg(pt))
    x, y = pt
    X, Y, Z = 1, 1, 0
    for bit in bin(k)[2:]:
        X, Y, Z = _jac_double(X, Y, Z)
        if bit == "1":
            X, Y, Z = _jac_add_affine(X, Y, Z, x, y)
    if Z == 0:
        return None
    zi = pow(Z, -1, _p)
    zi2 = zi * zi % _p
    return (X * zi2 % _p, Y * zi2 * zi % _p)


def add(p1, p2):
    COUNTER.bump("add")
    return _add(p1, p2)


def mul(k: int, pt):
    COUNTER.bump("mul")
    return _mul(k, pt)


def in_subgroup(pt) -> bool:
    return is_on_curve(pt) and _mul(ORDER, pt) is None


def _sqrt(a: int) -> int | None:
    r = pow(a, (_p + 1) // 4, _p)
    return r if r * r % _p == a % _p else None


def hash_to_point(msg: bytes):
    """Try-and-increment map: SHA-224 expand to an x, lift, clear the cofactor."""
    COUNTER.bump("hash")
    return _hash_to_point(bytes(msg))


@lru_cache(maxsize=65536)
def _hash_to_point(msg: bytes):
    ctr = 0
    while True:
        c = ctr.to_bytes(4, "big")
        d = hashlib.sha224(b"H2G0" + c + msg).digest() + hashlib.sha224(b"H2G1" + c + msg).digest()
        x = int.from_bytes(d, "big") % _p
        y = _sqrt((x * x * x + x) % _p)
        if y is not None and y != 0:
            if d[0] & 1:
                y = _p - y
            pt = _mul(COFACTOR, (x, y))
            if pt is not None:
                return pt
        ctr += 1


GENERATOR = _hash_to_point(b"contactchain generator")


# ---- F_p2 arithmetic -------------------------------------------------------

def f2_mul(a, b):
    a0, a1 = a
    b0, b1 = b
    return ((a0 * b0 - a1 * b1) % _p, (a0 * b1 + a1 * b0) % _p)


def f2_sqr(a):
    a0, a1 = a
    return ((a0 + a1) * (a0 - a1) % _p, 2 * a0 * a1 % _p)


def f2_inv(a):
    a0, a1 = a
    d = pow(a0 * a0 + a1 * a1, -1, _p)
    return (a0 * d % _p, -a1 * d % _p)


def f2_pow(a, e: int):
    r = (1, 0)
    for bit in bin(e)[2:]:
        r = f2_sqr(r)
        if bit == "1":
            r = f2_mul(r, a)
    return r


GT_ONE = (1, 0)


def _miller(P, Q):
    xp, yp = P
    xq, yq = Q
    X, Y, Z = xp, yp, 1
    f0, f1 = 1, 0
    # T is kept in Jacobian form; each line is scaled by an F_p factor, and
    # F_p factors (vertical lines included) die in the final exponentiation.
    # Lines are evaluated at phi(Q) = (-xq, i*yq).
    for bit in bin(ORDER)[3:]:
        YY = Y * Y % _p
        ZZ = Z * Z % _p
        M = (3 * X * X + ZZ * ZZ) % _p
        l0 = (M * (xq * ZZ + X) - 2 * YY) % _p
        Z3 = 2 * Y * Z % _p
        l1 = Z3 * ZZ % _p * yq % _p
        a0, a1 = (f0 + f1) * (f0 - f1) % _p, 2 * f0 * f1 % _p
        f0, f1 = (a0 * l0 - a1 * l1) % _p, (a0 * l1 + a1 * l0) % _p
        S = 4 * X * YY % _p
        X3 = (M * M - 2 * S) % _p
        Y = (M * (S - X3) - 8 * YY * YY) % _p
        X, Z = X3, Z3
        if bit == "1":
            ZZ = Z * Z % _p
            ZZZ = ZZ * Z % _p
            H = (xp * ZZ - X) % _p
            r = (yp * ZZZ - Y) % _p
            if H == 0:
                break  # T = -P on the last bit: vertical line
            l0 = (r * (xq * ZZ + X) - Y * H) % _p
            l1 = yq * ZZZ % _p * H % _p
            f0, f1 = (f0 * l0 - f1 * l1) % _p, (f0 * l1 + f1 * l0) % _p
            HH = H * H % _p
            HHH = H * HH % _p
            V = X * HH % _p
            X3 = (r * r - HHH - 2 * V) % _p
            Y = (r * (V - X3) - Y * HHH) % _p
            X, Z = X3, Z * H % _p
    return (f0, f1)


def pairing(P, Q):
    """Reduced pairing e(P, Q) in the order-q subgroup of F_p2*."""
    COUNTER.bump("pairing")
    if P is None or Q is None:
        return GT_ONE
    f = _miller(P, Q)
    # f^(p-1) = conj(f)/f, then raise to (p+1)/q = 4
    f = f2_mul((f[0], -f[1] % _p), f2_inv(f))
    return f2_pow(f, COFACTOR)


def gt_pow(a, e: int):
    COUNTER.bump("exp")
    return f2_pow(a, e % ORDER)


# ---- encodings ---------------------------------------------------------------

def encode_scalar(x: int) -> bytes:
    return x.to_bytes(SCALAR_BYTES, "big")


def decode_scalar(data: bytes) -> int:
    if len(data) != SCALAR_BYTES:
        raise ValueError(f"scalar must be {SCALAR_BYTES} bytes, got {len(data)}")
    return int.from_bytes(data, "big")


def compress(pt) -> bytes:
    if pt is None:
        return bytes(COMPRESSED_BYTES)
    x, y = pt
    return bytes([2 | (y & 1)]) + x.to_bytes(FIELD_BYTES, "big")


@lru_cache(maxsize=65536)
def decompress(data: bytes):
    """Inverse of :func:`compress`; validates curve and subgroup membership."""
    if len(data) != COMPRESSED_BYTES:
        raise ValueError(f"compressed point must be {COMPRESSED_BYTES} bytes")
    if data == bytes(COMPRESSED_BYTES):
        return None
    tag = data[0]
    if tag not in (2, 3):
        raise ValueError("bad point prefix")
    x = int.from_bytes(data[1:], "big")
    if x >= _p:
        raise ValueError("x out of range")
    y = _sqrt((x * x * x + x) % _p)
    if y is None:
        raise ValueError("x not on curve")
    if (y & 1) != (tag & 1):
        y = _p - y
    pt = (x, y)
    if _mul(ORDER, pt) is not None:
        raise ValueError("point outside prime-order subgroup")
    return pt


def encode_point(pt) -> bytes:
    if pt is None:
        return bytes(POINT_BYTES)
    x, y = pt
    return x.to_bytes(FIELD_BYTES, "big") + y.to_bytes(FIELD_BYTES, "big")


@lru_cache(maxsize=65536)
def decode_point(data: bytes):
    # (0, 0) has order 2, so the all-zero string is free to denote infinity
    if len(data) != POINT_BYTES:
        raise ValueError(f"point must be {POINT_BYTES} bytes")
    if data == bytes(POINT_BYTES):
        return None
    pt = (int.from_bytes(data[:FIELD_BYTES], "big"), int.from_bytes(data[FIELD_BYTES:], "big"))
    if not in_subgroup(pt):
        raise ValueError("point not in group")
    return pt
