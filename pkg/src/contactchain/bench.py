"""Measured counterparts of the closed-form figure series.

Byte counts come from real encoded frames and blocks, pairing counts from
the operation counter during real verification.  ``wall_clock`` times the
primitives on this machine; it is informational only.
"""

from __future__ import annotations

import hashlib
import random
import time

from .bloom import BloomFilter, predict_fp
from .crypto import aggregate, aggregate_verify, issue_certificate, keygen, sign, verify
from .ledger import build_status_block
from .metrics import (default_group_size, group_sizes, model_agg_verify_time, model_verify_time, status_block_bytes,
                      upload_bytes)
from .opcount import COUNTER
from .simnet import DAY, MINUTE
from .wire import ContactRecord, Location, ProofMessage, encode_tracing_upload


class _Signers:
    """A small pool of credentialed signers; records cycle through it."""

    def __init__(self, seed: int, size: int = 16):
        kdc_sk, _ = keygen(seed=hashlib.sha224(b"bench-kdc%d" % seed).digest())
        self.people = []
        for i in range(size):
            sk, pk = keygen(seed=hashlib.sha224(b"bench-signer%d-%d" % (seed, i)).digest())
            self.people.append((sk, issue_certificate(kdc_sk, pk, 0, 15 * DAY)))
        self.loc = Location.from_degrees(1.0, 2.0)

    def records(self, holder, n: int):
        """``n`` records as stored by ``holder``, each with its individual signature."""
        out = []
        for i in range(n):
            sk, cert = self.people[i % len(self.people)]
            msg = ProofMessage(holder, (i + 1) * MINUTE, self.loc)
            out.append(ContactRecord(msg, cert, sign(sk, msg.to_bytes())))
        return out


def measure_uploads(ns, seed: int = 0) -> list[dict]:
    """Encoded upload bytes for N records split into ceil(N/M) groups, both modes."""
    pool = _Signers(seed)
    _, holder = keygen(seed=hashlib.sha224(b"bench-holder%d" % seed).digest())
    recs = pool.records(holder, max(ns))
    rows = []
    for n in ns:
        m = default_group_size(n)
        agg = base = off = 0
        for g in group_sizes(n, m):
            part = recs[off:off + g]
            off += g
            agg += len(encode_tracing_upload(part, aggregate([r.signature for r in part])))
            base += len(encode_tracing_upload(part))
        rows.append({"N": n, "M": m, "groups": len(group_sizes(n, m)),
                     "with_aggregation": agg, "formula_with": upload_bytes(n, m),
                     "without_aggregation": base, "formula_without": upload_bytes(n, m, False),
                     "reduction": round(1 - agg / base, 6)})
    return rows


def measure_verification(ns, seed: int = 0) -> list[dict]:
    """Pairings actually evaluated while verifying N records, with and without aggregation."""
    pool = _Signers(seed)
    _, holder = keygen(seed=hashlib.sha224(b"bench-holder%d" % seed).digest())
    recs = pool.records(holder, max(ns))
    rows = []
    for n in ns:
        m = default_group_size(n)
        before = COUNTER.get("pairing", "bench")
        off, ok = 0, True
        with COUNTER.in_phase("bench"):
            for g in group_sizes(n, m):
                part = recs[off:off + g]
                off += g
                ok &= aggregate_verify([r.signer for r in part], [r.message.to_bytes() for r in part],
                                       aggregate([r.signature for r in part]))
            with_agg = COUNTER.get("pairing", "bench") - before
            for r in recs[:n]:
                ok &= verify(r.signer, r.message.to_bytes(), r.signature)
            without = COUNTER.get("pairing", "bench") - before - with_agg
        t_with = sum(model_agg_verify_time(g) for g in group_sizes(n, m))
        t_without = n * model_verify_time()
        rows.append({"N": n, "M": m, "all_valid": ok, "pairings_with": with_agg, "pairings_without": without,
                     "with_aggregation_ms": round(t_with, 6), "without_aggregation_ms": round(t_without, 6),
                     "reduction": round(1 - t_with / t_without, 6)})
    return rows


def _pseudo_keys(n: int, tag: bytes) -> list[bytes]:
    # block sizes depend only on key counts, so hashed stand-ins replace real keys
    return [hashlib.sha224(tag + i.to_bytes(4, "big")).digest() + b"\x00" for i in range(n)]


def measure_status_blocks(ns, seed: int = 0) -> list[dict]:
    """Serialized StatusBlock sizes with filters and with raw keys."""
    sk, _ = keygen(seed=hashlib.sha224(b"bench-leader%d" % seed).digest())
    rows = []
    for n in ns:
        n1, n2 = n // 2, n - n // 2
        inf, sus = _pseudo_keys(n1, b"i%d" % seed), _pseudo_keys(n2, b"s%d" % seed)
        a = len(build_status_block(None, inf, sus, sk, 0, 0, True).to_bytes())
        b = len(build_status_block(None, inf, sus, sk, 0, 0, False).to_bytes())
        rows.append({"N": n, "N1": n1, "N2": n2, "with_bloom": a, "formula_with": status_block_bytes(n1, n2),
                     "without_bloom": b, "formula_without": status_block_bytes(n1, n2, False),
                     "reduction": round(1 - a / b, 6)})
    return rows


def monte_carlo_fp(n: int, probes: int, seed: int = 0, filters: int = 1, k: int = 5,
                   bits_per_key: int = 10) -> dict:
    """Empirical false-positive rate over ``filters`` independent filters of ``n`` members each."""
    rng = random.Random(seed)
    m = bits_per_key * n
    hits = 0
    per = probes // filters
    total = per * filters
    for _ in range(filters):
        f = BloomFilter(m, k)
        for _ in range(n):
            f.add(rng.randbytes(29))
        # probes are fresh random strings, never members
        hits += sum(rng.randbytes(29) in f for _ in range(per))
    p = predict_fp(m, k, n)
    rate = hits / total
    se = (p * (1 - p) / total) ** 0.5
    return {"n": n, "m": m, "k": k, "probes": total, "filters": filters, "empirical": rate, "analytic": p,
            "std_error": se, "z": (rate - p) / se}


def wall_clock(reps: int = 5) -> list[dict]:
    """Median wall time (ms) of the primitives on this machine."""
    sk, pk = keygen(seed=b"wall-clock")
    sig = sign(sk, b"bench")
    cases = {
        "sign": lambda: sign(sk, b"bench"),
        "verify": lambda: verify(pk, b"bench", sig),
        "aggregate_verify_M10": None,
    }
    sigs, pks, msgs = [], [], []
    for i in range(10):
        s, p = keygen(seed=b"wall-%d" % i)
        msgs.append(b"m%d" % i)
        sigs.append(sign(s, msgs[-1]))
        pks.append(p)
    agg = aggregate(sigs)
    cases["aggregate_verify_M10"] = lambda: aggregate_verify(pks, msgs, agg)
    rows = []
    for name, fn in cases.items():
        times = []
        for _ in range(reps):
            t = time.perf_counter()
            fn()
            times.append((time.perf_counter() - t) * 1000)
        times.sort()
        rows.append({"operation": name, "median_ms": round(times[len(times) // 2], 3), "reps": reps})
    return rows
