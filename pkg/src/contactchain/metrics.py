"""Byte, operation, and storage accounting.

Computation is modelled: operation counts multiplied by per-operation cost
constants (milliseconds).  Byte counts come straight from frame payloads.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields
from typing import Iterable, Mapping

from .bloom import DEFAULT_K, predict_fp
from .ledger import HEADER_BYTES, Chain, status_body_size
from .opcount import OPS
from .raft import decode_message
from .simnet import Trace
from .wire import (BASELINE_RECORD_BYTES, KEY_BYTES, PHASE_OF, RECORD_BYTES, SIG_BYTES, TABLE_STEPS,
                   ZONE_RECORD_BYTES, Step, counted_size)


@dataclass(frozen=True)
class CostModel:
    """Per-operation times in milliseconds."""

    pairing: float = 3.139
    hash: float = 0.058
    add: float = 0.000227
    mul: float = 0.000269
    exp: float = 0.334

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"cost of {f.name} must be positive")

    def time_of(self, counts: Mapping[str, int]) -> float:
        return sum(getattr(self, op) * n for op, n in counts.items())


DEFAULT_COSTS = CostModel()


def model_sign_time(cm: CostModel = DEFAULT_COSTS) -> float:
    return cm.hash + cm.mul


def model_verify_time(cm: CostModel = DEFAULT_COSTS) -> float:
    return 2 * cm.pairing


def model_agg_verify_time(m: int, cm: CostModel = DEFAULT_COSTS) -> float:
    if m < 1:
        raise ValueError("aggregate needs at least one signature")
    return (m + 1) * cm.pairing


def model_bloom_ops(step: str, n_keys: int = 0, k: int = DEFAULT_K, cm: CostModel = DEFAULT_COSTS) -> float:
    """``query``: one membership test; ``build``: inserting ``n_keys`` keys."""
    if step == "query":
        return k * cm.hash
    if step == "build":
        return k * cm.hash * n_keys
    raise ValueError(f"unknown Bloom step {step!r}")


def contact_step_times(cm: CostModel = DEFAULT_COSTS) -> dict:
    auth = model_sign_time(cm) + 2 * model_verify_time(cm)  # one signature; certificate and signature checks
    proof = model_sign_time(cm) + model_verify_time(cm)
    q = model_bloom_ops("query", cm=cm)
    return {1: 0.0, 2: auth, 3: auth, 4.1: q, 4.2: q, 5: proof, 6: proof}


def access_step_times(cm: CostModel = DEFAULT_COSTS) -> dict:
    auth = model_sign_time(cm) + 2 * model_verify_time(cm)
    return {1: 0.0, 2: auth, 3: auth, 4: model_bloom_ops("query", cm=cm), 5: 0.0}


def status_step_times(n1: int, n2: int, cm: CostModel = DEFAULT_COSTS) -> dict:
    return {1: 0.0, 2: 0.0, 3: model_bloom_ops("build", n1 + n2, cm=cm), 4: 0.0,
            5.1: model_bloom_ops("query", cm=cm), 5.2: 0.0}


# ---- closed forms -------------------------------------------------------------------

def default_group_size(n: int, days: int = 14) -> int:
    return max(1, math.ceil(n / days))


def group_sizes(n: int, m: int) -> list[int]:
    """Split ``n`` records into ceil(n/m) groups of at most ``m``."""
    if m < 1:
        raise ValueError("group size must be positive")
    full, rest = divmod(n, m)
    return [m] * full + ([rest] if rest else [])


def upload_bytes(n: int, m: int, aggregation: bool = True) -> int:
    if not aggregation:
        return BASELINE_RECORD_BYTES * n
    return sum(RECORD_BYTES * g + SIG_BYTES for g in group_sizes(n, m))


def tracing_verify_time(n: int, m: int, aggregation: bool = True, cm: CostModel = DEFAULT_COSTS) -> float:
    if not aggregation:
        return n * model_verify_time(cm)
    return sum(model_agg_verify_time(g, cm) for g in group_sizes(n, m))


def status_block_bytes(n1: int, n2: int, bloom: bool = True) -> int:
    return HEADER_BYTES + status_body_size(n1, n2, bloom)


def zone_block_bytes(z: int) -> int:
    return HEADER_BYTES + ZONE_RECORD_BYTES * z


def group_storage_bytes(m: int, aggregation: bool = True) -> int:
    if m == 0:
        return 0
    return RECORD_BYTES * m + SIG_BYTES if aggregation else BASELINE_RECORD_BYTES * m


def reduction(new: float, old: float) -> float:
    return 1 - new / old


# ---- figure series --------------------------------------------------------------------

def figure6_series(ns: Iterable[int] = range(50, 301, 50)) -> list[dict]:
    rows = []
    for n in ns:
        m = default_group_size(n)
        a, b = upload_bytes(n, m), upload_bytes(n, m, False)
        rows.append({"N": n, "M": m, "groups": len(group_sizes(n, m)), "with_aggregation": a,
                     "without_aggregation": b, "reduction": round(reduction(a, b), 6)})
    return rows


def figure7_series(ns: Iterable[int] = (1000, 3000, 5000, 7000), ratios: Iterable[int] = range(1, 21),
                   k: int = DEFAULT_K) -> list[dict]:
    ratios = list(ratios)
    return [{"n": n, "m": r * n, "bits_per_key": r, "fp": predict_fp(r * n, k, n)} for n in ns for r in ratios]


def figure8_series(ns: Iterable[int] = range(50, 301, 50), cm: CostModel = DEFAULT_COSTS) -> list[dict]:
    rows = []
    for n in ns:
        m = default_group_size(n)
        a, b = tracing_verify_time(n, m, True, cm), tracing_verify_time(n, m, False, cm)
        rows.append({"N": n, "M": m, "pairings_with": sum(g + 1 for g in group_sizes(n, m)),
                     "pairings_without": 2 * n, "with_aggregation_ms": round(a, 6),
                     "without_aggregation_ms": round(b, 6), "reduction": round(reduction(a, b), 6)})
    return rows


def figure9_series(ns: Iterable[int] = range(1000, 10001, 1000)) -> list[dict]:
    rows = []
    for n in ns:
        n1, n2 = n // 2, n - n // 2
        a, b = status_block_bytes(n1, n2), status_block_bytes(n1, n2, False)
        rows.append({"N": n, "N1": n1, "N2": n2, "with_bloom": a, "without_bloom": b,
                     "reduction": round(reduction(a, b), 6)})
    return rows


def table_rows(cm: CostModel = DEFAULT_COSTS, v: int = 10, n1: int = 3500, n2: int = 3500, z: int = 100) -> list[dict]:
    """Message sizes and modelled step times, one row per protocol step."""
    rows = []
    sizes = {1: 5, 2: 154, 3: 149, 4.1: KEY_BYTES, 4.2: KEY_BYTES, 5: 99, 6: 99}
    for s, t in contact_step_times(cm).items():
        rows.append({"phase": "contact", "step": s, "bytes": sizes[s], "ms": round(t, 6)})
    st = status_step_times(n1, n2, cm)
    ssz = {1: KEY_BYTES * v, 2: KEY_BYTES * v, 3: status_body_size(n1, n2), 4: ZONE_RECORD_BYTES * z, 5.1: KEY_BYTES,
           5.2: 2}
    for s, t in st.items():
        rows.append({"phase": "status", "step": s, "bytes": ssz[s], "ms": round(t, 6)})
    asz = {1: 5, 2: 154, 3: 149, 4: KEY_BYTES, 5: 0}
    for s, t in access_step_times(cm).items():
        rows.append({"phase": "access", "step": s, "bytes": asz[s], "ms": round(t, 6)})
    return rows


# ---- reports over a simulated run ---------------------------------------------------------

@dataclass
class CommReport:
    steps: dict = field(default_factory=dict)  # step name -> [frames, counted bytes]
    phases: dict = field(default_factory=dict)  # phase -> counted bytes of table steps
    other: dict = field(default_factory=dict)  # phase -> bytes of frames outside the tables
    status_filters: int = 0  # step 3 bytes carried by proposals
    status_zones: int = 0  # step 4 bytes carried by proposals
    proposals: int = 0

    def rows(self) -> list[dict]:
        out = [{"section": "step", "key": k, "frames": v[0], "bytes": v[1]} for k, v in sorted(self.steps.items())]
        out += [{"section": "phase", "key": k, "frames": "", "bytes": v} for k, v in sorted(self.phases.items())]
        out += [{"section": "other", "key": k, "frames": "", "bytes": v} for k, v in sorted(self.other.items())]
        out.append({"section": "status", "key": "step3_filters", "frames": self.proposals, "bytes": self.status_filters})
        out.append({"section": "status", "key": "step4_zones", "frames": self.proposals, "bytes": self.status_zones})
        return out


def comm_report(trace: Trace, table_mode: bool = True) -> CommReport:
    """Per-step and per-phase payload bytes of every frame sent during a run."""
    from .actors.evidence import UpdateEntry  # local import: actors depend on this module's siblings

    rep = CommReport()
    for rec in trace:
        if not rec.frame:
            continue
        step = Step(rec.frame[0])
        size = counted_size(step, len(rec.frame) - 1, table_mode)
        cell = rep.steps.setdefault(step.name, [0, 0])
        cell[0] += 1
        cell[1] += size
        phase = PHASE_OF[step]
        bucket = rep.phases if step in TABLE_STEPS else rep.other
        bucket[phase] = bucket.get(phase, 0) + size
        if step == Step.RAFT_PROPOSE:
            try:
                entry = UpdateEntry.decode(decode_message(step, rec.frame[1:]).data)
            except ValueError:
                continue
            rep.proposals += 1
            rep.status_filters += len(entry.status_block) - HEADER_BYTES
            rep.status_zones += len(entry.zone_block) - HEADER_BYTES
    return rep


@dataclass
class OpsReport:
    counts: dict  # phase -> {op: n}
    times: dict  # phase -> modelled ms

    def rows(self) -> list[dict]:
        return [{"phase": p, **{op: c.get(op, 0) for op in OPS}, "modelled_ms": round(self.times[p], 6)}
                for p, c in sorted(self.counts.items())]


def ops_report(snapshot: Mapping[tuple[str, str], int], cm: CostModel = DEFAULT_COSTS) -> OpsReport:
    counts: dict = {}
    for (phase, op), n in snapshot.items():
        counts.setdefault(phase, {})[op] = n
    return OpsReport(counts, {p: cm.time_of(c) for p, c in counts.items()})


@dataclass
class StorageReport:
    user_bytes: dict  # label -> on-device bytes
    user_baseline_bytes: dict  # same records with individual signatures
    status_chain_bytes: int
    status_chain_baseline_bytes: int  # same key sets stored raw
    zone_chain_bytes: int

    def rows(self) -> list[dict]:
        out = [{"item": f"user:{k}", "bytes": v, "baseline_bytes": self.user_baseline_bytes[k]}
               for k, v in sorted(self.user_bytes.items())]
        out.append({"item": "status_chain", "bytes": self.status_chain_bytes,
                    "baseline_bytes": self.status_chain_baseline_bytes})
        out.append({"item": "zone_chain", "bytes": self.zone_chain_bytes, "baseline_bytes": self.zone_chain_bytes})
        return out


def storage_report(status_chain: Chain | None, zone_chain: Chain | None, users: Mapping[str, object] = {}) -> StorageReport:
    """On-device and on-chain bytes, alongside the no-aggregation / no-filter equivalents."""
    ub, ubb = {}, {}
    for label, u in users.items():
        ub[label] = sum(g.storage_bytes() for g in u.groups)
        ubb[label] = sum(group_storage_bytes(len(g), False) for g in u.groups)
    sb = status_chain.storage_bytes() if status_chain else 0
    sbb = sum(status_block_bytes(*b.header.shape, bloom=False) for b in status_chain.blocks) if status_chain else 0
    zb = zone_chain.storage_bytes() if zone_chain else 0
    return StorageReport(ub, ubb, sb, sbb, zb)


@dataclass
class OverheadReport:
    comm: CommReport
    ops: OpsReport
    storage: StorageReport
    fp_events: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "key", "frames", "bytes"])
        for r in self.comm.rows():
            w.writerow([f"comm.{r['section']}", r["key"], r["frames"], r["bytes"]])
        w.writerow(["ops.phase", *OPS, "modelled_ms"])
        for r in self.ops.rows():
            w.writerow([f"ops.{r['phase']}", *[r[o] for o in OPS], f"{r['modelled_ms']:.6f}"])
        w.writerow(["storage.item", "bytes", "baseline_bytes"])
        for r in self.storage.rows():
            w.writerow([f"storage.{r['item']}", r["bytes"], r["baseline_bytes"]])
        w.writerow(["bloom.fp_events", self.fp_events])
        return buf.getvalue()


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()
