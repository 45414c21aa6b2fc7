"""Command-line entry point.

    contactchain run <scenario> --out DIR [--seed N] [--no-aggregation] [--no-bloom]
    contactchain verify DIR
    contactchain bench [--wall-clock]

``<scenario>`` is a YAML file or the name of a bundled preset.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from importlib import resources
from pathlib import Path

from . import bench, metrics
from .crypto import PublicKey
from .ledger import BlockError, Chain
from .opcount import COUNTER
from .simnet import Trace
from .world import Scenario, ScenarioError, World

PRESET_SUFFIX = ".yaml"


class CliError(Exception):
    pass


def presets() -> list[str]:
    root = resources.files("contactchain") / "scenarios"
    return sorted(p.name[:-len(PRESET_SUFFIX)] for p in root.iterdir() if p.name.endswith(PRESET_SUFFIX))


def load_scenario(ref: str) -> Scenario:
    path = Path(ref)
    if path.is_file():
        return Scenario.load(path)
    if ref in presets():
        with resources.as_file(resources.files("contactchain") / "scenarios" / (ref + PRESET_SUFFIX)) as p:
            return Scenario.load(p)
    raise ScenarioError(f"scenario file not found: {ref} (bundled presets: {', '.join(presets())})")


def _sha(data: bytes) -> str:
    return hashlib.sha224(data).hexdigest()


def _write(out: Path, files: dict[str, bytes]) -> dict[str, str]:
    out.mkdir(parents=True, exist_ok=True)
    for name, data in files.items():
        (out / name).write_bytes(data)
    return {name: _sha(data) for name, data in sorted(files.items())}


# ---- sweeps (figure presets) --------------------------------------------------------

def _ints(spec, default) -> list[int]:
    if spec is None:
        return list(default)
    if isinstance(spec, dict):
        return list(range(int(spec["start"]), int(spec["stop"]) + 1, int(spec["step"])))
    return [int(x) for x in spec]


def run_sweep(sweep: dict, seed: int) -> dict[str, bytes]:
    fig = str(sweep.get("figure"))
    if fig == "6":
        rows = bench.measure_uploads(_ints(sweep.get("n"), range(50, 301, 50)), seed)
    elif fig == "7":
        rows = metrics.figure7_series(_ints(sweep.get("n"), (1000, 3000, 5000, 7000)),
                                      _ints(sweep.get("bits_per_key"), range(1, 21)))
        mc = sweep.get("monte_carlo")
        if mc:
            mc_rows = [bench.monte_carlo_fp(n, int(mc.get("probes", 100000)), seed, int(mc.get("filters", 100)))
                       for n in _ints(mc.get("n"), (100, 1000))]
            return {"figure7.csv": metrics.rows_to_csv(rows).encode(),
                    "figure7_montecarlo.csv": metrics.rows_to_csv(mc_rows).encode()}
    elif fig == "8":
        rows = bench.measure_verification(_ints(sweep.get("n"), range(50, 301, 50)), seed)
    elif fig == "9":
        rows = bench.measure_status_blocks(_ints(sweep.get("n"), range(1000, 10001, 1000)), seed)
    else:
        raise ScenarioError(f"sweep figure must be one of 6, 7, 8, 9, not {fig!r}")
    return {f"figure{fig}.csv": metrics.rows_to_csv(rows).encode()}


# ---- scripted scenarios ---------------------------------------------------------------

def _derived_rows(trace: Trace, status: Chain, zone: Chain) -> list[list[str]]:
    """Report lines that verify can recompute from the trace and the dumped chains."""
    rep = metrics.comm_report(trace)
    st = metrics.storage_report(status, zone)
    rows = [[f"comm.{r['section']}", str(r["key"]), str(r["frames"]), str(r["bytes"])] for r in rep.rows()]
    rows += [[f"storage.{r['item']}", str(r["bytes"]), str(r["baseline_bytes"])] for r in st.rows()]
    return rows


def describe(outcome) -> str:
    """One-word (or short) rendering of an event outcome."""
    if outcome is None:
        return "-"
    if hasattr(outcome, "ok"):  # handshake
        return "ok" if outcome.ok else f"abort:{outcome.reason.name}@{outcome.step}"
    if hasattr(outcome, "upload"):  # test session
        if outcome.reason is not None:
            return f"abort:{outcome.reason.name}"
        sent = f" upload_groups={len(outcome.upload.times)}" if outcome.upload else ""
        return ("positive" if outcome.result.positive else "negative") + sent
    if hasattr(outcome, "category"):
        return f"{outcome.category.name} infected={outcome.infected} suspected={outcome.suspected}"
    return getattr(outcome, "name", str(outcome))


def run_events(sc: Scenario) -> tuple[dict[str, bytes], dict]:
    COUNTER.reset()
    world = World(sc)
    world.run()
    gw = world.gateway
    report = metrics.OverheadReport(
        metrics.comm_report(world.sim.trace),
        metrics.ops_report(COUNTER.snapshot()),
        metrics.storage_report(gw.status_chain, gw.zone_chain, {u: world.user(u) for u in sc.users}),
        sum(v.status_chain.fp_events for v in world.validators))
    events = "".join(f"{e.at}\t{e.type}\t{json.dumps(e.detail, sort_keys=True, default=str)}\t{describe(e.outcome)}\n"
                     for e in world.log)
    statuses = "".join(f"{u}\t{world.status_of(u).name}\n" for u in sc.users)
    files = {
        "trace.bin": world.sim.trace.to_bytes(),
        "trace.txt": world.sim.trace.summary().encode(),
        "report.csv": report.to_csv().encode(),
        "tables.csv": metrics.rows_to_csv(metrics.table_rows(v=sc.validators)).encode(),
        "status.hex": gw.status_chain.to_hex_dump().encode(),
        "zone.hex": gw.zone_chain.to_hex_dump().encode(),
        "events.txt": events.encode(),
        "statuses.txt": statuses.encode(),
    }
    info = {"validator_pks": [v.pk.to_bytes().hex() for v in world.validators],
            "status_blocks": len(gw.status_chain), "zone_blocks": len(gw.zone_chain),
            "frames": len(world.sim.trace), "trace_sha224": world.sim.trace.digest()}
    return files, info


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario).with_overrides(
        seed=args.seed, aggregation=False if args.no_aggregation else None, bloom=False if args.no_bloom else None)
    out = Path(args.out)
    manifest = {"name": sc.name, "seed": sc.seed, "aggregation": sc.protocol.aggregation, "bloom": sc.protocol.bloom}
    if sc.sweep:
        files = run_sweep(sc.sweep, sc.seed)
        manifest.update(kind="sweep", sweep=sc.sweep)
    else:
        files, info = run_events(sc)
        manifest.update(kind="events", **info)
    manifest["files"] = _write(out, files)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"{sc.name}: wrote {len(files) + 1} files to {out}")
    return 0


# ---- verify -------------------------------------------------------------------------------

def verify_dir(out: Path) -> list[str]:
    """Every mismatch found in a run directory (empty when all checks pass)."""
    mpath = out / "manifest.json"
    if not mpath.is_file():
        raise CliError(f"{mpath}: no manifest; not a run directory")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as e:
        raise CliError(f"{mpath}: {e}") from None
    problems = []
    for name in manifest.get("files", {}):
        if not (out / name).is_file():
            problems.append(f"{name}: missing")
    if problems:
        return problems

    if manifest.get("kind") == "events":
        keys = {i: PublicKey.from_bytes(bytes.fromhex(h)) for i, h in enumerate(manifest["validator_pks"])}
        chains = {}
        for kind in ("status", "zone"):
            name = f"{kind}.hex"
            try:
                chain = Chain.from_hex_dump((out / name).read_text(), kind, bloom=manifest["bloom"])
            except BlockError as e:
                problems.append(f"{name}: {e}")
                continue
            bad = chain.verify(keys)
            if bad is not None:
                problems.append(f"{name}: {kind} block {bad} fails its hash link or leader signature")
            chains[kind] = chain
        try:
            trace = Trace.from_bytes((out / "trace.bin").read_bytes())
        except ValueError as e:
            problems.append(f"trace.bin: {e}")
            trace = None
        if trace is not None and len(chains) == 2:
            with open(out / "report.csv", newline="") as fh:
                have = {tuple(r) for r in csv.reader(fh)}
            for row in _derived_rows(trace, chains["status"], chains["zone"]):
                if tuple(row) not in have:
                    problems.append(f"report.csv: re-derived line {','.join(row)} not found")
    else:
        fresh = run_sweep(manifest["sweep"], manifest["seed"])
        for name, data in fresh.items():
            if (out / name).read_bytes() != data:
                problems.append(f"{name}: does not match the re-derived series")

    for name, digest in manifest.get("files", {}).items():
        if _sha((out / name).read_bytes()) != digest:
            problems.append(f"{name}: content differs from the manifest hash")
    return problems


def cmd_verify(args) -> int:
    problems = verify_dir(Path(args.dir))
    if problems:
        for p in problems:
            print(f"FAIL {p}")
        return 1
    print("all checks passed")
    return 0


# ---- bench --------------------------------------------------------------------------------

def bench_rows(wall: bool = False) -> list[tuple[str, str]]:
    n = 300
    m = metrics.default_group_size(n)
    f6 = metrics.figure6_series([n])[0]
    f8 = metrics.figure8_series([n])[0]
    f9 = metrics.figure9_series([7000])[0]
    ct = metrics.contact_step_times()
    rows = [
        ("fig6 N=300 upload bytes (aggregated / individual)",
         f"{f6['with_aggregation']} / {f6['without_aggregation']} ({f6['reduction']:.2%} smaller)"),
        ("fig8 N=300 modelled verify ms (aggregated / individual)",
         f"{f8['with_aggregation_ms']:.1f} / {f8['without_aggregation_ms']:.1f} ({f8['reduction']:.2%} faster)"),
        ("fig9 7000 keys status block bytes (filters / raw)",
         f"{f9['with_bloom']} / {f9['without_bloom']} ({f9['reduction']:.2%} smaller)"),
        ("contact step ms 2 / 4 / 5", f"{ct[2]:.3f} / {ct[4.1]:.3f} / {ct[5]:.3f}"),
        ("filter build ms for 1000 keys", f"{metrics.model_bloom_ops('build', 1000):.3f}"),
        ("group size for N=300", str(m)),
    ]
    for nn in (100, 1000):
        mc = bench.monte_carlo_fp(nn, 100_000, seed=0, filters=100)
        rows.append((f"bloom FP n={nn} (empirical / analytic)",
                     f"{mc['empirical']:.5f} / {mc['analytic']:.5f} (z={mc['z']:+.2f})"))
    if wall:
        for r in bench.wall_clock():
            rows.append((f"wall clock {r['operation']} ms", f"{r['median_ms']}"))
    return rows


def cmd_bench(args) -> int:
    for name, value in bench_rows(args.wall_clock):
        print(f"{name}: {value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="contactchain", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario and write its outputs")
    r.add_argument("scenario", help="YAML scenario file or bundled preset name")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--no-aggregation", action="store_true")
    r.add_argument("--no-bloom", action="store_true")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("verify", help="re-check a run directory")
    v.add_argument("dir")
    v.set_defaults(func=cmd_verify)
    b = sub.add_parser("bench", help="print the headline modelled numbers")
    b.add_argument("--wall-clock", action="store_true", help="also time primitives on this machine")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, CliError, OSError) as e:
        print(f"contactchain: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
