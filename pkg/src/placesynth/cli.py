"""Command-line pipeline: system config in, ranked reduction-program report out.

    synth --system a100_2node.json --axes 8,4 --reduce 0 --algo ring \\
          --bytes 4294967296 --out report.json
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .dsl import parse_program, pretty_print
from .hierarchy import HierarchyKind, build_hierarchy
from .placement import ParallelismMatrix, ParallelismSpec, PlacementError, enumerate_matrices
from .simulator import Algo, CostModelConfig, rank, simulate
from .synthesizer import SynthesisConfig, baseline_program, synthesize
from .topology import ConfigError, device_count, load_system, parse_system, serialize_system

CSV_COLUMNS = ("matrix_id", "program_id", "rank", "program", "seconds", "speedup")


@dataclass(frozen=True)
class RunRequest:
    system: str
    axes: tuple[int, ...]
    reduce: tuple[int, ...]
    algo: Algo = Algo.Ring
    payload_bytes: float = float(1 << 32)
    size_limit: int = 5
    out: str | None = None
    fmt: str = "json"


def _int_list(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated integer list, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _matrix_section(args) -> dict:
    matrix, reduce, system_text, algo, payload, size_limit = args
    system = parse_system(system_text)
    h = build_hierarchy(matrix, reduce, HierarchyKind.ReductionAxis)
    section = {"matrix": matrix.to_list(), "hierarchy": h.to_dict(), "programs": []}
    if h.size == 1:
        section["note"] = "reduction group has a single device; nothing to reduce"
        section["stats"] = {"explored": 0, "pruned": 0, "memo_hits": 0}
        return section
    result = synthesize(matrix, reduce, system, SynthesisConfig(size_limit=size_limit), hierarchy=h)
    cfg = CostModelConfig(algo=algo, payload_bytes=payload)
    reports = [simulate(low, system, cfg) for _, low in result.programs]
    base = baseline_program(h).instructions
    base_idx = next(i for i, (p, _) in enumerate(result.programs) if p.instructions == base)
    ranked = rank(reports, [len(p) for p, _ in result.programs], base_idx)
    for pos, r in enumerate(ranked):
        prog, low = result.programs[r.index]
        section["programs"].append({
            "program_id": r.index,
            "rank": pos + 1,
            "program": pretty_print(prog),
            "lowered": low.summary(),
            "seconds": r.seconds,
            "speedup": r.speedup,
            "steps": [s.to_dict(system) for s in reports[r.index].steps],
        })
    section["baseline_seconds"] = reports[base_idx].total_seconds
    section["outperforming_baseline"] = sum(
        1 for rep in reports if rep.total_seconds < reports[base_idx].total_seconds
    )
    section["stats"] = result.stats.to_dict()
    return section


def _workers() -> int:
    raw = os.environ.get("SYNTH_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"SYNTH_THREADS must be an integer, got {raw!r}") from None


def run(req: RunRequest) -> dict:
    """Build the full report; section order follows matrix enumeration order."""
    system = load_system(req.system)
    spec = ParallelismSpec(req.axes, req.reduce)
    report: dict = {
        "system": json.loads(serialize_system(system)),
        "axes": list(spec.axes),
        "reduction_axes": sorted(spec.reduction_axes),
        "algo": req.algo.value,
        "payload_bytes": req.payload_bytes,
        "size_limit": req.size_limit,
        "matrices": [],
        "best": None,
    }
    if device_count(system) == 1:
        enumerate_matrices(system, spec)  # still validates the axes
        report["note"] = "single-device system; there is nothing to reduce"
        return report
    matrices: list[ParallelismMatrix] = enumerate_matrices(system, spec)
    text = serialize_system(system)
    jobs = [(m, tuple(sorted(spec.reduction_axes)), text, req.algo, req.payload_bytes, req.size_limit)
            for m in matrices]
    workers = min(_workers(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            sections = list(pool.map(_matrix_section, jobs))
    else:
        sections = [_matrix_section(j) for j in jobs]
    best = None
    for mid, sec in enumerate(sections):
        sec["matrix_id"] = mid
        if sec["programs"]:
            top = sec["programs"][0]
            if best is None or top["seconds"] < best["seconds"]:
                best = {"matrix_id": mid, "matrix": sec["matrix"], "program": top["program"],
                        "seconds": top["seconds"]}
    report["matrices"] = sections
    report["best"] = best
    if best is None:
        report["note"] = "no matrix has a reduction group with more than one device"
    return report


def emit_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def emit_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for sec in report.get("matrices", []):
        for p in sec["programs"]:  # already ascending by seconds
            w.writerow([sec["matrix_id"], p["program_id"], p["rank"], p["program"],
                        repr(p["seconds"]), repr(p["speedup"])])
    return buf.getvalue()


def check_roundtrip(report: dict) -> None:
    """Every reported program text parses back to itself."""
    for sec in report["matrices"]:
        if not sec["programs"]:
            continue
        m = ParallelismMatrix(tuple(tuple(r) for r in sec["matrix"]))
        h = build_hierarchy(m, report["reduction_axes"], HierarchyKind.ReductionAxis)
        for p in sec["programs"]:
            if pretty_print(parse_program(p["program"], h)) != p["program"]:
                raise AssertionError(f"program text does not round-trip: {p['program']}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="synth", description=__doc__.splitlines()[0])
    ap.add_argument("--system", required=True, help="system config path or shipped config name")
    ap.add_argument("--axes", required=True, type=_int_list, help="axis sizes, e.g. 8,4")
    ap.add_argument("--reduce", required=True, type=_int_list, help="reduction axis indices, e.g. 0")
    ap.add_argument("--algo", choices=[a.value for a in Algo], default="ring")
    ap.add_argument("--bytes", type=float, default=float(1 << 32), help="payload bytes per device")
    ap.add_argument("--size-limit", type=int, default=5)
    ap.add_argument("--out", help="output path (default stdout)")
    ap.add_argument("--format", choices=["json", "csv"], default="json")
    ap.add_argument("--seed-order", action="store_true", help="reserved; has no effect")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        req = RunRequest(
            system=args.system, axes=args.axes, reduce=args.reduce, algo=Algo(args.algo),
            payload_bytes=args.bytes, size_limit=args.size_limit, out=args.out, fmt=args.format,
        )
        if req.size_limit < 1:
            raise ValueError("--size-limit must be at least 1")
        if not req.payload_bytes > 0:
            raise ValueError("--bytes must be positive")
        report = run(req)
    except ConfigError as exc:
        print(f"synth: topology: {exc}", file=sys.stderr)
        return 2
    except PlacementError as exc:
        print(f"synth: placement: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"synth: {exc}", file=sys.stderr)
        return 1
    text = emit_json(report) if req.fmt == "json" else emit_csv(report)
    if req.out:
        Path(req.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
