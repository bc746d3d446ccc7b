"""Benchmark harness for the parallel NMS engine.

Subcommands run the engine over files or synthetic workloads, sweep the
detection count / partition count / worker count, and emit a stable CSV
schema plus static SVG charts. Option precedence is flags, then a JSON
config file (``--config``), then built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .detections import (
    DetectionError,
    DetectionVector,
    load_detections,
    store_detections,
    store_result,
)
from .engine import ConfigError, NmsConfig, map_phase, mask_survivors, reduce_phase, run_nms
from .oracles import compare_methods
from .workload import WorkloadError, WorkloadSpec, generate_frame, random_frame

CSV_COLUMNS = [
    "n",
    "k",
    "workers",
    "theta",
    "map_ms",
    "reduce_ms",
    "total_ms",
    "map_cells",
    "reduce_segments",
    "survivors",
    "seed",
]

_DEFAULTS = {
    "theta": 0.3,
    "d_max": 4096,
    "k": 32,
    "workers": 1,
    "tie_break": "paper_faithful",
    "seed": 0,
    "repetitions": 5,
    "warmup": 3,
    "per_object": 4,
    "base_z": 24,
    "jitter_xy": 3,
    "jitter_z": 2,
}


class InvarianceError(RuntimeError):
    """A result changed under a parameter that must not affect results."""


@dataclass
class BenchRecord:
    """One benchmark measurement; medians over the repetitions."""

    n: int
    k: int
    workers: int
    theta: float
    map_ms: float
    reduce_ms: float
    total_ms: float
    map_cells: int
    reduce_segments: int
    survivors: int
    seed: int

    def as_row(self) -> list:
        return [getattr(self, col) for col in CSV_COLUMNS]


def _write_csv(path: Path, records: list[BenchRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(rec.as_row())


def _bench_once(vec: DetectionVector, cfg: NmsConfig):
    t0 = time.perf_counter()
    matrix, counters = map_phase(vec, cfg)
    t1 = time.perf_counter()
    mask, reduce_counters = reduce_phase(matrix, cfg)
    t2 = time.perf_counter()
    result = mask_survivors(vec, mask)
    t3 = time.perf_counter()
    counters = counters + reduce_counters
    return result, counters, (t1 - t0) * 1e3, (t2 - t1) * 1e3, (t3 - t0) * 1e3


def _check_counters(counters, cfg: NmsConfig) -> None:
    if counters.map_cells != cfg.d_max**2 or counters.reduce_segments != cfg.d_max * cfg.k:
        raise InvarianceError(
            f"work counters diverged from d_max**2 / d_max*k: {counters} with {cfg}"
        )


def _measure(vec: DetectionVector, cfg: NmsConfig, repetitions: int, warmup: int, seed: int):
    for _ in range(warmup):
        _bench_once(vec, cfg)
    map_ts, reduce_ts, total_ts = [], [], []
    result = counters = None
    for _ in range(repetitions):
        result, counters, map_ms, reduce_ms, total_ms = _bench_once(vec, cfg)
        map_ts.append(map_ms)
        reduce_ts.append(reduce_ms)
        total_ts.append(total_ms)
    _check_counters(counters, cfg)
    record = BenchRecord(
        n=vec.count,
        k=cfg.k,
        workers=cfg.workers,
        theta=cfg.theta,
        map_ms=statistics.median(map_ts),
        reduce_ms=statistics.median(reduce_ts),
        total_ms=statistics.median(total_ts),
        map_cells=counters.map_cells,
        reduce_segments=counters.reduce_segments,
        survivors=len(result.survivors),
        seed=seed,
    )
    return record, result


def _survivor_key(result) -> tuple:
    return tuple((d.x, d.y, d.z, d.s) for d in result.survivors)


def _next_multiple(n: int, k: int) -> int:
    return max(1, -(-n // k)) * k


def _sweep_frame(n: int, per_object: int, base_z: int, jitter_xy: int, jitter_z: int, seed: int, d_max: int) -> DetectionVector:
    if n < 1:
        raise WorkloadError(f"sweep sizes must be positive, got n={n}")
    if n % per_object:
        raise WorkloadError(f"n={n} is not a multiple of detections-per-object={per_object}")
    spec = WorkloadSpec.sized_for(
        objects=n // per_object,
        detections_per_object=per_object,
        base_z=base_z,
        jitter_xy=jitter_xy,
        jitter_z=jitter_z,
        seed=seed,
    )
    return generate_frame(spec, d_max)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    if not isinstance(payload, dict):
        raise ValueError(f"{path}: config file must hold a JSON object")
    return payload


def _resolve(args, key: str):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in args.config_values:
        return args.config_values[key]
    return _DEFAULTS[key]


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from exc


def cmd_run(args) -> int:
    cfg = NmsConfig(
        theta=_resolve(args, "theta"),
        d_max=_resolve(args, "d_max"),
        k=_resolve(args, "k"),
        workers=_resolve(args, "workers"),
        tie_break=_resolve(args, "tie_break"),
    )
    vec = load_detections(args.input, cfg.d_max, args.format)
    record, result = _measure(vec, cfg, repetitions=1, warmup=0, seed=_resolve(args, "seed"))
    if args.out:
        store_result(result, args.out, args.out_format)
    print(",".join(CSV_COLUMNS))
    print(",".join(str(v) for v in record.as_row()))
    return 0


def cmd_gen(args) -> int:
    per = _resolve(args, "per_object")
    common = dict(
        detections_per_object=per,
        base_z=_resolve(args, "base_z"),
        jitter_xy=_resolve(args, "jitter_xy"),
        jitter_z=_resolve(args, "jitter_z"),
        seed=_resolve(args, "seed"),
    )
    if args.frame_w or args.frame_h:
        if not (args.frame_w and args.frame_h):
            raise WorkloadError("pass both --frame-w and --frame-h, or neither")
        spec = WorkloadSpec(objects=args.objects, frame_w=args.frame_w, frame_h=args.frame_h, **common)
    else:
        spec = WorkloadSpec.sized_for(objects=args.objects, **common)
    vec = generate_frame(spec)
    store_detections(vec.valid(), args.out, args.format)
    print(f"wrote {vec.count} detections to {args.out}")
    return 0


def cmd_sweep_n(args) -> int:
    k = _resolve(args, "k")
    theta = _resolve(args, "theta")
    seed = _resolve(args, "seed")
    reps = _resolve(args, "repetitions")
    warmup = _resolve(args, "warmup")
    per = _resolve(args, "per_object")
    records = []
    for n in args.n_values:
        d_max = args.fixed_dmax if args.fixed_dmax else _next_multiple(n, k)
        if n > d_max:
            raise ConfigError(f"n={n} exceeds d_max={d_max}")
        vec = _sweep_frame(
            n, per, _resolve(args, "base_z"), _resolve(args, "jitter_xy"),
            _resolve(args, "jitter_z"), seed, d_max,
        )
        baseline = None
        for workers in args.workers:
            cfg = NmsConfig(theta=theta, d_max=d_max, k=k, workers=workers)
            record, result = _measure(vec, cfg, reps, warmup, seed)
            key = _survivor_key(result)
            if baseline is None:
                baseline = key
            elif key != baseline:
                raise InvarianceError(f"survivors changed with workers={workers} at n={n}")
            records.append(record)
    _write_csv(Path(args.out), records)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_sweep_k(args) -> int:
    theta = _resolve(args, "theta")
    seed = _resolve(args, "seed")
    workers = _resolve(args, "workers")
    reps = _resolve(args, "repetitions")
    warmup = _resolve(args, "warmup")
    per = _resolve(args, "per_object")
    d_max = _resolve(args, "d_max")
    if args.n > d_max:
        raise ConfigError(f"n={args.n} exceeds d_max={d_max}")
    vec = _sweep_frame(
        args.n, per, _resolve(args, "base_z"), _resolve(args, "jitter_xy"),
        _resolve(args, "jitter_z"), seed, d_max,
    )
    records = []
    baseline = None
    for k in args.k_values:
        cfg = NmsConfig(theta=theta, d_max=d_max, k=k, workers=workers)
        record, result = _measure(vec, cfg, reps, warmup, seed)
        key = _survivor_key(result)
        if baseline is None:
            baseline = key
        elif key != baseline:
            raise InvarianceError(
                f"survivor set changed with k={k}; the reduction must be k-invariant"
            )
        records.append(record)
    _write_csv(Path(args.out), records)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_sweep_workers(args) -> int:
    k = _resolve(args, "k")
    theta = _resolve(args, "theta")
    seed = _resolve(args, "seed")
    reps = _resolve(args, "repetitions")
    warmup = _resolve(args, "warmup")
    per = _resolve(args, "per_object")
    d_max = args.fixed_dmax if args.fixed_dmax else _next_multiple(args.n, k)
    vec = _sweep_frame(
        args.n, per, _resolve(args, "base_z"), _resolve(args, "jitter_xy"),
        _resolve(args, "jitter_z"), seed, d_max,
    )
    records = []
    baseline = None
    for workers in args.workers_values:
        cfg = NmsConfig(theta=theta, d_max=d_max, k=k, workers=workers)
        record, result = _measure(vec, cfg, reps, warmup, seed)
        key = _survivor_key(result)
        if baseline is None:
            baseline = key
        elif key != baseline:
            raise InvarianceError(f"survivor set changed with workers={workers}")
        records.append(record)
    _write_csv(Path(args.out), records)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_compare(args) -> int:
    theta = _resolve(args, "theta")
    seed = _resolve(args, "seed")
    import numpy as np

    rng = np.random.default_rng(seed)
    instances = [
        random_frame(
            count=int(rng.integers(0, args.n_max + 1)),
            seed=int(rng.integers(0, 2**31)),
            duplicate_fraction=args.duplicates,
        )
        for _ in range(args.instances)
    ]
    report = compare_methods(instances, theta)
    print(
        f"instances={report.instances} exact_matches={report.exact_matches} "
        f"jaccard_mean={report.jaccard_mean:.4f} max_symmetric_diff={report.max_symmetric_diff}"
    )
    return 0


def _read_records(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CSV_COLUMNS:
            raise ValueError(
                f"{path}: expected columns {','.join(CSV_COLUMNS)}, got {reader.fieldnames}"
            )
        rows = [row for row in reader]
    if not rows:
        raise ValueError(f"{path}: no benchmark records")
    return rows


def cmd_plot(args) -> int:
    rows = _read_records(Path(args.csv))
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 5))
    by_workers: dict[int, list[dict]] = {}
    for row in rows:
        by_workers.setdefault(int(row["workers"]), []).append(row)

    if args.kind == "latency_vs_n":
        for workers, group in sorted(by_workers.items()):
            group.sort(key=lambda r: int(r["n"]))
            ax.loglog(
                [int(r["n"]) for r in group],
                [float(r["total_ms"]) for r in group],
                marker="o",
                label=f"{workers} worker(s)",
            )
        ax.set_xlabel("detections (n)")
        ax.set_ylabel("total latency (ms)")
        ax.set_title("NMS latency vs detection count")
    elif args.kind == "latency_vs_k":
        for workers, group in sorted(by_workers.items()):
            group.sort(key=lambda r: int(r["k"]))
            ks = [int(r["k"]) for r in group]
            ax.semilogx(ks, [float(r["reduce_ms"]) for r in group], marker="o",
                        base=2, label=f"reduce, {workers} worker(s)")
            ax.semilogx(ks, [float(r["total_ms"]) for r in group], marker="s",
                        base=2, linestyle="--", label=f"total, {workers} worker(s)")
        ax.set_xlabel("row partitions (k)")
        ax.set_ylabel("latency (ms)")
        ax.set_title("Reduce latency vs partition count")
    elif args.kind == "map_reduce_split":
        for workers, group in sorted(by_workers.items()):
            group.sort(key=lambda r: int(r["n"]))
            ns = [int(r["n"]) for r in group]
            ax.loglog(ns, [float(r["map_ms"]) for r in group], marker="o",
                      label=f"map, {workers} worker(s)")
            ax.loglog(ns, [float(r["reduce_ms"]) for r in group], marker="s",
                      linestyle="--", label=f"reduce, {workers} worker(s)")
        ax.set_xlabel("detections (n)")
        ax.set_ylabel("phase latency (ms)")
        ax.set_title("Map/reduce latency split")
    else:
        raise ValueError(f"unknown plot kind {args.kind!r}")

    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out)
    plt.close(fig)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default option values")
    common.add_argument("--theta", type=float)
    common.add_argument("--seed", type=int)

    parser = argparse.ArgumentParser(prog="nms-bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run NMS over a detection file")
    p.add_argument("input", help="CSV or JSON detection file")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--d-max", dest="d_max", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--tie-break", dest="tie_break", choices=["paper_faithful", "by_index"])
    p.add_argument("--out", help="write survivors to this file")
    p.add_argument("--out-format", dest="out_format", choices=["csv", "json"])
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic detection file")
    p.add_argument("--objects", type=int, required=True)
    p.add_argument("--per-object", dest="per_object", type=int)
    p.add_argument("--base-z", dest="base_z", type=int)
    p.add_argument("--jitter-xy", dest="jitter_xy", type=int)
    p.add_argument("--jitter-z", dest="jitter_z", type=int)
    p.add_argument("--frame-w", dest="frame_w", type=int)
    p.add_argument("--frame-h", dest="frame_h", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["csv", "json"])
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sweep-n", parents=[common], help="latency sweep over detection counts")
    p.add_argument("--n-values", dest="n_values", type=_int_list, required=True)
    p.add_argument("--workers", type=_int_list, default=[1])
    p.add_argument("--k", type=int)
    p.add_argument("--per-object", dest="per_object", type=int)
    p.add_argument("--base-z", dest="base_z", type=int)
    p.add_argument("--jitter-xy", dest="jitter_xy", type=int)
    p.add_argument("--jitter-z", dest="jitter_z", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--fixed-dmax", dest="fixed_dmax", type=int,
                   help="constant matrix capacity; default sizes d_max per n")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_n)

    p = sub.add_parser("sweep-k", parents=[common], help="latency sweep over row partitions")
    p.add_argument("--k-values", dest="k_values", type=_int_list, required=True)
    p.add_argument("-n", type=int, default=2048)
    p.add_argument("--d-max", dest="d_max", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--per-object", dest="per_object", type=int)
    p.add_argument("--base-z", dest="base_z", type=int)
    p.add_argument("--jitter-xy", dest="jitter_xy", type=int)
    p.add_argument("--jitter-z", dest="jitter_z", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_k)

    p = sub.add_parser("sweep-workers", parents=[common], help="latency sweep over worker counts")
    p.add_argument("--workers-values", dest="workers_values", type=_int_list, required=True)
    p.add_argument("-n", type=int, default=2048)
    p.add_argument("--k", type=int)
    p.add_argument("--per-object", dest="per_object", type=int)
    p.add_argument("--base-z", dest="base_z", type=int)
    p.add_argument("--jitter-xy", dest="jitter_xy", type=int)
    p.add_argument("--jitter-z", dest="jitter_z", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--fixed-dmax", dest="fixed_dmax", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_workers)

    p = sub.add_parser("compare", parents=[common],
                       help="survivor-set agreement between the engine and greedy NMS")
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--n-max", dest="n_max", type=int, default=128)
    p.add_argument("--duplicates", type=float, default=0.0,
                   help="fraction of slots overwritten with exact duplicates")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot", parents=[common], help="render a sweep CSV to a static chart")
    p.add_argument("csv")
    p.add_argument("--kind", choices=["latency_vs_n", "latency_vs_k", "map_reduce_split"],
                   required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.config_values = _load_config(args.config)
        return args.func(args)
    except InvarianceError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except (DetectionError, ConfigError, WorkloadError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
