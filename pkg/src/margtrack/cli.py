"""Command line: track, eval, sweep, simulate, bench.

Exit codes: 0 success, 1 validation error, 2 I/O error. Diagnostics go to
stderr; results go to the requested files or stdout.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .io import format_config, load_config, load_detections, read_results, write_detections, write_embeddings, \
    write_results
from .metrics import evaluate, format_report, report_csv
from .scenario import generate_sequence, specs_from_text, threshold_grid, threshold_sweep
from .tracker import ASSOCIATION_MODES, TrackerConfig, run_sequence

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


class _UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be start:stop:step, got {text!r}")
    return threshold_grid(*(float(p) for p in parts))


def _modes(text: str) -> list[str]:
    modes = [m.strip() for m in text.split(",") if m.strip()]
    if not modes:
        raise ValueError("no association modes given")
    for m in modes:
        if m not in ASSOCIATION_MODES:
            raise ValueError(f"unknown mode {m!r}; choose from {', '.join(ASSOCIATION_MODES)}")
    return modes


def _load_specs(path):
    specs = specs_from_text(Path(path).read_text(), str(path))
    if not specs:
        raise ValueError(f"{path}: scenario defines no videos")
    return specs


def cmd_track(args) -> int:
    cfg = load_config(args.config) if args.config else TrackerConfig()
    if args.mode:
        cfg = cfg.replace(association_mode=args.mode)
    sys.stderr.write("config:\n" + "".join("  " + line for line in format_config(cfg).splitlines(True)))
    frames = load_detections(args.dets, args.embs)
    table = run_sequence(frames, cfg)
    write_results(table, args.out)
    sys.stderr.write(f"wrote {len(table)} rows for {len(set(table.ids.tolist()))} tracks to {args.out}\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    report = evaluate(read_results(args.pred), read_results(args.gt), iou_threshold=args.iou)
    sys.stdout.write(format_report(report) + "\n\n" + report_csv(report) + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    specs = _load_specs(args.scenario)
    grid = _grid(args.grid)
    modes = _modes(args.modes)
    base = load_config(args.config) if args.config else TrackerConfig()
    sequences = [generate_sequence(s) for s in specs]
    chunks = []
    for k, mode in enumerate(modes):
        res = threshold_sweep(sequences, mode, grid, base, jobs=args.jobs)
        csv_text = res.to_csv()
        chunks.append(csv_text if k == 0 else csv_text.split("\n", 1)[1])
        opt = ", ".join(f"{t:g}" for t in res.optimal_thresholds)
        sys.stdout.write(f"{mode}: per-video optimal thresholds [{opt}], spread {res.spread:.4g}, "
                         f"best global {res.best_global_threshold:g} (mean IDF1 {res.mean_idf1.max():.4f})\n")
    Path(args.out).write_text("".join(chunks))
    return EXIT_OK


def cmd_simulate(args) -> int:
    specs = _load_specs(args.scenario)
    if not 0 <= args.video < len(specs):
        raise ValueError(f"--video {args.video} out of range; scenario has {len(specs)} videos")
    seq = generate_sequence(specs[args.video])
    embs = write_detections(args.out_dets, seq.frames)
    write_embeddings(args.out_embs, embs)
    write_results(seq.ground_truth, args.out_gt)
    sys.stderr.write(f"wrote {len(embs)} detections over {len(seq.frames)} frames\n")
    return EXIT_OK


def cmd_bench(args) -> int:
    if min(args.m, args.n, args.steps, args.repeat) < 1:
        raise ValueError("--m, --n, --steps and --repeat must be positive")
    backends = bench_mod.available_backends() if args.backend == "all" else [args.backend]
    results = [bench_mod.time_association(args.m, args.n, args.steps, args.repeat, backend=b) for b in backends]
    sys.stdout.write(bench_mod.format_bench(results) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="margtrack", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("track", help="track a detection file")
    t.add_argument("--dets", required=True)
    t.add_argument("--embs", required=True)
    t.add_argument("--config", help="key = value file mirroring TrackerConfig (defaults if omitted)")
    t.add_argument("--out", required=True)
    t.add_argument("--mode", choices=ASSOCIATION_MODES)
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("eval", help="score predictions against ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--iou", type=float, default=0.5)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="threshold sweep over a synthetic scenario")
    s.add_argument("--scenario", required=True)
    s.add_argument("--modes", required=True, help="comma list, e.g. marginal,distance")
    s.add_argument("--grid", required=True, help="start:stop:step, inclusive")
    s.add_argument("--out", required=True)
    s.add_argument("--config", help="base tracker config")
    s.add_argument("--jobs", type=int, default=1, help="worker processes")
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("simulate", help="write one synthetic video as MOT files")
    m.add_argument("--scenario", required=True)
    m.add_argument("--out-dets", required=True)
    m.add_argument("--out-embs", required=True)
    m.add_argument("--out-gt", required=True)
    m.add_argument("--video", type=int, default=0, help="which video of the scenario to write")
    m.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench", help="association latency")
    b.add_argument("--m", type=int, required=True)
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--steps", type=int, default=100)
    b.add_argument("--repeat", type=int, default=50)
    b.add_argument("--backend", choices=("all", "numba", "numpy"), default="all")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except OSError as exc:
        print(f"margtrack: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, RuntimeError) as exc:
        print(f"margtrack: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
