"""Command-line interface.

Subcommands: ``gen`` (write a synthetic dataset), ``collisions``,
``distortion``, ``ann`` (statistical suites), and ``selftest`` (the full
acceptance run).  Reports are written as one key=value record per line, with
matplotlib figures rendered next to the report unless --no-figures is given.
Exit code 0 means every record passed.  EMD_LSH_THREADS caps parallelism.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time

from emdlsh import acceptance
from emdlsh.datasets import save_dataset
from emdlsh.figures import render_report_figures
from emdlsh.report import Report
from emdlsh.suites import (
    ExperimentConfig,
    gen_synthetic,
    load_config,
    run_ann_suite,
    run_collision_suite,
    run_distortion_suite,
)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="emd-lsh",
        description="Locality-sensitive hashing experiments for the Earth "
                    "Mover's Distance over small sets of vectors")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("gen", "generate a synthetic dataset and write it to --out"),
        ("collisions", "collision-probability law suite"),
        ("distortion", "tree-embedding distortion suite"),
        ("ann", "near-neighbor recall and query-cost suite"),
        ("selftest", "run the full acceptance suite (criteria 1-13)"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--seed", type=int, help="64-bit master seed")
        p.add_argument("--out", help="output path (dataset or report)")
        p.add_argument("--trials", type=int, help="trial count override")
        p.add_argument("--mode", choices=["hypercube", "grid", "real"])
        p.add_argument("--no-figures", action="store_true",
                       help="skip rendering figures beside the report")
    return parser


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.no_figures:
        overrides["figures"] = False
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _emit(report: Report, cfg: ExperimentConfig, default_name: str) -> int:
    out = cfg.out or default_name
    report.write(out)
    print(report.to_text(), end="")
    if cfg.figures:
        for path in render_report_figures(report, out):
            print(f"# figure {path}")
    print(f"# report {out}")
    return 0 if report.all_passed else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "gen":
        cfg = _resolve_config(args)
        data = gen_synthetic(cfg)
        out = cfg.out or "dataset.emdset"
        save_dataset(data.dataset, out,
                     delta=cfg.delta if cfg.mode == "grid" else None)
        print(f"# dataset {out} ({data.dataset.n} points, s={data.dataset.s}, "
              f"d={data.dataset.d}, mode={data.dataset.mode})")
        if data.queries:
            from emdlsh.core import Dataset
            qpath = f"{out}.queries"
            save_dataset(Dataset(tuple(data.queries)), qpath)
            print(f"# queries {qpath}")
        if data.far_queries:
            fpath = f"{out}.far"
            from emdlsh.core import Dataset
            save_dataset(Dataset(tuple(data.far_queries)), fpath)
            print(f"# far queries {fpath}")
        return 0
    if args.command == "collisions":
        cfg = _resolve_config(args)
        return _emit(run_collision_suite(cfg), cfg, "collisions_report.txt")
    if args.command == "distortion":
        cfg = _resolve_config(args)
        return _emit(run_distortion_suite(cfg), cfg, "distortion_report.txt")
    if args.command == "ann":
        cfg = _resolve_config(args)
        return _emit(run_ann_suite(cfg), cfg, "ann_report.txt")
    if args.command == "selftest":
        cfg = _resolve_config(args)
        started = time.time()
        report = Report(seed=acceptance.BASE_SEED, config={"suite": "selftest"})
        for num, title, _ in acceptance.CRITERIA:
            t0 = time.time()
            recs = acceptance.run_criterion(num)
            report.extend(recs)
            status = "PASS" if all(r.passed for r in recs) else "FAIL"
            print(f"criterion {num:2d} [{status}] {title} "
                  f"({time.time() - t0:.1f}s)")
        print(f"# total wall time {time.time() - started:.1f}s")
        return _emit(report, cfg, "selftest_report.txt")
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
