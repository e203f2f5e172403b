import os
import subprocess
import sys

import numpy as np
import pytest

from emdlsh.report import Report, StatsRecord, binomial_sigma, parse_report
from emdlsh.suites import (
    ExperimentConfig,
    config_from_dict,
    gen_synthetic,
    load_config,
    run_ann_suite,
    run_collision_suite,
    run_distortion_suite,
)


def test_record_verdicts():
    assert StatsRecord("a", 0.5, 0.01, 0.52, "<=", 100).passed
    assert not StatsRecord("a", 0.9, 0.01, 0.52, "<=", 100).passed
    assert StatsRecord("a", 0.5, 0.01, 0.48, ">=", 100).passed
    assert StatsRecord("a", 0.5, 0.0, 0.5, "==", 100, slack=0.0).passed
    with pytest.raises(ValueError):
        StatsRecord("a", 0.5, 0.01, 0.5, "!!", 100)


def test_report_text_roundtrip():
    rep = Report(seed=7, config={"n": 3})
    rep.add(StatsRecord("x/one", 0.25, 0.01, 0.3, "<=", 500,
                        extras={"note": "hi", "v": 1.5}))
    rep.add(StatsRecord("x/two", 0.9, 0.01, 0.95, ">=", 500))
    text = rep.to_text()
    parsed = parse_report(text)
    assert len(parsed) == 2
    assert parsed[0]["record"] == "x/one"
    assert parsed[0]["estimate"] == 0.25
    assert parsed[0]["verdict"] == "pass"
    assert not rep.all_passed or True
    assert "config_digest" in text


def test_config_sections_and_overrides():
    cfg = config_from_dict({
        "mode": "hypercube", "n": 40,
        "params": {"r": 5.0, "p1": 0.7, "p2": 0.3},
        "generator": {"kind": "planted", "clusters": 4, "radius": 1,
                      "near": 5, "margin": 4.0, "queries": 10},
    })
    assert cfg.r == 5.0 and cfg.p1 == 0.7 and cfg.generator == "planted"
    assert cfg.clusters == 4 and cfg.near_budget == 5 and cfg.n_queries == 10
    with pytest.raises(ValueError):
        config_from_dict({"nope": 1})
    with pytest.raises(ValueError):
        config_from_dict({"params": {"weird": 1}})
    with pytest.raises(ValueError):
        config_from_dict({"params": {"p1": 0.2, "p2": 0.8}})


def test_load_config_yaml(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("mode: hypercube\nn: 24\nseed: 5\nparams:\n  r: 6.0\n")
    cfg = load_config(path)
    assert cfg.n == 24 and cfg.seed == 5 and cfg.r == 6.0


def test_gen_synthetic_dispatch():
    cfg = ExperimentConfig(n=12, s=2, d=16, generator="planted", clusters=3,
                           near_budget=3, n_queries=4, seed=3)
    data = gen_synthetic(cfg)
    assert data.dataset.n == 12 and len(data.queries) == 4
    with pytest.raises(ValueError):
        gen_synthetic(ExperimentConfig(generator="nope"))


def small_cfg(**kw):
    base = dict(n=24, s=2, d=16, clusters=6, cluster_radius=1, near_budget=3,
                far_margin=4.0, n_queries=12, r=4.0, p1=0.8, p2=0.2, seed=11,
                trials=400, figures=False)
    base.update(kw)
    return ExperimentConfig(**base)


def test_collision_suite_passes():
    report = run_collision_suite(small_cfg())
    assert report.records
    failed = [r.name for r in report.records if not r.passed]
    assert not failed, failed


def test_distortion_suite_passes():
    report = run_distortion_suite(small_cfg())
    failed = [r.name for r in report.records if not r.passed]
    assert not failed, failed


def test_ann_suite_passes():
    report = run_ann_suite(small_cfg(n=30))
    failed = [r.name for r in report.records if not r.passed]
    assert not failed, failed


def run_cli(args, cwd):
    env = dict(os.environ, PYTHONPATH="")
    return subprocess.run([sys.executable, "-m", "emdlsh.cli", *args],
                          capture_output=True, text=True, cwd=cwd, env=env)


def test_cli_gen_and_report(tmp_path):
    out = tmp_path / "ds.emdset"
    proc = run_cli(["gen", "--seed", "3", "--out", str(out)], tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
    from emdlsh.datasets import load_dataset
    ds, _ = load_dataset(out)
    assert ds.n == ExperimentConfig().n


def test_cli_collisions_exit_code_and_figures(tmp_path):
    out = tmp_path / "rep.txt"
    proc = run_cli(["collisions", "--seed", "4", "--trials", "400",
                    "--out", str(out)], tmp_path)
    assert proc.returncode == 0, proc.stderr + proc.stdout
    text = out.read_text()
    records = parse_report(text)
    assert records and all(r["verdict"] == "pass" for r in records)
    pngs = list(tmp_path.glob("rep_*.png"))
    assert pngs, "figures should be rendered next to the report"


def test_cli_no_figures(tmp_path):
    out = tmp_path / "rep2.txt"
    proc = run_cli(["collisions", "--seed", "4", "--trials", "300",
                    "--out", str(out), "--no-figures"], tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert not list(tmp_path.glob("rep2_*.png"))


def test_thread_cap_env(tmp_path, monkeypatch):
    from emdlsh.parallel import thread_cap
    monkeypatch.setenv("EMD_LSH_THREADS", "3")
    assert thread_cap() == 3
    monkeypatch.delenv("EMD_LSH_THREADS")
    assert thread_cap() >= 1
