"""Experiment configuration and the statistical suite drivers behind the CLI.

A config is one YAML file of key: value pairs with two optional nested
sections (``params`` and ``generator``); CLI flags override config keys.
Each suite returns a Report whose records carry (estimate, sigma, bound,
verdict); trial seeds derive from the config seed, so reruns reproduce
estimates bit-exactly.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import yaml
from scipy import stats as sstats

from emdlsh.ann import build_index, query_with_stats
from emdlsh.core import GRID, HYPERCUBE, MODES, REAL, Dataset, PointSet, emd_exact
from emdlsh.datasets import GeneratedData, gen_clustered, gen_planted, gen_uniform
from emdlsh.dind import dind_eval, sample_dind_hash
from emdlsh.glued import derive_params
from emdlsh.quadtree import QuadTree, tree_depth_levels
from emdlsh.reduction import grid_cells_batch, sample_threshold_map, threshold_map_apply
from emdlsh.report import Report, StatsRecord, binomial_sigma
from emdlsh.rng import stream
from emdlsh.sampletree import (
    SparseVector,
    build_sampletree,
    embed_l1,
    l1_lsh_eval,
    sample_l1_lsh,
    sampletree_hash_eval,
    tree_emd_bruteforce,
)


@dataclass
class ExperimentConfig:
    mode: str = HYPERCUBE
    n: int = 60
    s: int = 3
    d: int = 32
    delta: int = 8
    generator: str = "clustered"      # clustered | planted | uniform
    clusters: int = 10
    cluster_radius: int = 1
    near_budget: int = 4
    far_margin: float = 5.0
    n_queries: int = 50
    r: float = 4.0
    c: Optional[float] = None         # acceptance-filter override for ann
    p1: float = 0.8
    p2: float = 0.2
    seed: int = 0
    trials: int = 2000
    out: Optional[str] = None
    figures: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        for name in ("n", "s", "d", "delta", "clusters", "n_queries", "trials"):
            if getattr(self, name) < 1:
                raise ValueError(f"config field {name} must be positive")
        if not 0.0 < self.p2 < self.p1 < 1.0:
            raise ValueError("config requires 0 < p2 < p1 < 1")

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTION_KEYS = {
    "params": {"r": "r", "c": "c", "p1": "p1", "p2": "p2"},
    "generator": {"kind": "generator", "clusters": "clusters",
                  "radius": "cluster_radius", "near": "near_budget",
                  "margin": "far_margin", "queries": "n_queries"},
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    kwargs = {}
    for key, value in (raw or {}).items():
        if key in _SECTION_KEYS:
            if not isinstance(value, dict):
                raise ValueError(f"config section {key!r} must hold key: value pairs")
            for sub, subval in value.items():
                target = _SECTION_KEYS[key].get(sub)
                if target is None:
                    raise ValueError(f"unknown config key {key}.{sub}")
                kwargs[target] = subval
        elif key in fields:
            kwargs[key] = value
        else:
            raise ValueError(f"unknown config key {key!r}")
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a mapping of key: value pairs")
    return config_from_dict(raw)


def gen_synthetic(cfg: ExperimentConfig) -> GeneratedData:
    """Dataset (plus planted queries when requested) for a config."""
    rng = stream(cfg.seed, "gen", cfg.generator)
    if cfg.generator == "uniform":
        return gen_uniform(cfg.n, cfg.s, cfg.d, cfg.mode, cfg.delta, rng)
    if cfg.generator == "clustered":
        return gen_clustered(cfg.n, cfg.s, cfg.d, cfg.mode, cfg.delta,
                             cfg.clusters, cfg.cluster_radius, rng)
    if cfg.generator == "planted":
        if cfg.mode != HYPERCUBE:
            raise ValueError("planted benchmarks are hypercube-mode only")
        return gen_planted(cfg.n, cfg.s, cfg.d, cfg.clusters, cfg.cluster_radius,
                           cfg.near_budget, cfg.far_margin, cfg.n_queries, rng)
    raise ValueError(f"unknown generator {cfg.generator!r}")


# -- collision suite ----------------------------------------------------------


def run_collision_suite(cfg: ExperimentConfig) -> Report:
    report = Report(seed=cfg.seed, config=cfg.as_dict())
    rng = stream(cfg.seed, "collisions")
    trials = cfg.trials
    d, width = cfg.d, 10.0

    # zero-distance sanity: identical inputs always collide
    a = rng.uniform(0, 5, size=d)
    axes = rng.integers(0, d, size=trials)
    offs = rng.uniform(0, width, size=trials)
    same = float(np.mean(grid_cells_batch(axes, offs, width, a)
                         == grid_cells_batch(axes, offs, width, a.copy())))
    report.add(StatsRecord("sanity/zero_distance_collision", same, 0.0, 1.0,
                           "==", trials, slack=0.0))

    # single-axis law at three distances
    for dist in (width / 8, width / 3, width / 1.5):
        b = a.copy()
        gaps = rng.dirichlet(np.ones(d)) * dist
        b = a + gaps
        axes = rng.integers(0, d, size=trials)
        offs = rng.uniform(0, width, size=trials)
        rate = float(np.mean(grid_cells_batch(axes, offs, width, a)
                             != grid_cells_batch(axes, offs, width, b)))
        bound = dist / (d * width)
        report.add(StatsRecord(f"grid_law/dist_{dist:.3g}", rate,
                               binomial_sigma(bound, trials), bound, "==",
                               trials))

    # d-fold concatenation: dist/(2W) <= split <= dist/W
    dist = width / 2
    b = a + rng.dirichlet(np.ones(d)) * dist
    axes = rng.integers(0, d, size=(trials, d))
    offs = rng.uniform(0, width, size=(trials, d))
    cells_a = np.ceil((a[axes] + offs) / width)
    cells_b = np.ceil((b[axes] + offs) / width)
    rate = float(np.mean((cells_a != cells_b).any(axis=1)))
    lo, hi = dist / (2 * width), dist / width
    report.add(StatsRecord("grid_concat/lower", rate, binomial_sigma(lo, trials),
                           lo, ">=", trials))
    report.add(StatsRecord("grid_concat/upper", rate, binomial_sigma(hi, trials),
                           hi, "<=", trials))

    # per-bit sign law: kappa/(4W) <= flip <= kappa/(2W)
    s, c, tau = cfg.s, 4.0, width / 4.0
    f = sample_threshold_map(s=s, c=c, tau=tau, delta=0.1,
                             seed=cfg.seed + 1, d=d)
    kappa = f.cell_width / 4
    b = a + rng.dirichlet(np.ones(d)) * kappa
    bits = min(f.bits, max(trials, 4000))
    fa = f.apply_element(a)[:bits]
    fb = f.apply_element(b)[:bits]
    rate = float(np.mean(fa != fb))
    lo, hi = kappa / (4 * f.cell_width), kappa / (2 * f.cell_width)
    report.add(StatsRecord("threshold_bit/lower", rate, binomial_sigma(lo, bits),
                           lo, ">=", bits))
    report.add(StatsRecord("threshold_bit/upper", rate, binomial_sigma(hi, bits),
                           hi, "<=", bits))

    # level-indexed hash separation law at every level
    levels = tree_depth_levels(cfg.d)
    x = PointSet(rng.integers(0, 2, size=(cfg.s, cfg.d)))
    y_elems = x.elements.copy().reshape(-1)
    y_elems[rng.choice(cfg.s * cfg.d, size=4, replace=False)] ^= 1
    y = PointSet(y_elems.reshape(cfg.s, cfg.d))
    dist = emd_exact(x, y).cost
    hwidth = dist * 8.0
    draws = max(200, trials // 4)
    for level in range(levels + 1):
        splits = sum(
            dind_eval(h, x) != dind_eval(h, y)
            for h in (sample_dind_hash(hwidth, level, cfg.seed + 31 * level + t,
                                       cfg.d) for t in range(draws)))
        bound = dist / hwidth
        report.add(StatsRecord(f"dind_law/level_{level}", splits / draws,
                               binomial_sigma(bound, draws), bound, "<=", draws))

    # l1 LSH close and far laws on sparse vectors
    gamma = 10.0
    v = SparseVector({b"a": 1.0, b"b": 2.0})
    w_close = SparseVector({b"a": 1.0 + gamma / 20, b"b": 2.0 + gamma / 20})
    w_far = SparseVector({b"a": 1.0 + 2.5 * gamma, b"b": 2.0 + 2.5 * gamma})
    n_draws = max(1000, trials)
    split = collide = 0
    for t in range(n_draws):
        lsh = sample_l1_lsh(gamma, seed=cfg.seed + 17 * t)
        split += l1_lsh_eval(lsh, v) != l1_lsh_eval(lsh, w_close)
        collide += l1_lsh_eval(lsh, v) == l1_lsh_eval(lsh, w_far)
    report.add(StatsRecord("l1_lsh/close_split", split / n_draws,
                           binomial_sigma(0.1, n_draws), 0.1, "<=", n_draws))
    far_bound = math.exp(-5.0)
    report.add(StatsRecord("l1_lsh/far_collide", collide / n_draws,
                           binomial_sigma(far_bound, n_draws), far_bound, "<=",
                           n_draws))
    return report


# -- distortion suite ---------------------------------------------------------


def run_distortion_suite(cfg: ExperimentConfig) -> Report:
    report = Report(seed=cfg.seed, config=cfg.as_dict())
    rng = stream(cfg.seed, "distortion")
    s = min(cfg.s, 3)
    data = gen_clustered(cfg.n, s, cfg.d, HYPERCUBE, None, cfg.clusters,
                         cfg.cluster_radius, rng)
    pts = data.dataset.points
    n_draws = min(max(cfg.trials // 10, 50), 400)
    delta = 0.05
    dd_ratios, di_ratios = [], []
    contracted = identical_violations = 0
    for t in range(n_draws):
        i, j = rng.integers(0, len(pts), size=2)
        x, y = pts[int(i)], pts[int(j)]
        exact = emd_exact(x, y).cost
        draw = build_sampletree(data.dataset, m=8, delta=delta,
                                seed=cfg.seed + 101 * t)
        dd = tree_emd_bruteforce(draw, x, y)
        if exact == 0:
            # identical pairs: excluded from ratios, never contracted
            identical_violations += dd < 0
            continue
        indep = QuadTree.build(np.zeros((0, cfg.d), dtype=np.uint8),
                               indep_scale=draw.scale, seed=cfg.seed + 101 * t + 1)
        di = tree_emd_indep(indep, x, y)
        dd_ratios.append(dd / exact)
        di_ratios.append(di / exact)
        contracted += dd < exact
    wins = int(np.sum(np.array(dd_ratios) < np.array(di_ratios)))
    losses = int(np.sum(np.array(dd_ratios) > np.array(di_ratios)))
    pvalue = sstats.binomtest(wins, max(wins + losses, 1), 0.5,
                              alternative="greater").pvalue
    n_rated = len(dd_ratios)
    report.add(StatsRecord("distortion/identical_pair_violations",
                           identical_violations, 0.0, 0.0, "<=", n_draws,
                           slack=0.0))
    report.add(StatsRecord("distortion/sign_test_p", pvalue, 0.0, 0.05, "<=",
                           n_rated, slack=0.0,
                           extras={"mean_data_dep": float(np.mean(dd_ratios)),
                                   "mean_data_ind": float(np.mean(di_ratios)),
                                   "wins": wins, "losses": losses}))
    report.add(StatsRecord("distortion/contraction_rate",
                           contracted / max(n_rated, 1),
                           binomial_sigma(delta, max(n_rated, 1)), delta, "<=",
                           n_rated))
    return report


def tree_emd_indep(tree: QuadTree, x: PointSet, y: PointSet) -> float:
    """Exact matching under a (data-independent) tree metric, small s only."""
    import itertools

    pair = np.array([[tree.tree_distance(a, b) for b in y.elements]
                     for a in x.elements])
    idx = range(x.s)
    return float(min(sum(pair[i, p] for i, p in zip(idx, perm))
                     for perm in itertools.permutations(idx)))


# -- ann suite ----------------------------------------------------------------


def run_ann_suite(cfg: ExperimentConfig) -> Report:
    report = Report(seed=cfg.seed, config=cfg.as_dict())
    gen_cfg = dataclasses.replace(cfg, generator="planted", mode=HYPERCUBE)
    data = gen_synthetic(gen_cfg)
    accept = None if cfg.c is None else cfg.c * cfg.r
    index = build_index(data.dataset, r=cfg.r, p1=cfg.p1, p2=cfg.p2,
                        seed=cfg.seed + 1, accept_radius=accept)
    hits = invalid = 0
    strict_hits = 0
    answer_dists = []
    for qi, q in enumerate(data.queries):
        answer, _ = query_with_stats(index, q)
        if answer is None:
            continue
        hits += 1
        dist = emd_exact(answer, q).cost
        answer_dists.append(dist)
        if dist > index.accept_radius:
            invalid += 1
        if dist <= cfg.far_margin * cfg.r:
            strict_hits += 1
    n_q = len(data.queries)
    recall = hits / n_q
    report.add(StatsRecord("ann/recall", recall, binomial_sigma(0.9, n_q), 0.9,
                           ">=", n_q,
                           extras={"strict_within_margin": strict_hits / n_q,
                                   "mean_answer_dist":
                                       float(np.mean(answer_dists))
                                       if answer_dists else -1.0}))
    report.add(StatsRecord("ann/invalid_answers", invalid, 0.0, 0.0, "<=", n_q,
                           slack=0.0))

    uniform = gen_uniform(cfg.n, cfg.s, cfg.d, HYPERCUBE, None,
                          stream(cfg.seed, "ann-uniform"))
    uindex = build_index(uniform.dataset, r=cfg.r, p1=cfg.p1, p2=cfg.p2,
                         seed=cfg.seed + 2, accept_radius=accept)
    rng = stream(cfg.seed, "ann-far-queries")
    scans = []
    for _ in range(n_q):
        q = PointSet(rng.integers(0, 2, size=(cfg.s, cfg.d)))
        _, st = query_with_stats(uindex, q)
        scans.append(st.leaf_scans)
    bound = 4.0 * (uindex.k + cfg.n * cfg.p2**uindex.k)
    report.add(StatsRecord("ann/mean_leaf_scans", float(np.mean(scans)), 0.0,
                           bound, "<=", n_q, slack=0.0,
                           extras={"k": uindex.k,
                                   "repetitions": uindex.repetitions}))
    return report
