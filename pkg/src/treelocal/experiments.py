"""Experiment recipes.

Each recipe takes a validated configuration and a :class:`Pool`, draws
replicas block by block, and returns output tables plus the
:class:`TestReport` verdicts. Block ``i`` of stream ``s`` always uses the same
random stream, so tables depend on the configuration alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from treelocal.barrier import (
    BarrierProfile,
    ballot_asymptotic,
    ballot_survivors,
    cdf_curve_from_samples,
    extend_curves,
    q_weights,
    reflection_formula,
)
from treelocal.errors import CapacityError, DomainError
from treelocal.extremal import (
    extract_structured,
    intensity_totals,
    intermediate_pair_event,
    maximizer_scales,
)
from treelocal.gff import brw_max_samples, centering, sample_gff_values
from treelocal.isomorphism import (
    couple_values,
    coupling_residual,
    enumerate_sign_law,
    sample_signs_batch,
    sign_law_tv,
)
from treelocal.local_time import (
    sample_leafstart_values,
    sample_root_values,
    simulate_ctmc_values,
)
from treelocal.parallel import Pool, Task, tasks
from treelocal.serialize import CURVE_COLUMNS, curve_rows
from treelocal.stats import TestReport, fit_kappa, ks_stat, laplace_mixture, tail_slope
from treelocal.tree import ROOT, TreeShape, ball_distance, leaf_path, subtree_index_map

COMMON = {"seed": 0, "workers": 1, "outdir": "results"}


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[list] = field(default_factory=list)


@dataclass
class Result:
    tables: dict[str, Table]  # "main" goes to <experiment>-<seed>.csv
    reports: list[TestReport]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)


@dataclass(frozen=True)
class Recipe:
    name: str
    run: Callable[[dict, Pool], Result]
    defaults: dict
    summary: str


class ExperimentConfig(dict):
    """Validated parameters of one run: common keys plus the recipe's own."""

    def __init__(self, experiment: str, params: dict | None = None):
        if experiment not in RECIPES:
            raise DomainError(f"unknown experiment {experiment!r}")
        recipe = RECIPES[experiment]
        merged = {**COMMON, **recipe.defaults}
        for key, val in (params or {}).items():
            key = key.replace("-", "_")
            if key not in merged:
                raise DomainError(f"unknown parameter {key!r} for {experiment}")
            merged[key] = val
        super().__init__(merged)
        self.experiment = experiment
        self._validate()

    def _validate(self) -> None:
        seed = self["seed"]
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
            raise DomainError("seed must be an integer in [0, 2**64)")
        for key in ("workers", "block"):
            if key in self and (not isinstance(self[key], int) or self[key] < 1):
                raise DomainError(f"{key} must be a positive integer")
        for key, val in self.items():
            if key.endswith("replicas") and (not isinstance(val, int) or isinstance(val, bool) or val < 1):
                raise DomainError(f"{key} must be an integer >= 1")
        if self.get("b") is not None and (not isinstance(self["b"], int) or self["b"] < 2):
            raise DomainError("b must be an integer >= 2")
        if "n" in self and (not isinstance(self["n"], int) or self["n"] < 1):
            raise DomainError("n must be an integer >= 1")


def run_experiment(config: ExperimentConfig, pool: Pool | None = None) -> Result:
    recipe = RECIPES[config.experiment]
    if pool is None:
        with Pool(config["workers"]) as p:
            return recipe.run(config, p)
    return recipe.run(config, pool)


def _report(cfg, name, statistic, threshold, note="", **sizes) -> TestReport:
    return TestReport(name, float(statistic), float(threshold), sizes, cfg["seed"], note)


def _stack(parts, axis=0):
    return np.concatenate(parts, axis=axis)


# -- coupling-identity ---------------------------------------------------------


def _coupling_block(task: Task, b: int, n: int, t: float, k: int):
    rng = task.rng()
    shape = TreeShape(b, n)
    L = sample_root_values(shape, t, task.size, rng)
    h = sample_gff_values(shape, task.size, rng)
    ht, sig = couple_values(shape, L, h, k, rng)
    res = coupling_residual(shape, L, h, ht, k)
    top = shape.level_offset(n - k + 1)
    same_top = np.all(ht[:, :top].view(np.int64) == h[:, :top].view(np.int64), axis=1)
    M = subtree_index_map(shape, n - k)
    z, x = M[:, :1], M[:, 1:]
    v = ht[:, x] - ht[:, z] + np.sqrt(L[:, z])
    scale = 1e-9 * (1.0 + np.abs(ht[:, z]) + np.sqrt(L[:, z]))
    bad = (np.abs(v) > scale) & (np.sign(v) != sig[:, x])
    signs_ok = ~bad.reshape(task.size, -1).any(axis=1)
    return res, same_top, signs_ok


def run_coupling_identity(cfg, pool: Pool) -> Result:
    main = Table(("b", "t", "k", "replica", "max_rel_residual", "top_equal", "signs_match"))
    reports = []
    bs = [cfg["b"]] if cfg["b"] is not None else cfg["bs"]
    combos = [(b, t, k) for b in bs for t in cfg["ts"] for k in (cfg["ks"] or [cfg["n"]])]
    for stream, (b, t, k) in enumerate(combos):
        k = cfg["n"] if k == "n" else int(k)
        parts = pool.map(_coupling_block, tasks(cfg["seed"], stream, cfg["replicas"], cfg["block"]), b, cfg["n"], t, k)
        res = _stack([p[0] for p in parts])
        top = _stack([p[1] for p in parts])
        sok = _stack([p[2] for p in parts])
        for i in range(res.size):
            main.rows.append([b, t, k, i, res[i], top[i], sok[i]])
        tag = f"b={b} n={cfg['n']} t={t} k={k}"
        reports.append(_report(cfg, f"coupling residual {tag}", res.max(), cfg["tolerance"], replicas=res.size))
        reports.append(_report(cfg, f"coupling structure violations {tag}", np.sum(~top | ~sok), 0, replicas=res.size))
    return Result({"main": main}, reports)


# -- signlaw-enum ----------------------------------------------------------------


def _signlaw_block(task: Task, max_vertices: int, draws: int, chunk: int):
    rng = task.rng()
    V = int(rng.integers(2, max_vertices + 1))
    parents = [-1] + [int(rng.integers(0, i)) for i in range(1, V)]
    y = np.abs(rng.normal(0.0, rng.uniform(0.2, 3.0), V))
    if rng.random() < 0.2:
        y[int(rng.integers(1, V))] = 0.0
    configs, probs = enumerate_sign_law(parents, y, y[0])
    samples = []
    for lo in range(0, draws, chunk):
        m = min(chunk, draws - lo)
        samples.append(sample_signs_batch(parents, np.tile(y, (m, 1)), rng))
    tv = sign_law_tv(np.concatenate(samples), configs, probs)
    return V, parents, y, tv


def run_signlaw_enum(cfg, pool: Pool) -> Result:
    main = Table(("instance", "vertices", "parents", "y", "tv"))
    parts = pool.map(
        _signlaw_block, tasks(cfg["seed"], 0, cfg["replicas"], 1), cfg["max_vertices"], cfg["draws"], cfg["chunk"]
    )
    tvs = []
    for i, (V, par, y, tv) in enumerate(parts):
        main.rows.append([i, V, " ".join(map(str, par)), " ".join(repr(float(a)) for a in y), tv])
        tvs.append(tv)
    rep = _report(cfg, "sign law TV (max over instances)", max(tvs), cfg["tolerance"], instances=len(tvs), draws=cfg["draws"])
    return Result({"main": main}, [rep])


# -- coupled-law -----------------------------------------------------------------


def _coupled_law_block(task: Task, b: int, n: int, t: float, k: int):
    rng = task.rng()
    shape = TreeShape(b, n)
    L = sample_root_values(shape, t, task.size, rng)
    h = sample_gff_values(shape, task.size, rng)
    ht, _ = couple_values(shape, L, h, k, rng)
    M = subtree_index_map(shape, n - k)
    # increment from each level-(n-k) root to the first leaf of its subtree
    incr = ht[:, M[:, -(b**k)]] - ht[:, M[:, 0]]
    return ht[:, shape.leaf_slice], incr


def _gff_leaves_block(task: Task, b: int, n: int):
    return sample_gff_values(TreeShape(b, n), task.size, task.rng(), leaves_only=True)


def run_coupled_law(cfg, pool: Pool) -> Result:
    b, n, t = cfg["b"], cfg["n"], cfg["t"]
    shape = TreeShape(b, n)
    main = Table(("k", "leaf_i", "leaf_j", "covariance", "target"))
    ks_table = Table(("k", "leaf", "ks"))
    reports = []
    ref = _stack(pool.map(_gff_leaves_block, tasks(cfg["seed"], 0, cfg["replicas"], cfg["block"]), b, n))
    idx = np.arange(shape.num_leaves)
    target = 0.5 * (n - ball_distance(shape, idx[:, None], idx[None, :]))
    for stream, k in enumerate(cfg["ks"] or [n], start=1):
        k = n if k == "n" else int(k)
        parts = pool.map(_coupled_law_block, tasks(cfg["seed"], stream, cfg["replicas"], cfg["block"]), b, n, t, k)
        leaves = _stack([p[0] for p in parts])
        incr = _stack([p[1] for p in parts])
        cov = np.cov(leaves, rowvar=False)
        for i in range(shape.num_leaves):
            for j in range(i, shape.num_leaves):
                main.rows.append([k, i, j, cov[i, j], target[i, j]])
        ks = [ks_stat(leaves[:, i], ref[:, i]) for i in range(shape.num_leaves)]
        ks_table.rows.extend([k, i, v] for i, v in enumerate(ks))
        tag = f"b={b} n={n} t={t} k={k}"
        R = leaves.shape[0]
        reports.append(_report(cfg, f"coupled leaf covariance max deviation {tag}", np.abs(cov - target).max(), cfg["cov_tolerance"], replicas=R))
        reports.append(_report(cfg, f"coupled leaf KS vs GFF max {tag}", max(ks), cfg["ks_tolerance"], replicas=R))
        if incr.shape[1] >= 2:
            r = np.corrcoef(incr[:, 0], incr[:, 1])[0, 1]
            reports.append(_report(cfg, f"cross-subtree increment correlation z {tag}", abs(r) * math.sqrt(R), 3.0, replicas=R))
    return Result({"main": main, "ks": ks_table}, reports)


# -- sampler-equivalence ---------------------------------------------------------


def _root_leaves_block(task: Task, b: int, n: int, t: float):
    return sample_root_values(TreeShape(b, n), t, task.size, task.rng(), leaves_only=True)


def _ctmc_root_block(task: Task, b: int, n: int, t: float):
    shape = TreeShape(b, n)
    lt, jumps = simulate_ctmc_values(shape, ROOT, "accumulate", task.size, task.rng(), t=t)
    return lt[:, shape.leaf_slice], lt[:, 0], jumps


def _cov_with_se(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xc = x - x.mean(axis=0)
    R = x.shape[0]
    cov = xc.T @ xc / (R - 1)
    sq = (xc * xc).T @ (xc * xc) / R
    var = np.maximum(sq - cov**2, 0.0)
    return cov, np.sqrt(var / R)


def run_sampler_equivalence(cfg, pool: Pool) -> Result:
    b, n, t = cfg["b"], cfg["n"], cfg["t"]
    shape = TreeShape(b, n)
    hier = _stack(pool.map(_root_leaves_block, tasks(cfg["seed"], 0, cfg["replicas"], cfg["block"]), b, n, t))
    parts = pool.map(_ctmc_root_block, tasks(cfg["seed"], 1, cfg["replicas"], cfg["block"]), b, n, t)
    ctmc = _stack([p[0] for p in parts])
    root = _stack([p[1] for p in parts])
    jumps = _stack([p[2] for p in parts])
    main = Table(("leaf", "mean_hier", "mean_ctmc", "ks"))
    ks = [ks_stat(hier[:, i], ctmc[:, i]) for i in range(shape.num_leaves)]
    for i in range(shape.num_leaves):
        main.rows.append([i, hier[:, i].mean(), ctmc[:, i].mean(), ks[i]])
    c1, s1 = _cov_with_se(hier)
    c2, s2 = _cov_with_se(ctmc)
    z = np.abs(c1 - c2) / np.sqrt(s1**2 + s2**2)
    covt = Table(("leaf_i", "leaf_j", "cov_hier", "cov_ctmc", "z"))
    for i in range(shape.num_leaves):
        for j in range(i, shape.num_leaves):
            covt.rows.append([i, j, c1[i, j], c2[i, j], z[i, j]])
    R = hier.shape[0]
    tag = f"b={b} n={n} t={t}"
    reports = [
        _report(cfg, f"per-leaf KS hierarchical vs CTMC max {tag}", max(ks), cfg["ks_tolerance"], replicas=R),
        _report(cfg, f"leaf-pair covariance max z {tag}", z.max(), cfg["cov_z"], replicas=R),
        _report(cfg, f"CTMC root local time deviation from t {tag}", np.abs(root - t).max(), 0.0, replicas=R, mean_jumps=float(jumps.mean())),
    ]
    return Result({"main": main, "covariance": covt}, reports)


# -- leafstart-law ---------------------------------------------------------------


def _ctmc_leafstart_block(task: Task, b: int, n: int):
    shape = TreeShape(b, n)
    lt, _ = simulate_ctmc_values(shape, shape.leaf(0), "hit_root", task.size, task.rng())
    return lt[:, leaf_path(shape)], lt[:, shape.leaf_slice], lt[:, 0]


def _hier_leafstart_block(task: Task, b: int, n: int):
    shape = TreeShape(b, n)
    vals = sample_leafstart_values(shape, task.size, task.rng())
    return vals[:, leaf_path(shape)], vals[:, shape.leaf_slice], vals[:, 0]


def _support_violations(shape: TreeShape, leaves: np.ndarray, root: np.ndarray) -> int:
    outside = leaves[:, shape.num_leaves // shape.b :]
    return int(np.sum((outside != 0).any(axis=1) | (root != 0)))


def run_leafstart_law(cfg, pool: Pool) -> Result:
    b, n = cfg["b"], cfg["n"]
    shape = TreeShape(b, n)
    R = cfg["replicas"]
    c = pool.map(_ctmc_leafstart_block, tasks(cfg["seed"], 0, R, cfg["block"]), b, n)
    h = pool.map(_hier_leafstart_block, tasks(cfg["seed"], 1, R, cfg["block"]), b, n)
    cpath, cleaf = _stack([p[0] for p in c]), _stack([p[1] for p in c])
    hpath, hleaf = _stack([p[0] for p in h]), _stack([p[1] for p in h])
    main = Table(("quantity", "index", "mean_ctmc", "mean_hier", "ks"))
    reports = []
    for k in cfg["path_levels"]:
        x = cpath[:, k]
        ks_exp = ks_stat(x, cdf=lambda s, k=k: -np.expm1(-np.maximum(s, 0.0) / k))
        main.rows.append(["path_vs_exponential", k, x.mean(), hpath[:, k].mean(), ks_exp])
        reports.append(_report(cfg, f"CTMC path local time vs Exp(mean {k}) KS, b={b} n={n}", ks_exp, cfg["ks_tolerance"], replicas=R))
    leaf_ks = []
    for i in range(shape.num_leaves):
        d = ks_stat(cleaf[:, i], hleaf[:, i])
        leaf_ks.append(d)
        main.rows.append(["leaf", i, cleaf[:, i].mean(), hleaf[:, i].mean(), d])
    reports.append(_report(cfg, f"per-leaf KS hierarchical vs CTMC max, b={b} n={n}", max(leaf_ks), cfg["ks_tolerance"], replicas=R))

    stream = 2
    for sb in cfg["support_bs"]:
        sshape = TreeShape(sb, cfg["support_n"])
        for name, fn in (("CTMC", _ctmc_leafstart_block), ("hierarchical", _hier_leafstart_block)):
            parts = pool.map(fn, tasks(cfg["seed"], stream, cfg["support_replicas"], cfg["block"]), sb, cfg["support_n"])
            stream += 1
            viol = _support_violations(sshape, _stack([p[1] for p in parts]), _stack([p[2] for p in parts]))
            main.rows.append([f"support_violations_{name}", sb, 0.0, 0.0, viol])
            reports.append(
                _report(cfg, f"leaf-start support violations ({name}), b={sb} n={cfg['support_n']}", viol, 0, replicas=cfg["support_replicas"])
            )
    return Result({"main": main}, reports)


# -- ballot-sweep -----------------------------------------------------------------


def _ballot_block(task: Task, k: int, r: float, u: float, barriers: list):
    return ballot_survivors(k, r, u, barriers, task.size, task.rng())


def _pooled(counts: np.ndarray, N: int) -> list[tuple[float, float]]:
    p = counts / N
    return [(float(pi), math.sqrt(pi * (1 - pi) / N)) for pi in p]


def run_ballot_sweep(cfg, pool: Pool) -> Result:
    k, r, u = cfg["k"], cfg["r"], cfg["u"]
    gamma = BarrierProfile(k, cfg["a"], cfg["sigma"]).values()
    labels = ["profile", "neg_profile", "zero"]
    N = cfg["replicas"]
    counts = sum(pool.map(_ballot_block, tasks(cfg["seed"], 0, N, cfg["block"]), k, r, u, [gamma, -gamma, 0.0]))
    est = _pooled(counts, N)
    asym = ballot_asymptotic(k, r, u)
    main = Table(("barrier", "k", "r", "u", "estimate", "stderr", "reference"))
    for lab, (p, se) in zip(labels, est):
        main.rows.append([lab, k, r, u, p, se, asym])

    hk, hr, hu, hN = cfg["hom_k"], cfg["hom_r"], cfg["hom_u"], cfg["hom_replicas"]
    hcounts = sum(pool.map(_ballot_block, tasks(cfg["seed"], 1, hN, cfg["block"]), hk, hr, hu, [0.0, -1e9]))
    (p0, se0), (pv, _) = _pooled(hcounts, hN)
    refl = reflection_formula(hk, hr, hu)
    main.rows.append(["zero", hk, hr, hu, p0, se0, refl])
    main.rows.append(["vacuous", hk, hr, hu, pv, 0.0, 1.0])

    (pp, _), (pn, _), (pz, _) = est
    eps = cfg["eps"]
    reports = [
        _report(cfg, f"ballot bracket |p/(4ru/k) - 1|, k={k} r={r} u={u} a={cfg['a']} sigma={cfg['sigma']}", abs(pp / asym - 1), cfg["bracket_tolerance"], N=N),
        _report(cfg, f"reflection |p - (1 - exp(-4ru/k))|, k={hk} r={hr} u={hu}", abs(p0 - refl), 3 * se0 + cfg["discretization_allowance"], N=hN),
        _report(cfg, f"crossing rarity P(above -gamma, not above +gamma), k={k} r={r} u={u}", pn - pp, eps * r * u / k, N=N),
        _report(cfg, "vacuous barrier 1 - p", 1 - pv, 0.0, N=hN),
        _report(cfg, "barrier monotonicity violation", max(0.0, pp - pz, pz - pn), 0.0, N=N),
    ]
    return Result({"main": main}, reports)


# -- max-tail -----------------------------------------------------------------------


def _max_sqrt_block(task: Task, b: int, n: int, t: float):
    leaves = sample_root_values(TreeShape(b, n), t, task.size, task.rng(), leaves_only=True)
    return np.sqrt(leaves.max(axis=1))


def max_tail_report(cfg, samples: np.ndarray) -> tuple[TestReport, dict]:
    target = 2 * math.sqrt(math.log(cfg["b"]))
    window = tuple(cfg["window"])
    name = f"max-tail rate vs 2 sqrt(log b), window {window}"
    try:
        fit = tail_slope(samples, window)
    except CapacityError as exc:
        return _report(cfg, name, math.inf, cfg["tolerance"], note=str(exc), replicas=len(samples)), {}
    rel = abs(fit.rate - target) / target
    diag = {"plain_slope": fit.slope, "rate": fit.rate, "target": target, "exceedances": fit.exceedances}
    return _report(cfg, name, rel, cfg["tolerance"], replicas=len(samples)), diag


def run_max_tail(cfg, pool: Pool) -> Result:
    b, n, t = cfg["b"], cfg["n"], cfg["t"]
    c = centering(b, n, t)
    M = _stack(pool.map(_max_sqrt_block, tasks(cfg["seed"], 0, cfg["replicas"], cfg["block"]), b, n, t))
    centered = M - (c.a_n + math.sqrt(t))
    main = Table(("replica", "centered_max"), [[i, v] for i, v in enumerate(centered)])
    rep, diag = max_tail_report(cfg, centered)
    fit = Table(("quantity", "value"), [[k, v] for k, v in diag.items()])
    return Result({"main": main, "fit": fit}, [rep])


# -- clustering -------------------------------------------------------------------


def _cluster_block(task: Task, b: int, n: int, t: float, threshold: float, lo: int, hi: int):
    shape = TreeShape(b, n)
    s = np.sqrt(sample_root_values(shape, t, task.size, task.rng(), leaves_only=True))
    ev = intermediate_pair_event(shape, s, threshold, lo, hi)
    return ev, (s >= threshold).sum(axis=1), s.max(axis=1)


def run_clustering(cfg, pool: Pool) -> Result:
    b, t, lam, kd = cfg["b"], cfg["t"], cfg["lam"], cfg["kdist"]
    main = Table(("n", "replica", "pair_event", "level_set_size", "max_sqrt"))
    probs = {}
    for stream, n in enumerate(cfg["ns"]):
        thr = centering(b, n).m_n - lam
        parts = pool.map(_cluster_block, tasks(cfg["seed"], stream, cfg["replicas"], cfg["block"]), b, n, t, thr, kd, n - kd)
        ev = _stack([p[0] for p in parts])
        size = _stack([p[1] for p in parts])
        mx = _stack([p[2] for p in parts])
        main.rows.extend([n, i, ev[i], size[i], mx[i]] for i in range(ev.size))
        probs[n] = (float(ev.mean()), math.sqrt(ev.mean() * (1 - ev.mean()) / ev.size))
    reports = []
    nmax = max(cfg["ns"])
    reports.append(_report(cfg, f"clustering P(pair at distance [{kd}, n-{kd}]) at n={nmax}", probs[nmax][0], cfg["prob_threshold"], replicas=cfg["replicas"]))
    ns = sorted(cfg["ns"])
    for a, c in zip(ns, ns[1:]):
        allow = cfg["trend_se"] * math.hypot(probs[a][1], probs[c][1])
        reports.append(_report(cfg, f"clustering trend P(n={c}) - P(n={a})", probs[c][0] - probs[a][0], allow, replicas=cfg["replicas"]))
    return Result({"main": main}, reports)


# -- decorations ------------------------------------------------------------------


def _decor_block(task: Task, source: str, b: int, n: int, t: float, k: int, r: int, lo: float, hi: float):
    shape = TreeShape(b, n)
    rng = task.rng()
    if source == "local_time":
        vals = np.sqrt(sample_root_values(shape, t, task.size, rng, leaves_only=True))
        c = centering(b, n, t)
        cent = c.a_n + math.sqrt(t)
    else:
        vals = sample_gff_values(shape, task.size, rng, leaves_only=True)
        cent = centering(b, n).m_tilde_n
    es = extract_structured(shape, vals, k, cent, floor=lo, r=r, origin=source)
    keep = es.height <= hi
    return es.replica[keep] + task.offset, es.theta[keep], es.height[keep], es.profile[keep]


def run_decorations(cfg, pool: Pool) -> Result:
    b, n, t, k, r = cfg["b"], cfg["n"], cfg["t"], cfg["k"], cfg["r"]
    lo, hi = cfg["window"]
    main = Table(("source", "replica_id", "theta", "height", *[f"profile_{j}" for j in range(r)]))
    gaps = {}
    for stream, source in enumerate(("local_time", "gff")):
        parts = pool.map(_decor_block, tasks(cfg["seed"], stream, cfg["replicas"], cfg["block"]), source, b, n, t, k, r, lo, hi)
        for rep, th, ht, prof in parts:
            main.rows.extend([source, int(a), x, y, *p] for a, x, y, p in zip(rep, th, ht, prof))
        gaps[source] = _stack([p[3][:, 1] for p in parts])
    npts = min(len(g) for g in gaps.values())
    reports = [
        _report(cfg, f"decoration first-gap KS local time vs GFF, n={n} k={k}", ks_stat(gaps["local_time"], gaps["gff"]) if npts else math.inf, cfg["ks_tolerance"], points_lt=len(gaps["local_time"]), points_gff=len(gaps["gff"])),
        _report(cfg, "decoration point shortfall", max(0, cfg["min_points"] - npts), 0),
    ]
    return Result({"main": main}, reports)


# -- mass-law -----------------------------------------------------------------------


def _mass_block(task: Task, b: int, n: int, t: float, C: float):
    shape = TreeShape(b, n)
    leaves = sample_root_values(shape, t, task.size, task.rng(), leaves_only=True)
    return np.sqrt(leaves.max(axis=1)), intensity_totals(shape, leaves, C)


def run_mass_law(cfg, pool: Pool) -> Result:
    b, t, C, anchor = cfg["b"], cfg["t"], cfg["C"], cfg["anchor"]
    main = Table(("n", "replica", "max_sqrt", "total_mass"))
    curve = Table(("n", "u", "empirical_cdf", "laplace_mixture", "kappa"))
    reports, worst = [], {}
    for stream, n in enumerate(cfg["ns"]):
        parts = pool.map(_mass_block, tasks(cfg["seed"], stream, cfg["replicas"], cfg["block"]), b, n, t, C)
        M = _stack([p[0] for p in parts])
        Z = _stack([p[1] for p in parts])
        main.rows.extend([n, i, M[i], Z[i]] for i in range(M.size))
        mn = centering(b, n).m_n
        F = lambda u: float(np.mean(M <= mn + u))
        try:
            kappa = fit_kappa(Z, F(anchor), anchor, b)
        except CapacityError:
            kappa = math.nan
        disc, ses = [], []
        for u in cfg["us"]:
            fu = F(u)
            mix = laplace_mixture(Z, u, kappa, b)[0] if kappa == kappa else math.nan
            curve.rows.append([n, u, fu, mix, kappa])
            d = abs(fu - mix)
            disc.append(d if d == d else math.inf)
            ses.append(math.sqrt(fu * (1 - fu) / M.size))
            reports.append(_report(cfg, f"mass-law discrepancy n={n} u={u}", disc[-1], cfg["tolerance"], replicas=M.size))
        worst[n] = (max(disc), max(ses))
    ns = sorted(cfg["ns"])
    for a, c in zip(ns, ns[1:]):
        allow = cfg["trend_se"] * math.hypot(worst[a][1], worst[c][1])
        reports.append(_report(cfg, f"mass-law trend max discrepancy n={c} minus n={a}", worst[c][0] - worst[a][0], allow, replicas=cfg["replicas"]))
    return Result({"main": main, "curve": curve}, reports)


# -- q-scaling ------------------------------------------------------------------------


def _brw_restricted_block(task: Task, k: int, b: int):
    return brw_max_samples(k, True, task.size, task.rng(), b=b) - centering(b, k).m_tilde_n


def _q_block(task: Task, n: int, s: float, u: float, curves: dict, b: int):
    return q_weights(n, s, u, curves, task.size, task.rng(), b=b)


def run_q_scaling(cfg, pool: Pool) -> Result:
    b = cfg["b"]
    tgrid = np.linspace(*cfg["tgrid"])
    curves = {}
    for k in range(1, cfg["kmax"] + 1):
        samples = _stack(pool.map(_brw_restricted_block, tasks(cfg["seed"], k, cfg["curve_replicas"], cfg["curve_block"]), k, b))
        curves[k] = cdf_curve_from_samples(k, samples, tgrid)
    main = Table(("n", "u", "s", "estimate", "stderr", "scaled"))
    scaled = []
    for i, (n, u) in enumerate((n, u) for n in cfg["ns"] for u in cfg["us"]):
        full = extend_curves(curves, n)
        w = _stack(pool.map(_q_block, tasks(cfg["seed"], 1000 + i, cfg["replicas"], cfg["block"]), n, u, u, full, b))
        est, se = float(w.mean()), float(w.std(ddof=1) / math.sqrt(w.size)) if w.size > 1 else 0.0
        scaled.append(est * n / u)
        main.rows.append([n, u, u, est, se, scaled[-1]])
    ratio = max(scaled) / min(scaled) if min(scaled) > 0 else math.inf
    reports = [_report(cfg, "Q-mass n/u scaling band (max/min)", ratio, cfg["band"], replicas=cfg["replicas"], curve_replicas=cfg["curve_replicas"])]
    curve_table = Table(CURVE_COLUMNS, list(curve_rows(curves.values())))
    return Result({"main": main, "curves": curve_table}, reports)


# -- maximizer-scale ------------------------------------------------------------------


def _maximizer_block(task: Task, origin: str, b: int, n: int, t: float):
    shape = TreeShape(b, n)
    if origin == "leafstart":
        leaves = sample_leafstart_values(shape, task.size, task.rng(), leaves_only=True)
    else:
        leaves = sample_root_values(shape, t, task.size, task.rng(), leaves_only=True)
    positive = leaves.max(axis=1) > 0
    return np.argmax(leaves, axis=1), maximizer_scales(shape, leaves), positive


def run_maximizer_scale(cfg, pool: Pool) -> Result:
    b, n, origin = cfg["b"], cfg["n"], cfg["origin"]
    if origin not in ("leafstart", "root"):
        raise DomainError("origin must be 'leafstart' or 'root'")
    shape = TreeShape(b, n)
    parts = pool.map(_maximizer_block, tasks(cfg["seed"], 0, cfg["replicas"], cfg["block"]), origin, b, n, cfg["t"])
    idx = _stack([p[0] for p in parts])
    scale = _stack([p[1] for p in parts])
    pos = _stack([p[2] for p in parts])
    main = Table(("replica", "theta", "scale", "has_maximizer"))
    main.rows.extend([i, idx[i] / shape.num_leaves, scale[i], pos[i]] for i in range(idx.size))
    hist = Table(("scale", "count", "fraction"))
    valid = scale[pos]
    for j in range(-1, n):
        c = int(np.sum(valid == j))
        hist.rows.append([j, c, c / max(valid.size, 1)])
    reports = []
    if origin == "leafstart":
        viol = int(np.sum(pos & (idx >= shape.num_leaves // b)))
        reports.append(_report(cfg, f"leaf-start maximizer outside [0, 1/b), b={b} n={n}", viol, 0, replicas=idx.size))
    return Result({"main": main, "histogram": hist}, reports)


RECIPES: dict[str, Recipe] = {}


def _register(name: str, fn, summary: str, **defaults: Any) -> None:
    RECIPES[name] = Recipe(name, fn, defaults, summary)


_register(
    "coupling-identity", run_coupling_identity, "pointwise identity of the local-time/GFF coupling",
    n=8, b=None, bs=[2, 3], ts=[0.5, 4.0], ks=[2, "n"], replicas=1000, block=100, tolerance=1e-9,
)
_register(
    "signlaw-enum", run_signlaw_enum, "exact sign sampler vs enumeration on random small trees",
    replicas=100, max_vertices=7, draws=1_000_000, chunk=250_000, tolerance=0.01,
)
_register(
    "coupled-law", run_coupled_law, "law of the coupled field vs a direct GFF",
    b=2, n=5, t=2.0, ks=["n", 3], replicas=100_000, block=10_000, cov_tolerance=0.03, ks_tolerance=0.02,
)
_register(
    "sampler-equivalence", run_sampler_equivalence, "hierarchical local time vs event-driven walk",
    b=2, n=4, t=3.0, replicas=100_000, block=10_000, ks_tolerance=0.02, cov_z=3.0,
)
_register(
    "leafstart-law", run_leafstart_law, "leaf-start path law, sampler agreement and support",
    b=3, n=6, path_levels=[1, 3, 6], replicas=100_000, block=5_000, ks_tolerance=0.02,
    support_bs=[2, 3], support_n=6, support_replicas=10_000,
)
_register(
    "ballot-sweep", run_ballot_sweep, "bridge ballot probabilities against the barrier asymptotics",
    k=10_000, r=20.0, u=20.0, a=10.0, sigma=0.08, replicas=1_000_000, block=100_000,
    hom_k=400, hom_r=3.0, hom_u=3.0, hom_replicas=1_000_000,
    bracket_tolerance=0.10, discretization_allowance=0.01, eps=0.2,
)
_register(
    "max-tail", run_max_tail, "right-tail exponent of the centered maximum of sqrt(L_t)",
    b=2, n=14, t=5.0, replicas=100_000, block=1_000, window=[1.0, 2.5], tolerance=0.15,
)
_register(
    "clustering", run_clustering, "pairs of high points at intermediate distance",
    b=2, ns=[10, 14], t=5.0, lam=1.0, kdist=3, replicas=10_000, block=500, prob_threshold=0.05, trend_se=3.0,
)
_register(
    "decorations", run_decorations, "first canopy gap of local-time vs GFF local maxima",
    b=2, n=14, t=5.0, k=4, r=2, window=[-1.0, 1.0], replicas=10_000, block=500, ks_tolerance=0.05, min_points=3000,
)
_register(
    "mass-law", run_mass_law, "maximum law vs Laplace mixture of the intensity total",
    b=2, ns=[10, 14], t=5.0, C=1.0, anchor=1.0, us=[0.5, 1.5], replicas=10_000, block=1_000, tolerance=0.1, trend_se=3.0,
)
_register(
    "q-scaling", run_q_scaling, "n/u scaling of the Q-measure mass",
    b=2, kmax=12, curve_replicas=50_000, curve_block=5_000, tgrid=[-10.0, 12.0, 881],
    ns=[64, 128], us=[4.0, 8.0], replicas=100_000, block=25_000, band=4.0,
)
_register(
    "maximizer-scale", run_maximizer_scale, "scale of the maximizer location",
    b=2, n=12, t=5.0, origin="leafstart", replicas=10_000, block=1_000,
)
