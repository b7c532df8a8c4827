"""Sequential active-learning loop, metrics, replication, and persistence.

One replicate = draw ``init_points`` uniform inputs, fit the surrogate, then
repeat (select by acquisition -> observe -> append -> refit) until ``budget``
total observations, logging a DGSM-accuracy record after the initial fit and
after every iteration.  ``run_experiment`` runs many replicates with derived
seeds and aggregates mean +/- 2 SE per iteration.

Replicates are isolated: each derives all of its randomness from a single
integer seed, so they can run in any order (or concurrently in separate
processes) and produce identical records.  This module executes them
sequentially; the aggregation step is single-threaded either way.

External black boxes (functions not in the built-in catalog) are a future
extension point: ``run_loop`` only touches the problem through ``observe``,
so a wrapper object with ``dim``/``box``/``eval`` would slot in unchanged.
"""

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ._version import __version__ as _pkg_version
from .acquisitions import AcquisitionKind, evaluate_batch
from .dgsm import estimate_dgsm, ground_truth_dgsm
from .gp import Dataset, GlobalNodeCache, condition_on, fit
from .problems import make_problem, observe
from .qmc import SobolStream

__all__ = [
    "OptimizerSettings",
    "ExperimentConfig",
    "IterationRecord",
    "rmse",
    "ndcg",
    "optimize_acquisition",
    "run_loop",
    "run_experiment",
    "derive_replicate_seed",
    "csv_header",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class OptimizerSettings:
    """Inner-loop acquisition maximizer: candidate screen + local refinement."""

    candidates: int = 512
    refine: int = 8
    refine_maxiter: int = 30
    fd_step: float = 1e-4

    def __post_init__(self):
        if self.candidates < 1 or self.refine < 1:
            raise ValueError("candidates and refine must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    acquisition: AcquisitionKind
    init_points: int = 5
    budget: int = 35
    replicates: int = 50
    seed: int = 0
    dgsm_nodes: int = 4096
    truth_nodes: int = 65536
    noise_sd: float = 0.0
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    out_dir: str = None
    cache_dir: str = None

    def __post_init__(self):
        if self.init_points < 2:
            raise ValueError("init_points must be >= 2 (the surrogate needs two points)")
        if self.budget < self.init_points:
            raise ValueError("budget must be >= init_points")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.dgsm_nodes < 1 or self.truth_nodes < 1:
            raise ValueError("node counts must be >= 1")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")


@dataclass
class IterationRecord:
    replicate: int
    iteration: int
    x_selected: np.ndarray          # None at iteration 0 (initial design)
    y_observed: float
    rmse_raw: float
    rmse_abs: float
    rmse_sq: float
    ndcg_abs: float
    ndcg_sq: float
    fit_hyperparams: dict
    wall_time_ms: int


def rmse(estimate, truth):
    """Root mean squared error between two d-vectors."""
    e = np.asarray(estimate, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if e.shape != t.shape:
        raise ValueError("estimate and truth shapes differ")
    return float(np.sqrt(np.mean((e - t) ** 2)))


def ndcg(estimate, truth):
    """Normalized discounted cumulative gain of the estimated importance order.

    Dimensions are ranked by estimate descending (ties broken by dimension
    index ascending); position j contributes truth[dim at j] / log2(j+1).
    The score is normalized by the DCG of the true ordering, so 1 means the
    ranking is recovered perfectly; an all-equal truth makes any order ideal.
    """
    e = np.asarray(estimate, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if e.shape != t.shape:
        raise ValueError("estimate and truth shapes differ")
    d = e.shape[0]
    discount = 1.0 / np.log2(np.arange(d) + 2.0)
    order = np.lexsort((np.arange(d), -e))
    dcg = float(t[order] @ discount)
    ideal = float(np.sort(t)[::-1] @ discount)
    if ideal <= 0.0:
        return 1.0
    return float(min(max(dcg / ideal, 0.0), 1.0))


def _seed_from(seq):
    return int(seq.generate_state(1, np.uint64)[0])


def derive_replicate_seed(seed, replicate):
    """Integer seed for one replicate, stable across runs and orderings."""
    return _seed_from(np.random.SeedSequence(entropy=[int(seed), int(replicate)]))


def optimize_acquisition(model, kind, seed, settings=None):
    """Maximize an acquisition over the unit cube; deterministic given seed.

    Screens scrambled-Sobol candidates, then refines the best few jointly by
    bounded quasi-Newton ascent with central-difference gradients, and returns
    the best point seen (so the result never scores below the best raw
    candidate).  Global kinds draw their node set from the same seed.
    """
    if settings is None:
        settings = OptimizerSettings()
    if isinstance(kind, str):
        kind = AcquisitionKind.from_name(kind)
    if kind.tag == "QR":
        raise ValueError("QR selects points from the Sobol stream, not by optimization")
    d = model.data.dim
    s_cand, s_nodes = np.random.SeedSequence(int(seed)).spawn(2)
    cands = SobolStream(d, seed=_seed_from(s_cand)).next(settings.candidates)
    cache = None
    if kind.is_global:
        nodes = SobolStream(d, seed=_seed_from(s_nodes)).next(kind.global_nodes)
        cache = GlobalNodeCache(model, nodes)

    vals = evaluate_batch(kind, model, cands, cache)
    finite = np.isfinite(vals)
    if not np.any(finite):
        raise RuntimeError("acquisition optimization failed: every candidate value is non-finite")
    vals = np.where(finite, vals, -np.inf)

    n_ref = min(settings.refine, settings.candidates)
    top = np.argsort(-vals, kind="stable")[:n_ref]
    h = settings.fd_step

    def neg_total(flat):
        P = flat.reshape(n_ref, d)
        v = evaluate_batch(kind, model, P, cache)
        grad = np.zeros_like(P)
        for i in range(d):
            up = P.copy()
            dn = P.copy()
            up[:, i] = np.minimum(P[:, i] + h, 1.0)
            dn[:, i] = np.maximum(P[:, i] - h, 0.0)
            shifted = evaluate_batch(kind, model, np.vstack([up, dn]), cache)
            grad[:, i] = (shifted[:n_ref] - shifted[n_ref:]) / (up[:, i] - dn[:, i])
        v = np.where(np.isfinite(v), v, -np.inf)
        grad[~np.isfinite(grad)] = 0.0
        return -float(np.sum(v)), -grad.ravel()

    res = minimize(neg_total, cands[top].ravel(), jac=True, method="L-BFGS-B",
                   bounds=[(0.0, 1.0)] * (n_ref * d),
                   options={"maxiter": settings.refine_maxiter})
    refined = np.clip(res.x.reshape(n_ref, d), 0.0, 1.0)
    ref_vals = evaluate_batch(kind, model, refined, cache)
    ref_vals = np.where(np.isfinite(ref_vals), ref_vals, -np.inf)

    pool_vals = np.concatenate([ref_vals, vals])
    best = int(np.argmax(pool_vals))
    return (refined[best] if best < n_ref else cands[best - n_ref]).copy()


def _metrics(model, truth, dgsm_nodes, dgsm_seed, dim):
    est = estimate_dgsm(model, dgsm_nodes, SobolStream(dim, seed=dgsm_seed))
    return {
        "rmse_raw": rmse(est.raw, truth.raw),
        "rmse_abs": rmse(est.abs, truth.abs),
        "rmse_sq": rmse(est.sq, truth.sq),
        "ndcg_abs": ndcg(est.abs, truth.abs),
        "ndcg_sq": ndcg(est.sq, truth.sq),
    }


def run_loop(config, replicate_seed, problem=None, truth=None, replicate=0):
    """One replicate of the active-learning loop; returns its iteration records.

    All randomness (initial design, Sobol streams, fit restarts, observation
    noise) derives from ``replicate_seed`` alone, so a replicate is fully
    reproducible in isolation.  ``problem`` and ``truth`` may be passed in to
    avoid recomputing shared state across replicates.
    """
    if problem is None:
        problem = make_problem(config.problem, noise_sd=config.noise_sd)
    if truth is None:
        truth = ground_truth_dgsm(problem, config.truth_nodes, cache_dir=config.cache_dir)
    d = problem.dim
    kind = config.acquisition
    n_iters = config.budget - config.init_points

    ss = np.random.SeedSequence(int(replicate_seed))
    s_init, s_qr, s_dgsm, s_noise, s_fit, s_opt = ss.spawn(6)
    rng_init = np.random.default_rng(s_init)
    rng_noise = np.random.default_rng(s_noise)
    qr_stream = SobolStream(d, seed=_seed_from(s_qr))
    dgsm_seed = _seed_from(s_dgsm)
    fit_seeds = s_fit.generate_state(n_iters + 1, np.uint64)
    opt_seeds = (s_opt.generate_state(n_iters, np.uint64) if n_iters
                 else np.zeros(0, np.uint64))

    records = []
    t0 = time.perf_counter()
    X = rng_init.uniform(size=(config.init_points, d))
    Y = np.array([observe(problem, x, rng=rng_noise) for x in X])
    model = fit(Dataset.from_arrays(X, Y), int(fit_seeds[0]))
    info = dict(model.hyperparams_raw())
    info["fit_failed"] = False
    records.append(IterationRecord(
        replicate=replicate, iteration=0, x_selected=None, y_observed=float("nan"),
        fit_hyperparams=info,
        wall_time_ms=int(round((time.perf_counter() - t0) * 1000)),
        **_metrics(model, truth, config.dgsm_nodes, dgsm_seed, d)))

    for k in range(n_iters):
        t0 = time.perf_counter()
        if kind.tag == "QR":
            x_sel = qr_stream.next(1)[0]
        else:
            x_sel = optimize_acquisition(model, kind, int(opt_seeds[k]), config.optimizer)
        y = observe(problem, x_sel, rng=rng_noise)
        X = np.vstack([X, x_sel[None, :]])
        Y = np.append(Y, y)
        fit_failed = False
        try:
            model = fit(Dataset.from_arrays(X, Y), int(fit_seeds[k + 1]),
                        warm_start=None if model.degenerate else model.hp)
        except RuntimeError:
            model = condition_on(model, x_sel, y)
            fit_failed = True
        info = dict(model.hyperparams_raw())
        info["fit_failed"] = fit_failed
        records.append(IterationRecord(
            replicate=replicate, iteration=k + 1, x_selected=np.array(x_sel),
            y_observed=float(y), fit_hyperparams=info,
            wall_time_ms=int(round((time.perf_counter() - t0) * 1000)),
            **_metrics(model, truth, config.dgsm_nodes, dgsm_seed, d)))
    return records


_METRIC_KEYS = ("rmse_raw", "rmse_abs", "rmse_sq", "ndcg_abs", "ndcg_sq", "wall_time_ms")


def csv_header(dim):
    return (["replicate", "iteration"] + [f"x_{i}" for i in range(dim)]
            + ["y", "rmse_raw", "rmse_abs", "rmse_sq", "ndcg_abs", "ndcg_sq",
               "wall_time_ms"])


def _fmt(v):
    return repr(float(v))


def _write_records_csv(path, records, dim):
    with open(path, "w", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(dim))
        for r in records:
            xs = ([_fmt(v) for v in r.x_selected] if r.x_selected is not None
                  else ["nan"] * dim)
            w.writerow([r.replicate, r.iteration] + xs
                       + [_fmt(r.y_observed), _fmt(r.rmse_raw), _fmt(r.rmse_abs),
                          _fmt(r.rmse_sq), _fmt(r.ndcg_abs), _fmt(r.ndcg_sq),
                          r.wall_time_ms])


def _summarize(config, records, failures, dim):
    by_iter = {}
    for r in records:
        by_iter.setdefault(r.iteration, []).append(r)
    iterations = sorted(by_iter)
    metrics = {}
    for key in _METRIC_KEYS:
        means, two_ses = [], []
        for it in iterations:
            vals = np.array([getattr(r, key) for r in by_iter[it]], dtype=np.float64)
            means.append(float(np.mean(vals)))
            if vals.size > 1:
                two_ses.append(float(2.0 * np.std(vals, ddof=1) / math.sqrt(vals.size)))
            else:
                two_ses.append(None)
        metrics[key] = {"mean": means, "two_se": two_ses}
    final_it = iterations[-1] if iterations else None
    final = {}
    if final_it is not None:
        for key in _METRIC_KEYS:
            vals = np.array([getattr(r, key) for r in by_iter[final_it]], dtype=np.float64)
            final[key] = {"mean": float(np.mean(vals)),
                          "median": float(np.median(vals))}
    return {
        "schema_version": SCHEMA_VERSION,
        "package_version": _pkg_version,
        "problem": config.problem,
        "dim": dim,
        "acquisition": {"tag": config.acquisition.tag,
                        "global_nodes": config.acquisition.global_nodes},
        "init_points": config.init_points,
        "budget": config.budget,
        "seed": config.seed,
        "dgsm_nodes": config.dgsm_nodes,
        "truth_nodes": config.truth_nodes,
        "noise_sd": config.noise_sd,
        "replicates_requested": config.replicates,
        "replicates_completed": config.replicates - len(failures),
        "failed_replicates": failures,
        "iterations": iterations,
        "metrics": metrics,
        "final": final,
    }


def _config_dict(config):
    return {
        "schema_version": SCHEMA_VERSION,
        "package_version": _pkg_version,
        "problem": config.problem,
        "acquisition": {"tag": config.acquisition.tag,
                        "global_nodes": config.acquisition.global_nodes},
        "init_points": config.init_points,
        "budget": config.budget,
        "replicates": config.replicates,
        "seed": config.seed,
        "dgsm_nodes": config.dgsm_nodes,
        "truth_nodes": config.truth_nodes,
        "noise_sd": config.noise_sd,
        "optimizer": {
            "candidates": config.optimizer.candidates,
            "refine": config.optimizer.refine,
            "refine_maxiter": config.optimizer.refine_maxiter,
            "fd_step": config.optimizer.fd_step,
        },
    }


def _dump_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(config):
    """Run all replicates, optionally persist outputs, and return the summary.

    With ``out_dir`` set, writes ``config.json``, ``records.csv`` (one row per
    replicate x iteration, header from :func:`csv_header`), ``summary.json``
    (per-iteration mean and 2*SE of each metric), and ``groundtruth.json``.
    A replicate that raises is recorded in the summary and skipped; only a run
    in which every replicate fails raises.
    """
    problem = make_problem(config.problem, noise_sd=config.noise_sd)
    truth = ground_truth_dgsm(problem, config.truth_nodes, cache_dir=config.cache_dir)
    records, failures = [], []
    for rep in range(config.replicates):
        rseed = derive_replicate_seed(config.seed, rep)
        try:
            records.extend(run_loop(config, rseed, problem=problem, truth=truth,
                                    replicate=rep))
        except Exception as exc:
            failures.append({"replicate": rep,
                             "error": f"{type(exc).__name__}: {exc}"})
    if len(failures) == config.replicates:
        raise RuntimeError(
            f"all {config.replicates} replicates failed; first error: "
            f"{failures[0]['error']}")
    summary = _summarize(config, records, failures, problem.dim)
    if config.out_dir:
        os.makedirs(config.out_dir, exist_ok=True)
        _write_records_csv(os.path.join(config.out_dir, "records.csv"),
                           records, problem.dim)
        _dump_json(os.path.join(config.out_dir, "config.json"), _config_dict(config))
        _dump_json(os.path.join(config.out_dir, "summary.json"), summary)
        truth_doc = truth.to_dict()
        truth_doc["problem"] = problem.name
        _dump_json(os.path.join(config.out_dir, "groundtruth.json"), truth_doc)
    return summary
