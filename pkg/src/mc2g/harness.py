"""Experiment orchestration: pipeline runs, sweeps, metrics, CSV emission."""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .core import (ClusterLabels, NominalMatrix, RatingAlphabet,
                   RatingObservation, SimpleGraph, expand_nominal_values,
                   misclassification_proportion)
from .estimation import estimate_model
from .genmodel import (GeneratedInstance, ModelParams, PersonalizationModel,
                       generate_instance, symmetric_conn_from_quality,
                       uniform_noise_personalization)
from .refinement import (refine_all, reconstruct_nominal_argmax,
                         reconstruct_nominal_majority)
from .spectral import SpectralConfig, kmeans, spectral_cluster
from .splitting import identity_split, split_graph
from .theory import achievability_threshold, cluster_discrepancies

CSV_HEADER = ["ratio", "p", "success_rate", "mae_mean", "mae_std", "trials"]

ABLATIONS = ("both-graphs", "social-only", "item-only", "no-graph")
SPLIT_MODES = ("simplified", "analyzed")
RECONSTRUCTIONS = ("argmax", "majority")


@dataclass(frozen=True)
class PipelineOptions:
    """Per-run algorithm switches, independent of the generative scenario."""

    split: str = "simplified"
    ablation: str = "both-graphs"
    refine_rounds: int = 1
    reconstruction: str = "argmax"
    trim: bool = False
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 100
    eig_tol: float = 1e-6
    eig_max_iter: int = 300

    def __post_init__(self):
        if self.split not in SPLIT_MODES:
            raise ValueError(f"split must be one of {SPLIT_MODES}")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}")
        if self.reconstruction not in RECONSTRUCTIONS:
            raise ValueError(f"reconstruction must be one of {RECONSTRUCTIONS}")
        if not 1 <= self.refine_rounds <= 5:
            raise ValueError("refine_rounds must lie in 1..5")


@dataclass(frozen=True)
class TrialResult:
    seed: int
    p: float
    ratio: float | None
    user_error: float
    item_error: float
    success: bool
    mae: float
    stage_seconds: dict

    def to_jsonable(self) -> dict:
        out = {
            "seed": self.seed, "p": self.p, "ratio": self.ratio,
            "user_error": self.user_error, "item_error": self.item_error,
            "success": self.success, "mae": self.mae,
            "stage_seconds": {k: round(v, 6) for k, v in self.stage_seconds.items()},
        }
        return out


def profile_cluster(obs: RatingObservation, alphabet: RatingAlphabet, axis: str,
                    k: int, cfg: SpectralConfig) -> ClusterLabels:
    """Cluster users or items by k-means on mean-imputed rating profiles.

    Stand-in initialization for ablations that drop a graph: the profile of
    an entity is its observed raw ratings with the global mean elsewhere,
    which reduces to k-means on sparse deviations from the mean.
    """
    values = alphabet.values()[obs.symbols].astype(np.float64)
    mean = values.mean() if values.size else 0.0
    dev = values - mean
    if axis == "users":
        mat = sp.csr_matrix((dev, (obs.users, obs.items)),
                            shape=(obs.n_users, obs.n_items))
    elif axis == "items":
        mat = sp.csr_matrix((dev, (obs.items, obs.users)),
                            shape=(obs.n_items, obs.n_users))
    else:
        raise ValueError("axis must be 'users' or 'items'")
    rng = np.random.default_rng(np.random.SeedSequence([cfg.rng_seed, 0x9f0f]))
    labels, _ = kmeans(mat, k, rng, restarts=cfg.kmeans_restarts,
                       max_iter=cfg.kmeans_max_iter)
    return ClusterLabels(labels, k)


def evaluate_mae(n_hat: NominalMatrix, n_true: NominalMatrix) -> float:
    """Mean absolute error between expanded matrices on raw alphabet values."""
    a = expand_nominal_values(n_hat)
    b = expand_nominal_values(n_true)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if n_hat.alphabet != n_true.alphabet:
        raise ValueError("alphabets differ")
    return float(np.abs(a - b).mean())


def run_pipeline(instance: GeneratedInstance, opts: PipelineOptions,
                 algo_seed: int = 0, ratio: float | None = None) -> TrialResult:
    """Split -> spectral -> estimate -> refine -> reconstruct, with metrics."""
    params = instance.params
    timings = {}

    def timed(name, fn, *args, **kw):
        t0 = time.perf_counter()
        try:
            out = fn(*args, **kw)
        except Exception as exc:
            raise RuntimeError(f"pipeline stage '{name}' failed: {exc}") from exc
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0
        return out

    use_social = opts.ablation in ("both-graphs", "social-only")
    use_item = opts.ablation in ("both-graphs", "item-only")

    ss = np.random.SeedSequence([algo_seed, 0x51e7])
    seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(4)]
    cfg_user = SpectralConfig(k=params.k1, kmeans_restarts=opts.kmeans_restarts,
                              kmeans_max_iter=opts.kmeans_max_iter,
                              eig_tol=opts.eig_tol, eig_max_iter=opts.eig_max_iter,
                              rng_seed=seeds[0], trim=opts.trim)
    cfg_item = replace(cfg_user, k=params.k2, rng_seed=seeds[1])

    # Stage 0: information splitting
    def do_split(g, seed):
        if opts.split == "simplified":
            return identity_split(g)
        return split_graph(g, np.random.default_rng(np.random.SeedSequence([seed])))

    split_user = timed("split", do_split, instance.g_user, seeds[2]) if use_social else None
    split_item = timed("split", do_split, instance.g_item, seeds[3]) if use_item else None

    # Stage 1: weak recovery
    if use_social:
        user0 = timed("spectral", spectral_cluster, split_user.part_a,
                      params.k1, cfg_user)
    else:
        user0 = timed("spectral", profile_cluster, instance.obs, params.alphabet,
                      "users", params.k1, cfg_user)
    if use_item:
        item0 = timed("spectral", spectral_cluster, split_item.part_a,
                      params.k2, cfg_item)
    else:
        item0 = timed("spectral", profile_cluster, instance.obs, params.alphabet,
                      "items", params.k2, cfg_item)

    g_user_b = split_user.part_b if use_social else None
    g_item_b = split_item.part_b if use_item else None

    # Stages 2-4, optionally iterated (extra rounds re-estimate from the
    # previous round's labels; the default single round is the one-pass rule)
    user_lab, item_lab = user0, item0
    est = None
    for _ in range(opts.refine_rounds):
        est = timed("estimate", estimate_model, instance.obs, g_user_b, g_item_b,
                    user_lab, item_lab, params.alphabet)
        user_lab, item_lab = timed("refine", refine_all, instance.obs, g_user_b,
                                   g_item_b, user_lab, item_lab, est)

    if opts.reconstruction == "argmax":
        # refined cluster indices are aligned with the Stage-2 estimates, so
        # the block modes of q_hat apply directly to the refined labels
        n_hat = timed("reconstruct", reconstruct_nominal_argmax, user_lab,
                      item_lab, est, params.alphabet)
    else:
        n_hat, _ = timed("reconstruct", reconstruct_nominal_majority, user_lab,
                         item_lab, instance.obs, params.alphabet)

    t0 = time.perf_counter()
    user_err, _ = misclassification_proportion(user_lab, instance.sigma)
    item_err, _ = misclassification_proportion(item_lab, instance.tau)
    mae = evaluate_mae(n_hat, instance.nominal)
    exact = bool(user_err == 0.0 and item_err == 0.0 and mae == 0.0)
    timings["evaluate"] = time.perf_counter() - t0

    return TrialResult(seed=instance.seed, p=params.p, ratio=ratio,
                       user_error=user_err, item_error=item_err,
                       success=exact, mae=mae, stage_seconds=timings)


# ---------------------------------------------------------------------------
# Declarative experiment configuration

@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    m: int
    k1: int
    k2: int
    alphabet: RatingAlphabet
    z_block: np.ndarray
    personalization: PersonalizationModel
    i1: float
    i2: float
    beta_coeff: float = 0.25
    ratios: tuple = ()
    p_values: tuple = ()
    trials: int = 1
    base_seed: int = 0
    options: PipelineOptions = field(default_factory=PipelineOptions)
    jobs: int = 1

    def __post_init__(self):
        z = np.asarray(self.z_block, dtype=np.int64)
        object.__setattr__(self, "z_block", z)
        if z.shape != (self.k1, self.k2):
            raise ValueError("z table must be k1 x k2")
        if bool(self.ratios) == bool(self.p_values):
            raise ValueError("give exactly one of 'ratios' or 'p_values'")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")

    def nominal_template(self) -> NominalMatrix:
        from .genmodel import equal_size_labels
        return NominalMatrix(self.z_block, equal_size_labels(self.n, self.k1),
                             equal_size_labels(self.m, self.k2), self.alphabet)

    def threshold_eps0(self) -> float:
        d_user, d_item, _, _ = cluster_discrepancies(
            self.nominal_template(), self.personalization)
        return achievability_threshold(self.n, self.m, self.k1, self.k2,
                                       self.i1, self.i2, d_user, d_item, 0.0)

    def grid(self):
        """List of (ratio, p) points; ratio is None when threshold is zero."""
        if self.p_values:
            thr = None
            try:
                thr = self.threshold_eps0()
            except ValueError:
                thr = None
            out = []
            for p in self.p_values:
                ratio = (self.m * self.n * p / thr) if thr and thr > 0 else None
                out.append((ratio, float(p)))
            return out
        thr = self.threshold_eps0()
        if thr <= 0:
            raise ValueError("threshold is zero; specify p_values directly")
        return [(float(r), float(r) * thr / (self.m * self.n)) for r in self.ratios]

    def model_params(self, p: float) -> ModelParams:
        return ModelParams(
            n=self.n, m=self.m, k1=self.k1, k2=self.k2, alphabet=self.alphabet,
            z_block=self.z_block, personalization=self.personalization,
            conn_user=symmetric_conn_from_quality(self.n, self.k1, self.i1,
                                                  self.beta_coeff),
            conn_item=symmetric_conn_from_quality(self.m, self.k2, self.i2,
                                                  self.beta_coeff),
            p=p)


def config_from_dict(doc: dict) -> ExperimentConfig:
    alphabet = RatingAlphabet(tuple(doc["alphabet"]))
    z_raw = np.asarray(doc["z_table"])
    z_block = np.vectorize(alphabet.index_of)(z_raw)
    pers = doc.get("personalization", {})
    if "table" in pers:
        pm = PersonalizationModel(np.asarray(pers["table"], dtype=np.float64))
    else:
        pm = uniform_noise_personalization(alphabet.size,
                                           float(pers.get("correct_prob", 0.6)))
    opt_doc = doc.get("options", {})
    options = PipelineOptions(
        split=opt_doc.get("split", "simplified"),
        ablation=opt_doc.get("ablation", "both-graphs"),
        refine_rounds=int(opt_doc.get("refine_rounds", 1)),
        reconstruction=opt_doc.get("reconstruction", "argmax"),
        trim=bool(opt_doc.get("trim", False)),
        kmeans_restarts=int(opt_doc.get("kmeans_restarts", 10)),
        kmeans_max_iter=int(opt_doc.get("kmeans_max_iter", 100)),
        eig_tol=float(opt_doc.get("eig_tol", 1e-6)),
        eig_max_iter=int(opt_doc.get("eig_max_iter", 300)),
    )
    return ExperimentConfig(
        n=int(doc["n"]), m=int(doc["m"]), k1=int(doc["k1"]), k2=int(doc["k2"]),
        alphabet=alphabet, z_block=z_block, personalization=pm,
        i1=float(doc["i1"]), i2=float(doc["i2"]),
        beta_coeff=float(doc.get("beta_coeff", 0.25)),
        ratios=tuple(doc.get("ratios", ())),
        p_values=tuple(doc.get("p_values", ())),
        trials=int(doc.get("trials", 1)),
        base_seed=int(doc.get("base_seed", 0)),
        options=options,
        jobs=int(doc.get("jobs", 0) or os.environ.get("MC2G_JOBS", 1)),
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def trial_seed(base_seed: int, point_index: int, trial_index: int) -> int:
    """Fixed mixing so per-trial seeds are independent of scheduling order."""
    ss = np.random.SeedSequence([base_seed, point_index, trial_index])
    return int(ss.generate_state(2, dtype=np.uint64)[0])


def _run_one(args):
    config, point_index, trial_index, ratio, p = args
    seed = trial_seed(config.base_seed, point_index, trial_index)
    instance = generate_instance(config.model_params(p), seed)
    return point_index, trial_index, run_pipeline(instance, config.options,
                                                  algo_seed=seed, ratio=ratio)


def sweep(config: ExperimentConfig, csv_path=None, jobs: int | None = None,
          progress=None):
    """Run the full grid; returns aggregate rows and writes the results CSV.

    Aggregation is order-independent; with a worker pool the CSV is still
    byte-identical for a fixed (config, base seed).
    """
    points = config.grid()
    tasks = [(config, pi, ti, ratio, p)
             for pi, (ratio, p) in enumerate(points)
             for ti in range(config.trials)]
    jobs = jobs if jobs is not None else config.jobs
    results = {}
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for pi, ti, res in pool.map(_run_one, tasks, chunksize=1):
                results[(pi, ti)] = res
                if progress:
                    progress(len(results), len(tasks))
    else:
        for task in tasks:
            pi, ti, res = _run_one(task)
            results[(pi, ti)] = res
            if progress:
                progress(len(results), len(tasks))
    rows = []
    for pi, (ratio, p) in enumerate(points):
        trials = [results[(pi, ti)] for ti in range(config.trials)]
        maes = np.array([t.mae for t in trials])
        rows.append({
            "ratio": ratio if ratio is not None else float("nan"),
            "p": p,
            "success_rate": float(np.mean([t.success for t in trials])),
            "mae_mean": float(maes.mean()),
            "mae_std": float(maes.std(ddof=1)) if len(trials) > 1 else 0.0,
            "trials": config.trials,
        })
    if csv_path is not None:
        write_results_csv(rows, csv_path)
    return rows, results


def _fmt(x) -> str:
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return format(float(x), ".12g")


def write_results_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in CSV_HEADER])
