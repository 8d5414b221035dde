"""Command-line interface: synth, run, sweep, theory, eval."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .core import (ClusterLabels, NominalMatrix, RatingAlphabet,
                   misclassification_proportion)
from .genmodel import (GeneratedInstance, PersonalizationModel,
                       generate_instance, load_edge_list, load_labels,
                       load_ratings_csv, save_edge_list, save_labels,
                       save_ratings_csv, symmetric_conn_from_quality)
from .harness import (PipelineOptions, config_from_dict, evaluate_mae,
                      load_config, run_pipeline, sweep, write_results_csv)
from .theory import build_threshold_report


def _pipeline_overrides(config, args) -> PipelineOptions:
    opts = config.options
    updates = {}
    if args.split is not None:
        updates["split"] = args.split
    if getattr(args, "ablation", None) is not None:
        updates["ablation"] = args.ablation
    return dataclasses.replace(opts, **updates) if updates else opts


def _resolve_p(config, args) -> float:
    if getattr(args, "p", None) is not None:
        return float(args.p)
    grid = config.grid()
    if getattr(args, "ratio", None) is not None:
        thr = config.threshold_eps0()
        return float(args.ratio) * thr / (config.m * config.n)
    return grid[0][1]


def cmd_synth(args) -> int:
    config = load_config(args.config)
    p = _resolve_p(config, args)
    seed = args.seed
    instance = generate_instance(config.model_params(p), seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_edge_list(instance.g_user, out / "social_edges.txt")
    save_edge_list(instance.g_item, out / "item_edges.txt")
    save_ratings_csv(instance.obs, config.alphabet, out / "ratings.csv")
    save_labels(instance.sigma, out / "user_labels.txt")
    save_labels(instance.tau, out / "item_labels.txt")
    meta = {
        "n": config.n, "m": config.m, "k1": config.k1, "k2": config.k2,
        "alphabet": list(config.alphabet.symbols),
        "z_table": config.alphabet.values()[config.z_block].tolist(),
        "personalization": {"table": config.personalization.conditional.tolist()},
        "i1": config.i1, "i2": config.i2, "beta_coeff": config.beta_coeff,
        "p": p, "seed": seed,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote instance (n={config.n}, m={config.m}, p={p:.6g}, "
          f"seed={seed}) to {out}")
    return 0


def _instance_from_dir(path: Path) -> tuple[GeneratedInstance, dict]:
    meta = json.loads((path / "meta.json").read_text())
    alphabet = RatingAlphabet(tuple(meta["alphabet"]))
    z_block = np.vectorize(alphabet.index_of)(np.asarray(meta["z_table"]))
    pm = PersonalizationModel(np.asarray(meta["personalization"]["table"]))
    from .genmodel import ModelParams
    params = ModelParams(
        n=meta["n"], m=meta["m"], k1=meta["k1"], k2=meta["k2"],
        alphabet=alphabet, z_block=z_block, personalization=pm,
        conn_user=symmetric_conn_from_quality(meta["n"], meta["k1"], meta["i1"],
                                              meta["beta_coeff"]),
        conn_item=symmetric_conn_from_quality(meta["m"], meta["k2"], meta["i2"],
                                              meta["beta_coeff"]),
        p=meta["p"])
    sigma = load_labels(path / "user_labels.txt", k=meta["k1"])
    tau = load_labels(path / "item_labels.txt", k=meta["k2"])
    nominal = NominalMatrix(z_block, sigma, tau, alphabet)
    instance = GeneratedInstance(
        params=params, seed=meta["seed"], sigma=sigma, tau=tau, nominal=nominal,
        personalized=None,
        obs=load_ratings_csv(path / "ratings.csv", alphabet, meta["n"], meta["m"]),
        g_user=load_edge_list(path / "social_edges.txt", meta["n"]),
        g_item=load_edge_list(path / "item_edges.txt", meta["m"]))
    return instance, meta


def cmd_run(args) -> int:
    if args.instance_dir:
        instance, meta = _instance_from_dir(Path(args.instance_dir))
        seed = args.seed if args.seed is not None else meta["seed"]
        opts = PipelineOptions(split=args.split or "simplified",
                               ablation=args.ablation or "both-graphs")
    else:
        if not args.config:
            print("error: run needs --config or --instance-dir", file=sys.stderr)
            return 2
        config = load_config(args.config)
        seed = args.seed if args.seed is not None else config.base_seed
        p = _resolve_p(config, args)
        instance = generate_instance(config.model_params(p), seed)
        opts = _pipeline_overrides(config, args)
    result = run_pipeline(instance, opts, algo_seed=seed)
    doc = result.to_jsonable()
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    if args.split is not None or args.ablation is not None:
        config = dataclasses.replace(config,
                                     options=_pipeline_overrides(config, args))
    jobs = args.jobs if args.jobs is not None else config.jobs
    out_csv = Path(args.out)

    def progress(done, total):
        if done == total or done % max(1, total // 20) == 0:
            print(f"  {done}/{total} trials", file=sys.stderr)

    rows, _ = sweep(config, csv_path=None, jobs=jobs, progress=progress)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    write_results_csv(rows, out_csv)
    print(f"wrote {out_csv}")
    if not args.no_plot:
        from .plots import render_sweep_figure
        fig_path = args.plot or out_csv.with_suffix(".png")
        render_sweep_figure(rows, fig_path)
        print(f"wrote {fig_path}")
    return 0


def cmd_theory(args) -> int:
    config = load_config(args.config)
    p = None
    if args.p is not None:
        p = float(args.p)
    elif config.p_values:
        p = float(config.p_values[0])
    report = build_threshold_report(
        config.n, config.m, config.k1, config.k2, config.i1, config.i2,
        config.nominal_template(), config.personalization, eps=args.eps, p=p)
    text = json.dumps(report.to_jsonable(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_eval(args) -> int:
    out = {}
    if args.est_labels and args.true_labels:
        est = load_labels(args.est_labels, k=args.k)
        true = load_labels(args.true_labels, k=args.k)
        k = max(est.k, true.k) if args.k is None else args.k
        est = ClusterLabels(est.assignments, k)
        true = ClusterLabels(true.assignments, k)
        frac, perm = misclassification_proportion(est, true)
        out["misclassification"] = frac
        out["permutation"] = list(perm)
    if args.est_matrix and args.true_matrix:
        a = np.loadtxt(args.est_matrix, delimiter=",", ndmin=2)
        b = np.loadtxt(args.true_matrix, delimiter=",", ndmin=2)
        if a.shape != b.shape:
            print(f"error: matrix shapes differ: {a.shape} vs {b.shape}",
                  file=sys.stderr)
            return 1
        out["mae"] = float(np.abs(a - b).mean())
    if not out:
        print("error: eval needs label files and/or matrix files", file=sys.stderr)
        return 2
    print(json.dumps(out, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mc2g",
        description="Matrix completion with social and item similarity graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, ablation=True):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--split", choices=("simplified", "analyzed"), default=None)
        if ablation:
            p.add_argument("--ablation",
                           choices=("both-graphs", "social-only", "item-only",
                                    "no-graph"),
                           default=None)

    p_synth = sub.add_parser("synth", help="emit a generated instance to files")
    p_synth.add_argument("--config", required=True)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--p", type=float, default=None)
    p_synth.add_argument("--ratio", type=float, default=None)
    p_synth.set_defaults(func=cmd_synth)

    p_run = sub.add_parser("run", help="single pipeline run")
    p_run.add_argument("--config", default=None)
    p_run.add_argument("--instance-dir", default=None)
    p_run.add_argument("--p", type=float, default=None)
    p_run.add_argument("--ratio", type=float, default=None)
    p_run.add_argument("--out", default=None)
    add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="full experiment from a config file")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--jobs", type=int,
                         default=None if "MC2G_JOBS" not in os.environ
                         else int(os.environ["MC2G_JOBS"]))
    p_sweep.add_argument("--no-plot", action="store_true")
    p_sweep.add_argument("--plot", default=None)
    add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_theory = sub.add_parser("theory", help="print the threshold report")
    p_theory.add_argument("--config", required=True)
    p_theory.add_argument("--eps", type=float, default=0.0)
    p_theory.add_argument("--p", type=float, default=None)
    p_theory.add_argument("--out", default=None)
    p_theory.set_defaults(func=cmd_theory)

    p_eval = sub.add_parser("eval", help="misclassification / MAE between files")
    p_eval.add_argument("--est-labels", default=None)
    p_eval.add_argument("--true-labels", default=None)
    p_eval.add_argument("--k", type=int, default=None)
    p_eval.add_argument("--est-matrix", default=None)
    p_eval.add_argument("--true-matrix", default=None)
    p_eval.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
