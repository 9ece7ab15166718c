"""Command-line interface: ``gwmix {simulate,fit,search,replicate,evaluate,motivating}``."""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import (
    PAPER_STRATEGIES,
    ReplicationBatch,
    motivating_table,
    result_columns,
    run_batch,
)
from .glasso import GlassoOptions
from .metrics import (
    ari,
    count_precision_params,
    edge_recovery,
    empirical_precisions,
    match_components,
    median_frobenius_distance,
)
from .mixture import (
    DegenerateComponentError,
    FitConfig,
    SearchError,
    classify,
    default_jobs,
    fit,
    model_search,
)
from .penalty import DegeneratePartitionError, PenaltyStrategy
from .serialize import (
    DataParseError,
    file_digest,
    read_data_csv,
    read_fit_json,
    read_truth_json,
    standardize,
    write_data_csv,
    write_fit_json,
    write_truth_json,
)
from .simulate import SCENARIOS, make_scenario

logger = logging.getLogger("gwmix")

EXIT_OK = 0
EXIT_PARSE = 3
EXIT_DEGENERATE = 4
EXIT_SEARCH = 5

# Flags that never change results and stay out of the manifest digest.
_VOLATILE = {"jobs", "out", "dry_run", "verbose", "func", "timings"}


# --------------------------------------------------------------------------
# manifest


def _resolved_config(args):
    cfg = {}
    for k, v in sorted(vars(args).items()):
        if k == "func":
            continue
        if isinstance(v, Path):
            v = str(v)
        cfg[k] = v
    return cfg


def make_manifest(args, inputs=()):
    cfg = _resolved_config(args)
    stable = {k: v for k, v in cfg.items() if k not in _VOLATILE}
    input_digests = {str(p): file_digest(p) for p in inputs}
    core = {"command": args.command, "config": stable, "master_seed": getattr(args, "seed", None),
            "version": __version__, "inputs": input_digests}
    digest = hashlib.sha256(json.dumps(core, sort_keys=True, default=str).encode()).hexdigest()[:16]
    manifest = dict(core)
    manifest["resolved_config"] = cfg
    manifest["digest"] = digest
    manifest["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    manifest["outputs"] = []
    return manifest


def _write_manifest(manifest, out):
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, default=str) + "\n")
    return path


def _write_rows(path, rows, columns):
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k, "")) for k in columns})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


# --------------------------------------------------------------------------
# shared pieces


def _parse_k_range(text):
    if ".." in text:
        a, b = text.split("..", 1)
        a, b = int(a), int(b)
        if a > b:
            raise argparse.ArgumentTypeError(f"empty K range {text!r}")
        return list(range(a, b + 1))
    return [int(t) for t in text.split(",") if t]


def _config(args):
    return FitConfig(em_tolerance=args.em_tol, em_max_iterations=args.em_max_iter,
                     glasso_options=GlassoOptions(tolerance=args.glasso_tol), seed=args.seed,
                     init_method=args.init)


def _load(args):
    X, labels, columns = read_data_csv(args.data)
    center = np.zeros(X.shape[1])
    scale = np.ones(X.shape[1])
    if not args.no_standardize:
        X, center, scale = standardize(X, columns)
    return X, labels, columns, center, scale


def metrics_row(params, X, labels=None, true_omegas=None, meta=None):
    """Evaluation row shared by ``fit``, ``search`` and ``evaluate``."""
    meta = meta or {}
    row = {"scenario": meta.get("scenario", ""), "strategy": meta.get("strategy", ""),
           "lambda": meta.get("lambda", ""), "K": params.K,
           "d_omega": count_precision_params(params.omega), "bic": meta.get("bic", "")}
    if labels is not None:
        est = classify(X, params)
        K_true = int(labels.max()) + 1
        m = match_components(labels, est, K_true, params.K)
        row["ari"] = ari(labels, est)
        omega_bar = empirical_precisions(X, labels, K_true)
        row["mfd"] = median_frobenius_distance(params.omega, omega_bar, m)
        if true_omegas is not None:
            er = edge_recovery(true_omegas, params.omega, m)
            for k, r in enumerate(er.per_component):
                row[f"f1_{k + 1}"] = r[3]
            row["mean_f1"] = er.mean_f1
    return row


def _metric_columns(row):
    f1 = sorted((k for k in row if k.startswith("f1_")), key=lambda s: int(s[3:]))
    cols = ["scenario", "strategy", "lambda", "K"] + f1
    cols += [c for c in ("mean_f1", "ari", "d_omega", "mfd", "bic") if c in row]
    return cols + ["manifest"]


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dry_run(args, manifest):
    print(json.dumps(manifest["resolved_config"], indent=1, sort_keys=True, default=str))
    return EXIT_OK


# --------------------------------------------------------------------------
# commands


def cmd_simulate(args):
    manifest = make_manifest(args)
    if args.dry_run:
        return _dry_run(args, manifest)
    out = _out_dir(args)
    scenario, truth = make_scenario(args.scenario, args.seed, p=args.p)
    data_path = out / "data.csv"
    truth_path = out / "truth.json"
    write_data_csv(data_path, truth.X, truth.labels)
    write_truth_json(truth_path, scenario, truth, manifest_digest=manifest["digest"])
    manifest["outputs"] = [str(data_path), str(truth_path)]
    _write_manifest(manifest, out)
    print(f"wrote {data_path} and {truth_path}")
    return EXIT_OK


def _save_fit(args, report, X, labels, center, scale, manifest, out, name="fit.json"):
    meta = {"strategy": report.strategy.value, "lambda": report.lam, "bic": report.bic,
            "scenario": args.scenario_name or ""}
    fit_path = out / name
    write_fit_json(fit_path, report, manifest_digest=manifest["digest"],
                   standardization={"applied": not args.no_standardize,
                                    "center": center.tolist(), "scale": scale.tolist()})
    # metrics from the written document so evaluate reproduces them exactly
    params, doc = read_fit_json(fit_path)
    meta["bic"] = doc["bic"]
    truth = read_truth_json(args.truth)[0] if args.truth else None
    row = metrics_row(params, X, labels, truth, meta)
    row["manifest"] = manifest["digest"]
    metrics_path = out / "metrics.csv"
    _write_rows(metrics_path, [row], _metric_columns(row))
    return fit_path, metrics_path


def _standardization_record(manifest, X, args):
    manifest["column_variance"] = X.var(axis=0).tolist()
    manifest["standardized"] = not args.no_standardize


def cmd_fit(args):
    inputs = [args.data] + ([args.truth] if args.truth else [])
    manifest = make_manifest(args, inputs)
    if args.dry_run:
        return _dry_run(args, manifest)
    X, labels, columns, center, scale = _load(args)
    out = _out_dir(args)
    _standardization_record(manifest, X, args)
    config = _config(args)
    try:
        if args.lam is not None:
            report = fit(X, args.k, args.lam, args.penalty, config)
        else:
            res = model_search(X, [args.k], args.penalty, config, n_grid=args.lambda_grid,
                               jobs=args.jobs)
            report = res.best
            _write_search_table(out / "search.csv", res, manifest)
    except (DegenerateComponentError, DegeneratePartitionError) as exc:
        print(f"error: degenerate fit: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except SearchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEARCH
    fit_path, metrics_path = _save_fit(args, report, X, labels, center, scale, manifest, out)
    manifest["outputs"] = [str(fit_path), str(metrics_path)]
    _write_manifest(manifest, out)
    print(f"K={report.K} lambda={report.lam:.6g} bic={report.bic:.6g} converged={report.converged}")
    return EXIT_OK


def _write_search_table(path, res, manifest):
    rows = []
    for e in res.table:
        r = {"K": e.K, "lambda": e.lam, "manifest": manifest["digest"], "error": e.error or ""}
        if e.report is not None:
            r.update(bic=e.report.bic, d0=e.report.d0, loglik=e.report.unpenalized_loglik,
                     iterations=e.report.iterations, converged=int(e.report.converged))
        rows.append(r)
    _write_rows(path, rows, ["K", "lambda", "bic", "d0", "loglik", "iterations", "converged",
                             "error", "manifest"])


def cmd_search(args):
    inputs = [args.data] + ([args.truth] if args.truth else [])
    manifest = make_manifest(args, inputs)
    if args.dry_run:
        return _dry_run(args, manifest)
    X, labels, columns, center, scale = _load(args)
    out = _out_dir(args)
    _standardization_record(manifest, X, args)
    try:
        res = model_search(X, args.k_range, args.penalty, _config(args), n_grid=args.lambda_grid,
                           jobs=args.jobs)
    except SearchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEARCH
    _write_search_table(out / "search.csv", res, manifest)
    fit_path, metrics_path = _save_fit(args, res.best, X, labels, center, scale, manifest, out)
    manifest["outputs"] = [str(out / "search.csv"), str(fit_path), str(metrics_path)]
    _write_manifest(manifest, out)
    failed = sum(e.report is None for e in res.table)
    print(f"selected K={res.best.K} lambda={res.best.lam:.6g} bic={res.best.bic:.6g} "
          f"({len(res.table)} candidates, {failed} failed)")
    return EXIT_OK


def cmd_replicate(args):
    manifest = make_manifest(args)
    if args.dry_run:
        return _dry_run(args, manifest)
    out = _out_dir(args)
    config = _config(args)
    batch = ReplicationBatch(scenario=args.scenario, B=args.reps, strategies=tuple(args.penalty),
                             n_grid=args.lambda_grid, K_candidates=tuple(args.k_range or ()) or None,
                             master_seed=args.seed, p=args.p, standardize=not args.no_standardize,
                             record_time=args.timings, config=config)
    rows = run_batch(batch, jobs=args.jobs)
    K_true = 2 if args.scenario == "p-ge-n" else 3
    for r in rows:
        r["manifest"] = manifest["digest"]
    path = out / "results.csv"
    _write_rows(path, rows, result_columns(K_true) + ["manifest"])
    failed = sum(1 for r in rows if r["error"])
    manifest["outputs"] = [str(path)]
    manifest["failed_fits"] = failed
    _write_manifest(manifest, out)
    print(f"wrote {len(rows)} rows to {path} ({failed} failed fits)")
    return EXIT_OK


def cmd_evaluate(args):
    inputs = [args.model, args.data] + ([args.truth] if args.truth else [])
    manifest = make_manifest(args, inputs)
    if args.dry_run:
        return _dry_run(args, manifest)
    params, doc = read_fit_json(args.model)
    X, labels, _ = read_data_csv(args.data)
    std = doc.get("standardization") or {}
    if std.get("applied"):
        X = (X - np.array(std["center"])) / np.array(std["scale"])
    truth = read_truth_json(args.truth)[0] if args.truth else None
    meta = {"strategy": doc["strategy"], "lambda": doc["lambda"], "bic": doc["bic"],
            "scenario": args.scenario_name or ""}
    row = metrics_row(params, X, labels, truth, meta)
    row["manifest"] = doc.get("manifest_digest", "")
    cols = _metric_columns(row)
    if args.out:
        out = _out_dir(args)
        _write_rows(out / "metrics.csv", [row], cols)
        (out / "metrics.json").write_text(json.dumps({c: _fmt(row.get(c, "")) for c in cols},
                                                     indent=1) + "\n")
    else:
        w = csv.DictWriter(sys.stdout, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        w.writerow({k: _fmt(row.get(k, "")) for k in cols})
    return EXIT_OK


def cmd_motivating(args):
    manifest = make_manifest(args)
    if args.dry_run:
        return _dry_run(args, manifest)
    out = _out_dir(args)
    rows = motivating_table(args.seed, n_grid=args.lambda_grid, standardize_data=not args.no_standardize,
                            config=_config(args))
    for r in rows:
        r["manifest"] = manifest["digest"]
    path = out / "motivating.csv"
    _write_rows(path, rows, ["lambda", "f1_1", "f1_2", "ari", "bic", "error", "manifest"])
    manifest["outputs"] = [str(path)]
    _write_manifest(manifest, out)
    print(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _penalty(value):
    try:
        return PenaltyStrategy(value)
    except ValueError:
        choices = ", ".join(s.value for s in PenaltyStrategy)
        raise argparse.ArgumentTypeError(f"unknown penalty {value!r} (choose from {choices})") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="out")
    common.add_argument("--jobs", type=int, default=None,
                        help="worker processes (default: one per processor)")
    common.add_argument("--dry-run", action="store_true", help="print the resolved config and exit")
    common.add_argument("-v", "--verbose", action="store_true")

    fitting = argparse.ArgumentParser(add_help=False)
    fitting.add_argument("--lambda-grid", type=int, default=None, metavar="N",
                         help="grid size (default 100; 50 for motivating)")
    fitting.add_argument("--no-standardize", action="store_true")
    fitting.add_argument("--init", choices=("kmeans", "gmm-diag"), default="kmeans")
    fitting.add_argument("--em-tol", type=float, default=1e-5)
    fitting.add_argument("--em-max-iter", type=int, default=500)
    fitting.add_argument("--glasso-tol", type=float, default=1e-4)

    parser = argparse.ArgumentParser(prog="gwmix", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="draw a synthetic scenario")
    p.add_argument("--scenario", choices=SCENARIOS, required=True)
    p.add_argument("--p", type=int, default=None, help="dimension for p-ge-n (100 or 200)")
    p.set_defaults(func=cmd_simulate)

    for name, helptext in (("fit", "fit one K (one lambda, or BIC over the grid)"),
                           ("search", "BIC search over K and lambda")):
        p = sub.add_parser(name, parents=[common, fitting], help=helptext)
        p.add_argument("data", help="CSV with header; optional 'label' column")
        p.add_argument("--penalty", type=_penalty, default=PenaltyStrategy.ALL_ONES)
        p.add_argument("--truth", default=None, help="ground-truth JSON for edge F1")
        p.add_argument("--scenario-name", default=None)
        if name == "fit":
            p.add_argument("--k", type=int, required=True)
            p.add_argument("--lambda", dest="lam", type=float, default=None)
            p.set_defaults(func=cmd_fit)
        else:
            p.add_argument("--k-range", type=_parse_k_range, default=[2, 3, 4, 5])
            p.set_defaults(func=cmd_search)

    p = sub.add_parser("replicate", parents=[common, fitting], help="replication batch")
    p.add_argument("--scenario", choices=SCENARIOS, required=True)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--penalty", type=_penalty, nargs="+",
                   default=[PenaltyStrategy(s) for s in PAPER_STRATEGIES])
    p.add_argument("--k-range", type=_parse_k_range, default=None,
                   help="K candidates, e.g. 2..5 (default: the true K)")
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--timings", action="store_true", help="fill the seconds column")
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("evaluate", parents=[common], help="score a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="labeled CSV")
    p.add_argument("--truth", default=None)
    p.add_argument("--scenario-name", default=None)
    p.set_defaults(func=cmd_evaluate, out=None)

    p = sub.add_parser("motivating", parents=[common, fitting],
                       help="F1 per lambda for the two-component example")
    p.set_defaults(func=cmd_motivating)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "lambda_grid", 0) is None:
        args.lambda_grid = 50 if args.command == "motivating" else 100
    if args.jobs is None or args.jobs <= 0:
        args.jobs = default_jobs()
    if isinstance(getattr(args, "penalty", None), list):
        args.penalty = [p.value for p in args.penalty]
    elif isinstance(getattr(args, "penalty", None), PenaltyStrategy):
        args.penalty = args.penalty.value
    try:
        return args.func(args)
    except DataParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
