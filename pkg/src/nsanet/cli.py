"""Command-line experiment runner.

Subcommands: gen-xor, train, nsa, fsa-nsa, sweep-h, sweep-n, restarts,
hit-time, grid-search, schedule, eval. Global flags --config/--seed/
--threads/--out may appear after any subcommand; values from --config (a
JSON file of TrainConfig fields) are overridden by explicit flags.

Exit codes: 0 on success, 1 on a domain error (a structured JSON diagnostic
goes to stderr), 2 on bad usage.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path


from . import __version__
from .anneal import run_fsa_nsa, run_nsa
from .data import CsvSchema, Dataset, SplitSpec, gen_xor, load_csv, save_csv, split, standardize, write_provenance
from .errors import NsanetError
from .experiments import (
    RESTARTS_HEADER,
    SCHEDULE_HEADER,
    SWEEP_H_HEADER,
    SWEEP_N_HEADER,
    GridSearchResult,
    SweepNSeries,
    equivalent_hidden_count,
    grid_search,
    model_weight_count,
    restarts_rows,
    restarts_study,
    schedule_table,
    sweep_h,
    sweep_n,
    write_csv,
    write_manifest,
    write_trace_csv,
    xor_test_set,
)
from .metrics import evaluate, hit_time
from .model import load_model, save_model
from .train import TrainConfig, train_model

CONFIG_FIELDS = TrainConfig.FIELDS


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON file of training-config fields")
    parser.add_argument("--seed", type=int, help="base seed (overrides config file)")
    parser.add_argument("--threads", type=int, default=1, help="parallel runs where applicable")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--lr", type=float)
    parser.add_argument("--weight-decay", type=float)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--loss", choices=("binary-logistic", "softmax-ce"))
    parser.add_argument("--decay-mode", choices=("coupled", "decoupled"))
    parser.add_argument("--backend", help="kernel backend: fused or numpy")


def _data_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--xor", nargs=3, type=int, metavar=("K", "P", "N"), help="generate XOR data")
    parser.add_argument("--test-n", type=int, default=3000, help="XOR test-set size")
    parser.add_argument("--data", type=Path, help="CSV dataset")
    parser.add_argument("--label", default="label", help="label column of --data")
    parser.add_argument("--onehot", default="", help="comma-separated one-hot columns")
    parser.add_argument("--ordinal", default="", help="comma-separated ordinal columns")
    parser.add_argument("--classes", default="", help="comma-separated fixed label order")
    parser.add_argument("--train-fraction", type=float, default=0.8)
    parser.add_argument("--stratified", action="store_true")
    parser.add_argument("--standardize", action="store_true")


def build_train_config(args, dataset_C: int | None = None) -> TrainConfig:
    values = {}
    if args.config:
        file_cfg = json.loads(Path(args.config).read_text())
        values.update({k: file_cfg[k] for k in CONFIG_FIELDS if k in file_cfg})
    for field in CONFIG_FIELDS:
        v = getattr(args, field, None)
        if v is not None:
            values[field] = v
    if "loss" not in values and dataset_C is not None:
        values["loss"] = "binary-logistic" if dataset_C == 2 else "softmax-ce"
    return TrainConfig(**values)


def load_datasets(args, seed: int) -> tuple[Dataset, Dataset]:
    """Train/test pair from either an XOR spec or a CSV + split."""
    if args.xor:
        k, p, n = args.xor
        train_ds = gen_xor(k, p, n, seed)
        test_ds = xor_test_set(k, p, seed, n=args.test_n)
        return train_ds, test_ds
    if not args.data:
        raise NsanetError("need --xor or --data")
    schema = CsvSchema(
        label=args.label,
        onehot=tuple(s for s in args.onehot.split(",") if s),
        ordinal=tuple(s for s in args.ordinal.split(",") if s),
        classes=tuple(s for s in args.classes.split(",") if s) or None,
    )
    full = load_csv(args.data, schema)
    train_ds, test_ds = split(full, SplitSpec(args.train_fraction, seed, args.stratified))
    if args.standardize:
        train_ds, test_ds, _ = standardize(train_ds, test_ds)
    return train_ds, test_ds


def _ints(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s]


def _floats(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s]


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def cmd_gen_xor(args) -> int:
    k, p, n = args.xor
    seed = args.seed if args.seed is not None else 0
    ds = gen_xor(k, p, n, seed)
    args.out.mkdir(parents=True, exist_ok=True)
    save_csv(ds, args.out / "data.csv")
    write_provenance(ds, args.out / "provenance.json")
    print(f"wrote {args.out / 'data.csv'} ({n} rows, {p} features)")
    return 0


def cmd_train(args) -> int:
    started = time.perf_counter()
    cfg0 = build_train_config(args)
    train_ds, test_ds = load_datasets(args, cfg0.seed)
    cfg = build_train_config(args, train_ds.C)
    model, _, losses = train_model(train_ds, cfg, args.nodes, backend=args.backend)
    report = evaluate(model, train_ds, test_ds)
    args.out.mkdir(parents=True, exist_ok=True)
    save_model(model, args.out / "model.json")
    report.save(args.out / "eval.json")
    write_csv(args.out / "history.csv", ("epoch", "loss"), [[e + 1, l] for e, l in enumerate(losses)])
    write_manifest(args.out / "manifest.json", "train", cfg.to_dict(), [cfg.seed], started)
    print(f"train loss {report.train_loss:.4f}, test acc {report.test_acc:.4f}")
    return 0


def _prune_command(args, with_features: bool) -> int:
    started = time.perf_counter()
    cfg0 = build_train_config(args)
    train_ds, test_ds = load_datasets(args, cfg0.seed)
    cfg = build_train_config(args, train_ds.C)
    if with_features:
        model, trace = run_fsa_nsa(
            train_ds, args.start_nodes, args.nodes, args.features, args.epochs_iter, cfg,
            args.backend, mu=args.mu,
        )
        name = "fsa-nsa"
    else:
        model, trace = run_nsa(
            train_ds, args.start_nodes, args.nodes, args.epochs_iter, cfg,
            args.backend, mu=args.mu,
        )
        name = "nsa"
    report = evaluate(model, train_ds, test_ds)
    args.out.mkdir(parents=True, exist_ok=True)
    save_model(model, args.out / "model.json")
    write_trace_csv(args.out / "trace.csv", trace)
    report.save(args.out / "eval.json")
    payload = {**cfg.to_dict(), "start_nodes": args.start_nodes, "nodes": args.nodes, "n_iter": args.epochs_iter}
    if with_features:
        payload["features"] = args.features
    payload["weights"] = model_weight_count(model)
    payload["equivalent_dense_h"] = equivalent_hidden_count(payload["weights"], model.p, model.C)
    write_manifest(args.out / "manifest.json", name, payload, [cfg.seed], started)
    kept = ",".join(str(i) for i in model.feature_ids.tolist())
    print(
        f"{name}: {model.h} nodes, features [{kept}], "
        f"weights {model_weight_count(model)}, test acc {report.test_acc:.4f}"
    )
    return 0


def cmd_nsa(args) -> int:
    return _prune_command(args, with_features=False)


def cmd_fsa_nsa(args) -> int:
    return _prune_command(args, with_features=True)


def cmd_sweep_h(args) -> int:
    started = time.perf_counter()
    cfg0 = build_train_config(args)
    train_ds, test_ds = load_datasets(args, cfg0.seed)
    cfg = build_train_config(args, train_ds.C)
    seeds = [cfg.seed + i for i in range(args.restarts)]
    rows = sweep_h(train_ds, test_ds, _ints(args.h_grid), cfg, seeds, args.threads, args.backend)
    write_csv(args.out / "sweep_h.csv", SWEEP_H_HEADER, rows)
    write_manifest(args.out / "manifest.json", "sweep-h",
                   {**cfg.to_dict(), "h_grid": _ints(args.h_grid)}, seeds, started)
    print(f"wrote {args.out / 'sweep_h.csv'} ({len(rows)} rows)")
    return 0


def cmd_sweep_n(args) -> int:
    started = time.perf_counter()
    k, p_full = args.k, args.p
    cfg = build_train_config(args, 2)
    series = [
        SweepNSeries(name=f"p=k plain h={args.h_true}", p=k, h=args.h_true),
        SweepNSeries(name=f"p={p_full} plain h={args.h_full}", p=p_full, h=args.h_full),
        SweepNSeries(
            name="fsa+nsa", p=p_full, h=args.h_full, fsa_nsa=True,
            start_nodes=args.start_nodes, k_target=k, n_iter=args.epochs_iter,
        ),
    ]
    seeds = [cfg.seed + i for i in range(args.restarts)]
    rows = sweep_n(k, series, _ints(args.n_grid), cfg, seeds, args.threads, args.backend)
    write_csv(args.out / "sweep_n.csv", SWEEP_N_HEADER, rows)
    write_manifest(args.out / "manifest.json", "sweep-n",
                   {**cfg.to_dict(), "k": k, "p": p_full, "n_grid": _ints(args.n_grid)}, seeds, started)
    print(f"wrote {args.out / 'sweep_n.csv'} ({len(rows)} rows)")
    return 0


def cmd_restarts(args) -> int:
    started = time.perf_counter()
    cfg0 = build_train_config(args)
    train_ds, test_ds = load_datasets(args, cfg0.seed)
    cfg = build_train_config(args, train_ds.C)
    records = restarts_study(train_ds, test_ds, args.nodes, cfg, args.restarts, args.threads, args.backend)
    write_csv(args.out / "restarts.csv", RESTARTS_HEADER, restarts_rows(records))
    write_manifest(args.out / "manifest.json", "restarts",
                   {**cfg.to_dict(), "h": args.nodes, "restarts": args.restarts},
                   [cfg.seed + i for i in range(args.restarts)], started)
    spread = records[-1].loss - records[0].loss
    print(f"wrote {args.out / 'restarts.csv'}; loss spread {spread:.4f}")
    return 0


def cmd_hit_time(args) -> int:
    started = time.perf_counter()
    cfg = build_train_config(args, 2)
    rows = []
    summary = {}
    for p in _ints(args.p_grid):
        ds = gen_xor(args.k, p, args.n, cfg.seed)
        result = hit_time(
            ds, args.nodes, cfg,
            auc_threshold=args.threshold,
            max_restarts=args.max_restarts,
            n_trials=args.trials,
            backend=args.backend,
        )
        for trial, (count, cens) in enumerate(zip(result.per_trial, result.censored)):
            rows.append([p, trial, count, int(cens)])
        summary[str(p)] = result.to_dict()
    write_csv(args.out / "hit_time.csv", ("p", "trial", "restarts", "censored"), rows)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "hit_time_summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    write_manifest(args.out / "manifest.json", "hit-time",
                   {**cfg.to_dict(), "k": args.k, "n": args.n, "p_grid": _ints(args.p_grid)},
                   [cfg.seed], started)
    means = {p: summary[p]["mean_restarts"] for p in summary}
    print(f"mean restarts by p: {means}")
    return 0


def cmd_grid_search(args) -> int:
    started = time.perf_counter()
    cfg0 = build_train_config(args)
    train_ds, test_ds = load_datasets(args, cfg0.seed)
    cfg = build_train_config(args, train_ds.C)
    result: GridSearchResult = grid_search(
        train_ds, test_ds, cfg,
        h_grid=_ints(args.h_grid),
        decay_grid=_floats(args.decay_grid),
        batch_grid=_ints(args.batch_grid),
        folds=args.folds,
        runs=args.runs,
        threads=args.threads,
        backend=args.backend,
    )
    write_csv(args.out / "cv.csv", GridSearchResult.CV_HEADER, result.cv_rows)
    report = {
        "best": {"h": result.best.h, "weight_decay": result.best.weight_decay, "batch_size": result.best.batch_size},
        "test_accuracy_mean": result.final_mean,
        "test_accuracy_std": result.final_std,
        "test_accuracies": result.final_accs,
        "weight_count": result.weight_count,
    }
    (args.out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    write_manifest(args.out / "manifest.json", "grid-search", report["best"], [cfg.seed], started)
    print(
        f"best h={result.best.h} wd={result.best.weight_decay} bs={result.best.batch_size}: "
        f"test acc {result.final_mean:.4f} +/- {result.final_std:.4f}"
    )
    return 0


def cmd_schedule(args) -> int:
    rows = schedule_table(args.epochs_iter, args.start_nodes, args.nodes, args.p, args.features, mu=args.mu)
    write_csv(args.out / "schedule.csv", SCHEDULE_HEADER, rows)
    print(f"wrote {args.out / 'schedule.csv'} ({len(rows)} rows)")
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model)
    cfg0 = build_train_config(args)
    train_ds, test_ds = load_datasets(args, cfg0.seed)
    report = evaluate(model, train_ds, test_ds)
    args.out.mkdir(parents=True, exist_ok=True)
    report.save(args.out / "eval.json")
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nsanet", description=__doc__)
    parser.add_argument("--version", action="version", version=f"nsanet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        sp = sub.add_parser(name, **kwargs)
        _common(sp)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("gen-xor", cmd_gen_xor, help="write an XOR dataset as CSV + provenance")
    sp.add_argument("--xor", nargs=3, type=int, metavar=("K", "P", "N"), required=True)

    sp = add("train", cmd_train, help="plain training run")
    _data_args(sp)
    sp.add_argument("--nodes", type=int, required=True, help="hidden width h")

    sp = add("nsa", cmd_nsa, help="node selection with annealing")
    _data_args(sp)
    sp.add_argument("--start-nodes", type=int, default=1024)
    sp.add_argument("--nodes", type=int, required=True)
    sp.add_argument("--epochs-iter", type=int, default=300, help="annealing epochs N_iter")
    sp.add_argument("--mu", type=int, default=30, help="schedule sharpness")

    sp = add("fsa-nsa", cmd_fsa_nsa, help="node + feature selection with annealing")
    _data_args(sp)
    sp.add_argument("--start-nodes", type=int, default=1024)
    sp.add_argument("--nodes", type=int, required=True)
    sp.add_argument("--features", type=int, required=True, help="final feature count")
    sp.add_argument("--epochs-iter", type=int, default=300)
    sp.add_argument("--mu", type=int, default=30, help="schedule sharpness")

    sp = add("sweep-h", cmd_sweep_h, help="best-of-restarts vs hidden width")
    _data_args(sp)
    sp.add_argument("--h-grid", required=True, help="comma-separated widths")
    sp.add_argument("--restarts", type=int, default=10)

    sp = add("sweep-n", cmd_sweep_n, help="loss/AUC vs sample size for three series")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--p", type=int, default=15)
    sp.add_argument("--n-grid", required=True)
    sp.add_argument("--h-true", type=int, default=64, help="width of the p=k series")
    sp.add_argument("--h-full", type=int, default=128, help="width of the p-wide series")
    sp.add_argument("--start-nodes", type=int, default=1024)
    sp.add_argument("--epochs-iter", type=int, default=300)
    sp.add_argument("--restarts", type=int, default=10)

    sp = add("restarts", cmd_restarts, help="independent restarts sorted by loss")
    _data_args(sp)
    sp.add_argument("--nodes", type=int, required=True)
    sp.add_argument("--restarts", type=int, default=100)

    sp = add("hit-time", cmd_hit_time, help="restarts needed to reach a train-AUC threshold")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--n", type=int, default=3000)
    sp.add_argument("--p-grid", required=True)
    sp.add_argument("--nodes", type=int, default=20)
    sp.add_argument("--threshold", type=float, default=0.95)
    sp.add_argument("--max-restarts", type=int, default=40)
    sp.add_argument("--trials", type=int, default=10)

    sp = add("grid-search", cmd_grid_search, help="k-fold CV over h/decay/batch grids")
    _data_args(sp)
    sp.add_argument("--h-grid", default="16,32,64,128,256,512")
    sp.add_argument("--decay-grid", default="0.0001,0.001,0.01,0.1")
    sp.add_argument("--batch-grid", default="16,32,64")
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--runs", type=int, default=10)

    sp = add("schedule", cmd_schedule, help="tabulate node/feature schedules")
    sp.add_argument("--epochs-iter", type=int, default=300)
    sp.add_argument("--start-nodes", type=int, default=1024)
    sp.add_argument("--nodes", type=int, default=128)
    sp.add_argument("--p", type=int, default=15)
    sp.add_argument("--features", type=int, default=3)
    sp.add_argument("--mu", type=int, default=30, help="schedule sharpness")

    sp = add("eval", cmd_eval, help="evaluate a saved model on a dataset")
    _data_args(sp)
    sp.add_argument("--model", type=Path, required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except NsanetError as err:
        diag = {"error": type(err).__name__, "message": str(err)}
        diag.update({k: v for k, v in vars(err).items() if isinstance(v, (int, float, str, list))})
        print(json.dumps(diag, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
