"""Command-line entry point: ``fedfeat {gen-corpus,train-judges,run,report}``.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .baselines import ModelEvaluator, OracleJudge, run_he_baseline, run_model_eval_baseline
from .corpus import CorpusReport, LabelingConfig, generate_corpus, load_judges, read_corpus, train_all_judges, write_corpus
from .dataset import Table, bundled_datasets, load_bundled, load_partition, load_table, vertical_split
from .errors import ConfigError, DataError
from .fednet import Network
from .learners.base import LOGISTIC_REGRESSION, RANDOM_FOREST, BaseModelKind
from .learners.mlp import TrainHyper
from .protocol import ParameterServer, make_participants, run_flfe
from .report import run_report, series_csv, summarize, load_report, write_json
from .sketch import SketchConfig
from .transforms import BINARY_KINDS, TransformKind, parse_kinds

MODES = ("flfe", "model_eval_baseline", "he_model_baseline")
EXIT_CONFIG = 2
EXIT_DATA = 3


def resolve_dataset(source: str, partition: str | None = None) -> tuple[Table, dict | None]:
    """A bundled dataset name, or a CSV path with an optional ``<stem>.partition.json`` beside it."""
    if source in bundled_datasets() and not Path(source).exists():
        table, part = load_bundled(source)
    else:
        path = Path(source)
        table = load_table(path)
        side = path.with_name(path.stem + ".partition.json")
        part = load_partition(side) if side.exists() else None
    if partition:
        part = load_partition(partition)
    return table, part


def _sketch_cfg(args) -> SketchConfig:
    try:
        return SketchConfig(m=args.bins, k=args.scale_k, float_width=args.float_width)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _test_model(args) -> BaseModelKind:
    return BaseModelKind(name=args.test_model)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_corpus(args) -> int:
    names = args.data or bundled_datasets()
    tables = [resolve_dataset(n)[0] for n in names]
    cfg = LabelingConfig(
        base_model=_test_model(args),
        improvement_threshold=args.improvement_threshold,
        cv_folds=args.folds,
        crop_count=args.crop_count,
        max_candidates=args.max_candidates,
    )
    kinds = parse_kinds(args.kinds) if args.kinds else None
    report = CorpusReport()
    samples = generate_corpus(tables, kinds, _sketch_cfg(args), cfg, args.seed, report)
    out = _out_dir(args)
    write_corpus(samples, out / "corpus.jsonl")
    doc = {"seed": args.seed, "datasets": [t.name for t in tables], "labeling": cfg.to_dict(),
           "sketch": {"m": args.bins, "k": args.scale_k}, **report.to_dict()}
    write_json(doc, out / "corpus_report.json")
    print(f"{len(samples)} samples -> {out / 'corpus.jsonl'}")
    return 0


def cmd_train_judges(args) -> int:
    try:
        corpus = read_corpus(args.corpus)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot read corpus {args.corpus}: {exc}") from exc
    if args.kinds:
        wanted = set(parse_kinds(args.kinds))
        corpus = [s for s in corpus if s.transform in wanted]
    hyper = TrainHyper(epochs=args.epochs, hidden_dim=args.hidden_dim, seed=args.seed)
    models, metrics = train_all_judges(corpus, hyper, _out_dir(args))
    print(f"{len(models)} judges -> {args.out}")
    return 0


def _run_config(args, table: Table, kinds) -> dict:
    return {
        "mode": args.mode,
        "data": args.data,
        "dataset": table.name,
        "partition": args.partition,
        "seed": args.seed,
        "bins": args.bins,
        "scale_k": args.scale_k,
        "float_width": args.float_width,
        "feature_width": args.feature_width,
        "conf_threshold": args.conf_threshold,
        "max_loop": args.max_loop,
        "kinds": [k.value for k in kinds],
        "judge": "oracle" if args.oracle else "models",
        "models": args.models,
        "test_model": args.test_model,
        "folds": args.folds,
        "improvement_threshold": args.improvement_threshold,
        "include_unary": args.include_unary,
        "reuse_generated": not args.no_reuse,
    }


def cmd_run(args) -> int:
    table, part = resolve_dataset(args.data, args.partition)
    if part is None:
        raise ConfigError("no partition: pass --partition or place <name>.partition.json beside the data")
    views = vertical_split(table, part)
    originals = {f.name: f.values for v in views for f in v.features}
    wanted = parse_kinds(args.kinds) if args.kinds else None

    def evaluator():
        return ModelEvaluator(originals, table.label, _test_model(args), args.improvement_threshold,
                              args.folds, args.seed)

    judges = {}
    if args.mode != "model_eval_baseline" or args.models:
        if args.oracle:
            judges = {k: None for k in BINARY_KINDS}
        elif args.models:
            judges = load_judges(args.models)
        else:
            raise ConfigError(f"mode {args.mode} needs --models or --oracle")
        if not args.include_unary or args.oracle:
            judges = {k: j for k, j in judges.items() if k.arity == 2}
        if wanted:
            judges = {k: j for k, j in judges.items() if k in wanted}
        if not any(k.arity == 2 for k in judges):
            raise ConfigError("no binary judge available for the requested kinds")
    kinds = list(judges) if judges else (wanted or list(BINARY_KINDS))
    kinds = [k for k in TransformKind if k in kinds]
    config = _run_config(args, table, kinds)

    if args.mode == "model_eval_baseline":
        result = run_model_eval_baseline(views, table.label, evaluator(), [k for k in kinds if k.arity == 2],
                                         args.max_loop, args.seed, not args.no_reuse, args.feature_width)
    else:
        server = ParameterServer(judges, table.label, args.conf_threshold, args.max_loop, args.seed,
                                 _sketch_cfg(args), args.feature_width, not args.no_reuse, args.include_unary)
        if args.oracle:
            oracle = OracleJudge(evaluator(), server)
            server.judges = {k: oracle for k in server.judges}
        result = run_flfe(server, make_participants(views, args.seed), Network())
        if args.mode == "he_model_baseline":
            result = run_he_baseline(result, table.rows)

    out = _out_dir(args)
    write_json(run_report(config, result, args.include_values), out / "report.json")
    (out / "ledger.csv").write_text(result.ledger.to_csv(), encoding="utf-8")
    print(f"{result.loops} loops, {len(result.feature_store)} features stored -> {out}")
    return 0


def cmd_report(args) -> int:
    reports = [load_report(p) for p in args.runs]
    data = args.data or reports[0]["config"]["data"]
    table, _ = resolve_dataset(data)
    summary = summarize(reports, table, _test_model(args), args.folds, args.seed)
    out = _out_dir(args)
    write_json(summary, out / "summary.json")
    (out / "series.csv").write_text(series_csv(summary), encoding="utf-8")
    for run in summary["runs"]:
        print(f"{run['mode']}: bench f1 {run['bench_f1']:.4f} post f1 {run['post_f1']:.4f} "
              f"+{run['added_features']} features, {run['total_bytes']} bytes")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, required=True)
    common.add_argument("--bins", type=int, default=200, help="histogram bins m per class column")
    common.add_argument("--scale-k", type=float, default=1.0, help="sketch values are scaled to [-k, k]")
    common.add_argument("--float-width", type=int, default=4, choices=(4, 8), help="bytes per sketch value")
    common.add_argument("--conf-threshold", type=float, default=0.8)
    common.add_argument("--max-loop", type=int, default=100)
    common.add_argument("--mode", choices=MODES, default="flfe")
    common.add_argument("--out", default=".")
    common.add_argument("--kinds", nargs="+", metavar="KIND", help="restrict to these transformations")
    common.add_argument("--test-model", choices=(LOGISTIC_REGRESSION, RANDOM_FOREST), default=LOGISTIC_REGRESSION)
    common.add_argument("--folds", type=int, default=10)
    common.add_argument("--improvement-threshold", type=float, default=0.01)

    parser = argparse.ArgumentParser(prog="fedfeat", description="Federated feature engineering with sketch judges.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", parents=[common], help="label QSA samples from datasets")
    p.add_argument("--data", nargs="+", help="bundled dataset names or CSV paths (default: all bundled)")
    p.add_argument("--crop-count", type=int, default=3)
    p.add_argument("--max-candidates", type=int, default=None)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("train-judges", parents=[common], help="train one MLP judge per transformation")
    p.add_argument("--corpus", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.set_defaults(func=cmd_train_judges)

    p = sub.add_parser("run", parents=[common], help="run FLFE or a baseline on a partitioned dataset")
    p.add_argument("--data", required=True, help="bundled dataset name or CSV path")
    p.add_argument("--partition", help="JSON mapping party name -> column names")
    p.add_argument("--models", help="directory of trained judges")
    p.add_argument("--oracle", action="store_true", help="judge by actual test-model evaluation")
    p.add_argument("--feature-width", type=int, default=8, choices=(4, 8))
    p.add_argument("--include-unary", action="store_true")
    p.add_argument("--no-reuse", action="store_true", help="never use generated features as parents")
    p.add_argument("--include-values", action="store_true", help="write generated feature values into the report")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", parents=[common], help="summarise run reports")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--data", help="dataset of the runs (default: taken from the first report)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
