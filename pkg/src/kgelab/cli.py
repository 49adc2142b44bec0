"""Command-line entry point.

One multiplexed binary with subcommands covering the whole workflow:

    extract    first-order ontology triples for a seed lexicon
    variation  build a dataset variation, or compare all three end to end
    split      write holdout or k-fold train/test triple files
    train      build a variation and train a model to a checkpoint
    evaluate   link-prediction metrics of a checkpoint on a test file
    cv         k-fold cross-validation on one triple file
    predict    top-k completions of a partial triple
    stats      frequency statistics of a triple file

Hyperparameters resolve in three layers: built-in defaults, then a flat
``key = value`` config file (``--config`` or $KGELAB_CONFIG), then explicit
command-line flags. The effective merged config is echoed into every
report so runs are reproducible from their outputs alone.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import __version__
from ._kernels import BACKEND_NAME
from .evaluation import (
    PROTOCOL_FILTERED,
    PROTOCOLS,
    cross_validate,
    evaluate,
    predict_links,
    render_metrics_table,
)
from .exceptions import ConfigError, EmptyInputError, KgelabError
from .fusion import TokenVectorSource, build_variation, load_sentences
from .graph import graph_stats, load_triples, split_holdout, split_kfold
from .models import ModelConfig, load_model, save_model
from .ontology import OntologySource, extract_first_order, load_lexicon
from .training import train

log = logging.getLogger("kgelab")

CONFIG_ENV = "KGELAB_CONFIG"

# Flat config-file schema: key -> caster. Flags override file values.
_CONFIG_KEYS = {
    "family": str,
    "k": int,
    "eta": int,
    "epochs": int,
    "batches_count": int,
    "seed": int,
    "loss": str,
    "margin": float,
    "learning_rate": float,
    "norm_order": int,
    "variation": int,
    "protocol": str,
    "train_fraction": float,
    "cv_k": int,
    "pooling": str,
    "triples": str,
    "lexicon": str,
    "sentences": str,
    "vectors": str,
    "checkpoint": str,
    "report": str,
    "format": str,
}


def parse_config_file(path) -> dict:
    """Parse ``key = value`` lines; unknown keys fail with their name."""
    values: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
            key, _, value = stripped.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{line_no}: unknown config key {key!r}")
            try:
                values[key] = _CONFIG_KEYS[key](value)
            except ValueError:
                raise ConfigError(
                    f"{path}:{line_no}: bad value for {key!r}: {value!r}"
                ) from None
    return values


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _input_provenance(paths: dict) -> dict:
    return {
        role: {"path": str(p), "sha256": _file_sha256(p)}
        for role, p in paths.items()
        if p is not None
    }


@dataclass
class RunSettings:
    """Merged defaults + config file + flags for one invocation."""

    values: dict

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            family=self.get("family", "complex"),
            k=self.get("k", 150),
            eta=self.get("eta", 10),
            epochs=self.get("epochs", 10),
            batches_count=self.get("batches_count", 100),
            seed=self.get("seed", 555),
            loss=self.get("loss"),
            margin=self.get("margin", 1.0),
            learning_rate=self.get("learning_rate", 5e-4),
            norm_order=self.get("norm_order", 2),
        ).validate()

    def effective(self, config: Optional[ModelConfig] = None) -> dict:
        out = dict(self.values)
        if config is not None:
            out.update(config.to_dict())
        return {k: v for k, v in out.items() if v is not None}


def _settings(args: argparse.Namespace) -> RunSettings:
    values: dict = {}
    config_path = args.config or os.environ.get(CONFIG_ENV)
    if config_path:
        values.update(parse_config_file(config_path))
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return RunSettings(values)


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_baselines(path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        rows = json.load(fh)
    if not isinstance(rows, list):
        raise ConfigError(f"{path}: baselines file must hold a JSON list")
    for row in rows:
        missing = {"name", "mrr", "hits10", "hits1"} - set(row)
        if missing:
            raise ConfigError(f"{path}: baseline row missing {sorted(missing)}")
    return rows


# -- subcommands ---------------------------------------------------------------


def cmd_extract(args) -> int:
    lexicon = load_lexicon(args.lexicon)
    ontology = load_triples(args.ontology)
    source = OntologySource(ontology, hierarchy_relation=args.hierarchy_relation)
    result = extract_first_order(source, lexicon)
    result.write_tsv(args.out)
    print(
        f"extracted {len(result)} triples, {result.n_entities} entities, "
        f"{result.n_relations} relations -> {args.out}"
    )
    if len(result) == 0:
        print("warning: no lexicon concept found in the ontology", file=sys.stderr)
    return 0


def _build_variation_graph(settings, variation, triples_path, lexicon_path,
                           sentences_path, vectors_path, config):
    graph = load_triples(triples_path)
    if variation == 1:
        return graph, None
    if lexicon_path is None:
        raise ConfigError(f"variation {variation} requires --lexicon")
    if sentences_path is None:
        raise ConfigError(f"variation {variation} requires --sentences")
    lexicon = load_lexicon(lexicon_path)
    sentences = load_sentences(sentences_path)
    token_source = None
    if variation == 3:
        if vectors_path:
            token_source = TokenVectorSource(
                mode="file", dimension=config.k, path=vectors_path, seed=config.seed
            )
        else:
            token_source = TokenVectorSource(
                mode="seeded-random", dimension=config.k, seed=config.seed
            )
    return build_variation(
        graph,
        sentences if variation != 1 else None,
        lexicon,
        variation,
        token_source=token_source,
        pooling=settings.get("pooling", "mean"),
    )


def cmd_variation(args) -> int:
    settings = _settings(args)
    config = settings.model_config()
    if args.compare:
        return _compare_variations(args, settings, config)
    if args.out is None:
        raise ConfigError("build mode needs --out (or use --compare)")
    variation = settings.get("variation", 1)
    graph, hints = _build_variation_graph(
        settings, variation, _required(settings, "triples"),
        settings.get("lexicon"), settings.get("sentences"),
        settings.get("vectors"), config,
    )
    graph.write_tsv(args.out)
    print(
        f"variation {variation}: {len(graph)} triples, {graph.n_entities} entities, "
        f"{graph.n_relations} relations -> {args.out}"
    )
    if hints is not None and args.hints_out:
        labels = sorted(hints)
        np.savez(
            args.hints_out,
            labels=np.array(labels),
            vectors=np.stack([hints[l] for l in labels]),
        )
        print(f"wrote {len(labels)} init hints -> {args.hints_out}")
    return 0


def _compare_variations(args, settings, config) -> int:
    triples_path = _required(settings, "triples")
    fraction = settings.get("train_fraction", 0.8)
    protocol = settings.get("protocol", PROTOCOL_FILTERED)
    rows = []
    for variation in (1, 2, 3):
        graph, hints = _build_variation_graph(
            settings, variation, triples_path,
            settings.get("lexicon"), settings.get("sentences"),
            settings.get("vectors"), config,
        )
        split = split_holdout(graph, fraction, config.seed)
        model, _ = train(split.train, config, init_hints=hints)
        report = evaluate(model, split.test, known=graph, protocol=protocol)
        rows.append(
            {
                "name": f"variation {variation} ({config.family})",
                "variation": variation,
                "mrr": report.mrr,
                "hits10": report.hits10,
                "hits1": report.hits1,
                "n_queries": len(report.rank_records),
            }
        )
    table_rows = []
    if args.baselines:
        table_rows.extend(_load_baselines(args.baselines))
    table_rows.extend(rows)
    print(render_metrics_table(table_rows))
    if args.report:
        payload = {
            "rows": table_rows,
            "protocol": protocol,
            "config": settings.effective(config),
            "inputs": _input_provenance(
                {
                    "triples": triples_path,
                    "lexicon": settings.get("lexicon"),
                    "sentences": settings.get("sentences"),
                    "vectors": settings.get("vectors"),
                    "baselines": args.baselines,
                }
            ),
        }
        _write_json(args.report, payload)
        print(f"wrote comparison report -> {args.report}")
    return 0


def cmd_split(args) -> int:
    settings = _settings(args)
    graph = load_triples(_required(settings, "triples"))
    seed = settings.get("seed", 555)
    if args.mode == "holdout":
        if args.out_train is None or args.out_test is None:
            raise ConfigError("holdout mode needs --out-train and --out-test")
        result = split_holdout(
            graph, settings.get("train_fraction", 0.8), seed, repair=args.repair
        )
        result.train.write_tsv(args.out_train)
        result.test.write_tsv(args.out_test)
        print(
            f"train {len(result.train)} / test {len(result.test)} "
            f"(moved {len(result.moved)}, dropped {len(result.dropped)})"
        )
        return 0
    if args.out_dir is None:
        raise ConfigError("kfold mode needs --out-dir")
    k = settings.get("cv_k", 10)
    folds = split_kfold(graph, k, seed, repair=args.repair)
    os.makedirs(args.out_dir, exist_ok=True)
    for i, fold in enumerate(folds):
        fold.train.write_tsv(os.path.join(args.out_dir, f"fold{i}_train.tsv"))
        fold.test.write_tsv(os.path.join(args.out_dir, f"fold{i}_test.tsv"))
    sizes = ", ".join(str(len(f.test)) for f in folds)
    print(f"{k} folds -> {args.out_dir} (test sizes: {sizes})")
    return 0


def cmd_train(args) -> int:
    settings = _settings(args)
    config = settings.model_config()
    variation = settings.get("variation", 1)
    triples_path = _required(settings, "triples")
    graph, hints = _build_variation_graph(
        settings, variation, triples_path,
        settings.get("lexicon"), settings.get("sentences"),
        settings.get("vectors"), config,
    )
    frozen = None
    if args.freeze_hints and hints:
        frozen = sorted(hints)
    model, trace = train(graph, config, init_hints=hints, frozen_entities=frozen)
    checkpoint_path = _required(settings, "checkpoint")
    save_model(model, checkpoint_path)
    trace_path = args.trace or checkpoint_path + ".trace.json"
    payload = {
        "trace": trace.to_dict(),
        "config": settings.effective(config),
        "variation": variation,
        "backend": BACKEND_NAME,
        "inputs": _input_provenance(
            {
                "triples": triples_path,
                "lexicon": settings.get("lexicon"),
                "sentences": settings.get("sentences"),
                "vectors": settings.get("vectors"),
            }
        ),
    }
    _write_json(trace_path, payload)
    print(json.dumps({"config": settings.effective(config)}, sort_keys=True))
    print(
        f"trained {config.family} on {len(graph)} triples "
        f"({config.epochs} epochs); checkpoint {model.checksum()[:12]} "
        f"-> {checkpoint_path}"
    )
    return 0


def cmd_evaluate(args) -> int:
    settings = _settings(args)
    model = load_model(_required(settings, "checkpoint"))
    test = load_triples(args.test)
    known = test
    for path in args.known or []:
        known = known.union(load_triples(path))
    protocol = settings.get("protocol", PROTOCOL_FILTERED)
    report = evaluate(model, test, known=known, protocol=protocol)
    row = {
        "name": f"{model.family} ({protocol})",
        "mrr": report.mrr,
        "hits10": report.hits10,
        "hits1": report.hits1,
    }
    rows = _load_baselines(args.baselines) if args.baselines else []
    rows.append(row)
    if settings.get("format", "text") == "json":
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(render_metrics_table(rows))
    report_path = settings.get("report")
    if report_path:
        payload = report.to_dict(include_records=True)
        payload["config"] = settings.effective()
        payload["backend"] = BACKEND_NAME
        payload["inputs"] = _input_provenance(
            {
                "checkpoint": settings.get("checkpoint"),
                "test": args.test,
                **{f"known{i}": p for i, p in enumerate(args.known or [])},
            }
        )
        if rows[:-1]:
            payload["baselines"] = rows[:-1]
        _write_json(report_path, payload)
        print(f"wrote report -> {report_path}")
    return 0


def cmd_cv(args) -> int:
    settings = _settings(args)
    config = settings.model_config()
    graph = load_triples(_required(settings, "triples"))
    k = settings.get("cv_k", 10)
    protocol = settings.get("protocol", PROTOCOL_FILTERED)
    result = cross_validate(graph, config, k, protocol=protocol)
    rows = [
        {
            "name": f"fold {i}",
            "mrr": r.mrr,
            "hits10": r.hits10,
            "hits1": r.hits1,
        }
        for i, r in enumerate(result.fold_reports)
    ]
    rows.append(
        {
            "name": "mean",
            "mrr": result.summary.mean["mrr"],
            "hits10": result.summary.mean["hits10"],
            "hits1": result.summary.mean["hits1"],
        }
    )
    if settings.get("format", "text") == "json":
        print(json.dumps(result.to_dict(), indent=2, sort_keys=True))
    else:
        print(render_metrics_table(rows))
        std = result.summary.std
        print(
            f"std: MRR {std['mrr']:.3f}, Hits@10 {std['hits10']:.3f}, "
            f"Hits@1 {std['hits1']:.3f}"
        )
    report_path = settings.get("report")
    if report_path:
        payload = result.to_dict()
        payload["config"] = settings.effective(config)
        payload["backend"] = BACKEND_NAME
        payload["inputs"] = _input_provenance({"triples": settings.get("triples")})
        _write_json(report_path, payload)
        print(f"wrote report -> {report_path}")
    return 0


def cmd_predict(args) -> int:
    settings = _settings(args)
    model = load_model(_required(settings, "checkpoint"))
    results = predict_links(
        model,
        predicate=args.predicate,
        subject=args.subject,
        obj=args.object,
        top_k=args.top_k,
    )
    if settings.get("format", "text") == "json":
        print(json.dumps(
            [{"entity": e, "score": s} for e, s in results], indent=2
        ))
    else:
        for entity, value in results:
            print(f"{value:12.4f}  {entity}")
    return 0


def cmd_stats(args) -> int:
    settings = _settings(args)
    graph = load_triples(_required(settings, "triples"))
    stats = graph_stats(graph, top_k=args.top_k)
    if settings.get("format", "text") == "json":
        print(json.dumps(stats.to_dict(), indent=2, sort_keys=True))
    else:
        print(stats.format_text())
    return 0


def _required(settings: RunSettings, key: str):
    value = settings.get(key)
    if value is None:
        raise ConfigError(f"missing required option: --{key.replace('_', '-')}")
    return value


# -- parser ---------------------------------------------------------------------


def _add_common(parser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", type=int, help="master random seed (default 555)")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="cap worker parallelism; results never depend on it",
    )
    parser.add_argument("--format", choices=("text", "json"), help="stdout format")
    parser.add_argument("-v", "--verbose", action="store_true")


def _add_model_flags(parser) -> None:
    parser.add_argument("--family", choices=("transe", "complex"))
    parser.add_argument("--k", type=int, help="embedding dimensionality")
    parser.add_argument("--eta", type=int, help="negatives per positive")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batches-count", dest="batches_count", type=int)
    parser.add_argument("--loss", choices=("pairwise", "multiclass_nll"))
    parser.add_argument("--margin", type=float)
    parser.add_argument("--learning-rate", dest="learning_rate", type=float)
    parser.add_argument("--norm-order", dest="norm_order", type=int, choices=(1, 2))


def _add_fusion_flags(parser) -> None:
    parser.add_argument("--variation", type=int, choices=(1, 2, 3))
    parser.add_argument("--lexicon", help="lexicon TSV (variations 2/3)")
    parser.add_argument("--sentences", help="sentence TSV (variations 2/3)")
    parser.add_argument("--vectors", help="token vector file (variation 3)")
    parser.add_argument("--pooling", choices=("mean", "max"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgelab",
        description="Knowledge graph embedding toolkit "
        f"(scoring backend: {BACKEND_NAME})",
    )
    parser.add_argument("--version", action="version", version=f"kgelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="first-order triples for a seed lexicon")
    p.add_argument("--ontology", required=True, help="ontology triple TSV")
    p.add_argument("--lexicon", required=True, help="seed lexicon TSV")
    p.add_argument("--out", required=True, help="output triple TSV")
    p.add_argument("--hierarchy-relation", default="is a")
    _add_common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("variation", help="build a dataset variation or compare all")
    p.add_argument("--triples", help="base triple TSV")
    p.add_argument("--out", help="output triple TSV (build mode)")
    p.add_argument("--hints-out", help="output .npz for variation-3 init hints")
    p.add_argument("--compare", action="store_true",
                   help="train and evaluate variations 1/2/3 end to end")
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--protocol", choices=PROTOCOLS)
    p.add_argument("--report", help="JSON report path (compare mode)")
    p.add_argument("--baselines", help="JSON file of baseline metric rows")
    _add_fusion_flags(p)
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_variation)

    p = sub.add_parser("split", help="write train/test triple files")
    p.add_argument("--triples", help="input triple TSV")
    p.add_argument("--mode", choices=("holdout", "kfold"), default="holdout")
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--cv-k", dest="cv_k", type=int)
    p.add_argument("--repair", choices=("move", "drop"), default="move")
    p.add_argument("--out-train", help="train TSV path (holdout)")
    p.add_argument("--out-test", help="test TSV path (holdout)")
    p.add_argument("--out-dir", help="fold directory (kfold)")
    _add_common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model to a checkpoint")
    p.add_argument("--triples", help="base triple TSV")
    p.add_argument("--checkpoint", help="output checkpoint path")
    p.add_argument("--trace", help="output trace JSON (default <checkpoint>.trace.json)")
    p.add_argument("--freeze-hints", action="store_true",
                   help="do not update hinted sentence rows during training")
    _add_fusion_flags(p)
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="link-prediction metrics of a checkpoint")
    p.add_argument("--checkpoint", help="model checkpoint")
    p.add_argument("--test", required=True, help="test triple TSV")
    p.add_argument("--known", action="append",
                   help="extra known-true triple TSV (repeatable; e.g. train file)")
    p.add_argument("--protocol", choices=PROTOCOLS)
    p.add_argument("--report", help="JSON report path")
    p.add_argument("--baselines", help="JSON file of baseline metric rows")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cv", help="k-fold cross-validation")
    p.add_argument("--triples", help="triple TSV")
    p.add_argument("--cv-k", dest="cv_k", type=int)
    p.add_argument("--protocol", choices=PROTOCOLS)
    p.add_argument("--report", help="JSON report path")
    _add_fusion_flags(p)
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("predict", help="top-k completions of a partial triple")
    p.add_argument("--checkpoint", help="model checkpoint")
    p.add_argument("--predicate", required=True)
    p.add_argument("--subject", help="rank candidate objects for this subject")
    p.add_argument("--object", help="rank candidate subjects for this object")
    p.add_argument("--top-k", dest="top_k", type=int, default=10)
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("stats", help="triple frequency statistics")
    p.add_argument("--triples", help="triple TSV")
    p.add_argument("--top-k", dest="top_k", type=int, default=5)
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, EmptyInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KgelabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
