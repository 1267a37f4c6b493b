"""Command-line interface.

Every artifact-producing command writes a RunManifest next to its outputs
(``<out>.manifest.json``, or ``manifest.json`` inside an output
directory) recording the exact argv, the resolved options, the seed, and
sha256 checksums of inputs and outputs, so any run can be re-executed
exactly.  All writes are atomic (temp file + rename).  No command mutates
its inputs.

Exit codes: 0 success, 1 usage error, 2 data validation error,
3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
import time
from datetime import datetime, timezone

from . import baselines, evaluation, pipeline, stage, synth, tuning
from .corpus import (
    CorpusError,
    compose_label,
    corpus_to_jsonl,
    load_corpus,
    load_schemas,
    schema_value_order,
    validate_against_schema,
)

_MANIFEST_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise _UsageError(message)


# ---------------------------------------------------------------------------
# small file helpers
# ---------------------------------------------------------------------------


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _json_text(payload) -> str:
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def _manifest_path(out: str) -> str:
    if os.path.isdir(out):
        return os.path.join(out, "manifest.json")
    return out + ".manifest.json"


def _write_manifest(
    command: str,
    argv: list[str],
    resolved: dict,
    inputs: list[str],
    outputs: list[str],
    out_target: str,
    started: float,
) -> str:
    manifest = {
        "version": _MANIFEST_VERSION,
        "command": command,
        "argv": list(argv),
        "resolved": resolved,
        "seed": resolved.get("seed"),
        "inputs": {p: _sha256(p) for p in inputs},
        "outputs": {p: _sha256(p) for p in outputs},
        "wall_clock_seconds": round(time.time() - started, 3),
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    path = _manifest_path(out_target)
    _atomic_write(path, _json_text(manifest))
    return path


def _gold_label(doc, attribute, schemas):
    return compose_label(
        doc.annotations[attribute].values,
        schema_value_order(schemas, doc.report.cancer, attribute),
    )


def _parse_sizes(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise _UsageError(f"bad --sizes value {text!r}") from exc
    if not sizes:
        raise _UsageError("--sizes must list at least one size")
    return sizes


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_synth(args, argv) -> int:
    started = time.time()
    config = synth.load_gen_config(args.config)
    payload = synth.config_to_dict(config)
    if args.seed is not None:
        payload["seed"] = args.seed
    if args.num_docs is not None:
        payload["num_docs"] = args.num_docs
    if args.scheme is not None:
        payload["scheme"] = args.scheme
    config = synth.config_from_dict(payload)
    docs = synth.generate_corpus(config)
    _atomic_write(args.out, corpus_to_jsonl(docs))
    resolved = {"config": payload, "out": args.out, "seed": payload["seed"]}
    _write_manifest("synth", argv, resolved, [args.config], [args.out], args.out, started)
    print(f"wrote {len(docs)} documents to {args.out}")
    return EXIT_OK


def _cmd_validate(args, argv) -> int:
    started = time.time()
    docs = load_corpus(args.corpus)
    schemas = load_schemas(args.schema)
    report = validate_against_schema(docs, schemas)
    print(f"{len(report)} violations")
    for v in report.violations:
        print(f"  {v.doc_id} {v.attribute}: {v.message}")
    if args.out:
        payload = {
            "n_documents": len(docs),
            "n_violations": len(report),
            "violations": [
                {"id": v.doc_id, "attribute": v.attribute, "message": v.message}
                for v in report.violations
            ],
        }
        _atomic_write(args.out, _json_text(payload))
        resolved = {
            "corpus": args.corpus,
            "schema": args.schema,
            "out": args.out,
            "seed": None,
        }
        inputs = [args.corpus] + ([args.schema] if args.schema else [])
        _write_manifest("validate", argv, resolved, inputs, [args.out], args.out, started)
    return EXIT_OK if report.ok() else EXIT_DATA


def _load_params(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict):
        raise CorpusError(f"{path}: params file must hold a JSON object")
    return payload


def _cmd_train(args, argv) -> int:
    started = time.time()
    docs = load_corpus(args.corpus)
    schemas = load_schemas(args.schema)
    config = _load_params(args.params)
    rules = None
    if args.rules:
        rules = pipeline.load_keyword_rules(args.rules).get(args.attribute)
        if rules is None:
            raise CorpusError(f"{args.rules}: no rules for attribute {args.attribute!r}")
    fitted = tuning.fit_variant(
        args.variant,
        docs,
        args.attribute,
        config,
        seed=args.seed,
        schemas=schemas,
        keyword_rules=rules,
    )
    if fitted.sla_model is not None:
        bundle = pipeline.model_to_dict(fitted.sla_model)
    else:
        bundle = baselines.baseline_to_dict(fitted.baseline)
    _atomic_write(args.out, json.dumps(bundle) + "\n")
    resolved = {
        "corpus": args.corpus,
        "attribute": args.attribute,
        "variant": args.variant,
        "params": config,
        "seed": args.seed,
        "out": args.out,
    }
    inputs = [args.corpus] + ([args.params] if args.params else [])
    _write_manifest("train", argv, resolved, inputs, [args.out], args.out, started)
    print(f"trained {args.variant} model for {args.attribute!r} -> {args.out}")
    return EXIT_OK


def _load_model_bundle(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    kind = payload.get("kind")
    if kind == "sla":
        return pipeline.model_from_dict(payload), None
    if kind in baselines.BASELINE_KINDS:
        return None, baselines.baseline_from_dict(payload)
    raise CorpusError(f"{path}: unknown model bundle kind {kind!r}")


def _cmd_predict(args, argv) -> int:
    started = time.time()
    docs = load_corpus(args.corpus)
    sla_model, baseline = _load_model_bundle(args.model)
    records = []
    for doc in docs:
        if sla_model is not None:
            gold = None
            if sla_model.variant == "oracle":
                ann = doc.annotations.get(sla_model.attribute)
                if ann is None:
                    raise CorpusError(
                        f"doc {doc.report.id}: oracle model needs gold lines for "
                        f"{sla_model.attribute!r}"
                    )
                gold = ann.line_indices
            pred = pipeline.predict_sla(sla_model, doc.report, gold_lines=gold)
            rationale = [
                {
                    "start": seg.start,
                    "end": seg.end,
                    "weight": seg.weight,
                    "text": " ".join(doc.report.lines[seg.start : seg.end + 1]),
                }
                for seg in pred.rationale.segments
            ]
            records.append(
                {
                    "id": doc.report.id,
                    "attribute": sla_model.attribute,
                    "label": pred.label,
                    "scores": pred.scores,
                    "rationale": rationale,
                }
            )
        else:
            label, scores = baselines.predict_doc_baseline(baseline, doc.report)
            records.append(
                {
                    "id": doc.report.id,
                    "attribute": baseline.attribute,
                    "label": label,
                    "scores": scores,
                    "rationale": [],
                }
            )
    text = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)
    _atomic_write(args.out, text)
    resolved = {
        "corpus": args.corpus,
        "model": args.model,
        "out": args.out,
        "seed": None,
    }
    _write_manifest(
        "predict", argv, resolved, [args.corpus, args.model], [args.out], args.out, started
    )
    print(f"wrote {len(records)} predictions to {args.out}")
    return EXIT_OK


def _load_predictions(path: str) -> dict[tuple[str, str], str]:
    preds: dict[tuple[str, str], str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                key = (record["id"], record["attribute"])
                label = record["label"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise CorpusError(f"{path}: record {lineno}: {exc}") from exc
            if key in preds:
                raise CorpusError(f"{path}: record {lineno}: duplicate prediction {key}")
            preds[key] = label
    return preds


def _cmd_evaluate(args, argv) -> int:
    started = time.time()
    docs = load_corpus(args.corpus)
    by_id = {d.report.id: d for d in docs}
    schemas = load_schemas(args.schema)
    preds = _load_predictions(args.preds)
    grouped: dict[str, list[tuple[str, str]]] = {}
    for (doc_id, attribute), label in preds.items():
        doc = by_id.get(doc_id)
        if doc is None:
            raise CorpusError(f"prediction for unknown document {doc_id!r}")
        if attribute not in doc.annotations:
            raise CorpusError(f"doc {doc_id} has no gold label for {attribute!r}")
        grouped.setdefault(attribute, []).append(
            (label, _gold_label(doc, attribute, schemas))
        )
    if not grouped:
        raise CorpusError(f"{args.preds}: no predictions to evaluate")
    attr_reports = {}
    payload_attrs = {}
    for attribute in sorted(grouped):
        outcomes = grouped[attribute]
        p = [x for x, _ in outcomes]
        g = [x for _, x in outcomes]
        report = evaluation.evaluate_attribute(p, g)
        micro_ci = evaluation.bootstrap_ci(
            outcomes, evaluation.micro_f1, args.bootstrap_iterations, args.ci_level, args.seed
        )
        macro_ci = evaluation.bootstrap_ci(
            outcomes, evaluation.macro_f1, args.bootstrap_iterations, args.ci_level, args.seed
        )
        attr_reports[attribute] = report
        payload_attrs[attribute] = {
            "micro_f1": report.micro_f1,
            "macro_f1": report.macro_f1,
            "micro_ci": list(micro_ci),
            "macro_ci": list(macro_ci),
            "n_docs": report.n_docs,
            "per_class": {
                c: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for c, m in report.per_class.items()
            },
            "confusion": report.confusion,
        }
    summary = evaluation.evaluate_attributes(attr_reports)
    payload = {
        "attributes": payload_attrs,
        "avg_micro_f1": summary.avg_micro_f1,
        "avg_macro_f1": summary.avg_macro_f1,
        "ci_level": args.ci_level,
        "bootstrap_iterations": args.bootstrap_iterations,
    }
    _atomic_write(args.out, _json_text(payload))
    resolved = {
        "corpus": args.corpus,
        "preds": args.preds,
        "bootstrap_iterations": args.bootstrap_iterations,
        "ci_level": args.ci_level,
        "seed": args.seed,
        "out": args.out,
    }
    _write_manifest(
        "evaluate", argv, resolved, [args.corpus, args.preds], [args.out], args.out, started
    )
    print(
        f"avg micro-F1 {summary.avg_micro_f1:.4f}, avg macro-F1 {summary.avg_macro_f1:.4f} "
        f"over {len(attr_reports)} attribute(s)"
    )
    return EXIT_OK


def _cmd_tune(args, argv) -> int:
    started = time.time()
    docs = load_corpus(args.corpus)
    schemas = load_schemas(args.schema)
    best, results = tuning.random_search(
        docs,
        args.attribute,
        trials=args.trials,
        folds=args.folds,
        seed=args.seed,
        variant=args.variant,
        schemas=schemas,
        jobs=args.jobs,
    )
    os.makedirs(args.out, exist_ok=True)
    best_path = os.path.join(args.out, "best.json")
    trials_path = os.path.join(args.out, "trials.jsonl")
    _atomic_write(best_path, _json_text(best))
    trial_lines = io.StringIO()
    for i, result in enumerate(results):
        trial_lines.write(
            json.dumps(
                {
                    "trial": i,
                    "config": result.config,
                    "fold_scores": list(result.fold_scores),
                    "mean_score": result.mean_score,
                },
                ensure_ascii=False,
            )
            + "\n"
        )
    _atomic_write(trials_path, trial_lines.getvalue())
    resolved = {
        "corpus": args.corpus,
        "attribute": args.attribute,
        "variant": args.variant,
        "trials": args.trials,
        "folds": args.folds,
        "seed": args.seed,
        "jobs": args.jobs,
        "out": args.out,
    }
    _write_manifest(
        "tune", argv, resolved, [args.corpus], [best_path, trials_path], args.out, started
    )
    best_score = max(r.mean_score for r in results)
    print(f"best mean micro-F1 {best_score:.4f} over {len(results)} trials -> {best_path}")
    return EXIT_OK


def _cmd_learning_curve(args, argv) -> int:
    started = time.time()
    docs = load_corpus(args.corpus)
    schemas = load_schemas(args.schema)
    sizes = _parse_sizes(args.sizes)
    attributes = [a.strip() for a in args.attribute.split(",") if a.strip()]
    if not attributes:
        raise _UsageError("--attribute must name at least one attribute")
    curves = []
    for attribute in attributes:
        curves.append(
            evaluation.learning_curve(
                docs,
                attribute,
                variant=args.variant,
                sizes=sizes,
                runs=args.runs,
                base_seed=args.seed,
                trials=args.trials,
                folds=args.folds,
                ci_iterations=args.ci_iterations,
                ci_level=args.ci_level,
                schemas=schemas,
                jobs=args.jobs,
            )
        )
    os.makedirs(args.out, exist_ok=True)
    curve_path = os.path.join(args.out, "curve.json")
    table_path = os.path.join(args.out, "curve.csv")

    cells_payload = []
    for curve in curves:
        for cell in curve.cells:
            cells_payload.append(
                {
                    "attribute": cell.attribute,
                    "size": cell.size,
                    "run": cell.run,
                    "split_seed": cell.split_seed,
                    "search_seed": cell.search_seed,
                    "best_config": cell.best_config,
                    "micro_f1": cell.report.micro_f1,
                    "macro_f1": cell.report.macro_f1,
                    "micro_ci": list(cell.report.micro_ci),
                    "macro_ci": list(cell.report.macro_ci),
                    "n_test_docs": cell.report.n_docs,
                }
            )
    summary = [
        {
            "attribute": curve.attribute,
            "size": size,
            "mean_micro_f1": curve.mean_micro_f1(size),
            "mean_macro_f1": curve.mean_macro_f1(size),
        }
        for curve in curves
        for size in curve.sizes
    ]
    payload = {
        "variant": args.variant,
        "attributes": attributes,
        "sizes": list(sizes),
        "runs": args.runs,
        "trials": args.trials,
        "folds": args.folds,
        "ci_level": args.ci_level,
        "ci_iterations": args.ci_iterations,
        "seed": args.seed,
        "cells": cells_payload,
        "summary": summary,
    }
    _atomic_write(curve_path, _json_text(payload))

    table = io.StringIO()
    writer = csv.writer(table)
    writer.writerow(
        [
            "attribute",
            "size",
            "run",
            "split_seed",
            "search_seed",
            "micro_f1",
            "macro_f1",
            "micro_ci_lo",
            "micro_ci_hi",
            "macro_ci_lo",
            "macro_ci_hi",
            "n_test_docs",
        ]
    )
    for cell in cells_payload:
        writer.writerow(
            [
                cell["attribute"],
                cell["size"],
                cell["run"],
                cell["split_seed"],
                cell["search_seed"],
                repr(cell["micro_f1"]),
                repr(cell["macro_f1"]),
                repr(cell["micro_ci"][0]),
                repr(cell["micro_ci"][1]),
                repr(cell["macro_ci"][0]),
                repr(cell["macro_ci"][1]),
                cell["n_test_docs"],
            ]
        )
    _atomic_write(table_path, table.getvalue())

    resolved = {
        "corpus": args.corpus,
        "attribute": args.attribute,
        "variant": args.variant,
        "sizes": list(sizes),
        "runs": args.runs,
        "trials": args.trials,
        "folds": args.folds,
        "ci_iterations": args.ci_iterations,
        "ci_level": args.ci_level,
        "seed": args.seed,
        "jobs": args.jobs,
        "out": args.out,
    }
    _write_manifest(
        "learning-curve",
        argv,
        resolved,
        [args.corpus],
        [curve_path, table_path],
        args.out,
        started,
    )
    print(f"wrote {len(cells_payload)} curve cells to {curve_path}")
    return EXIT_OK


def _load_label_file(path: str) -> dict[tuple[str, str], str]:
    labels: dict[tuple[str, str], str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                key = (record["id"], record["attribute"])
                labels[key] = record["label"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise CorpusError(f"{path}: record {lineno}: {exc}") from exc
    return labels


def _cmd_agreement(args, argv) -> int:
    started = time.time()
    labels_a = _load_label_file(args.a)
    labels_b = _load_label_file(args.b)
    if set(labels_a) != set(labels_b):
        only_a = len(set(labels_a) - set(labels_b))
        only_b = len(set(labels_b) - set(labels_a))
        raise CorpusError(
            f"annotation files cover different items ({only_a} only in a, {only_b} only in b)"
        )
    by_attr: dict[str, list[tuple[str, str]]] = {}
    for key in sorted(labels_a):
        by_attr.setdefault(key[1], []).append((labels_a[key], labels_b[key]))
    payload_attrs = {}
    for attribute, pairs in sorted(by_attr.items()):
        fraction, kappa = evaluation.agreement(
            [x for x, _ in pairs], [y for _, y in pairs]
        )
        payload_attrs[attribute] = {"fraction": fraction, "kappa": kappa, "n": len(pairs)}
    all_pairs = [p for pairs in by_attr.values() for p in pairs]
    fraction, kappa = evaluation.agreement(
        [x for x, _ in all_pairs], [y for _, y in all_pairs]
    )
    payload = {
        "attributes": payload_attrs,
        "overall": {"fraction": fraction, "kappa": kappa, "n": len(all_pairs)},
    }
    _atomic_write(args.out, _json_text(payload))
    resolved = {"a": args.a, "b": args.b, "out": args.out, "seed": None}
    _write_manifest("agreement", argv, resolved, [args.a, args.b], [args.out], args.out, started)
    for attribute, entry in payload_attrs.items():
        print(f"{attribute}: fraction {entry['fraction']:.4f}, kappa {entry['kappa']:.4f}")
    return EXIT_OK


def _cmd_stage(args, argv) -> int:
    started = time.time()
    docs = load_corpus(args.corpus)
    lines = io.StringIO()
    n_found = 0
    for doc in docs:
        parsed = stage.stage_report(doc.report)
        if parsed is None:
            record = {"id": doc.report.id, "token": None}
        else:
            n_found += 1
            record = {
                "id": doc.report.id,
                "token": stage.compose_tnm(parsed),
                "prefixes": list(parsed.prefixes),
                "t": parsed.t,
                "n": parsed.n,
                "m": parsed.m,
            }
        lines.write(json.dumps(record, ensure_ascii=False) + "\n")
    _atomic_write(args.out, lines.getvalue())
    resolved = {"corpus": args.corpus, "out": args.out, "seed": None}
    _write_manifest("stage", argv, resolved, [args.corpus], [args.out], args.out, started)
    print(f"found stage tokens in {n_found}/{len(docs)} documents")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="sla", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--config", required=True, help="generator config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--num-docs", type=int, default=None, dest="num_docs")
    p.add_argument("--scheme", choices=("minimal", "full"), default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("validate", help="check a corpus against a schema")
    p.add_argument("--corpus", required=True)
    p.add_argument("--schema", default=None, help="schema JSON (default: packaged)")
    p.add_argument("--out", default=None, help="optional violations report JSON")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("train", help="train one variant for one attribute")
    p.add_argument("--corpus", required=True)
    p.add_argument("--attribute", required=True)
    p.add_argument("--variant", default="sla", choices=tuning.METHODS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", default=None, help="flat config JSON (e.g. tune's best.json)")
    p.add_argument("--rules", default=None, help="keyword rules JSON for the rules variant")
    p.add_argument("--schema", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predict labels with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against gold labels")
    p.add_argument("--corpus", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--schema", default=None)
    p.add_argument("--bootstrap-iterations", type=int, default=1000, dest="bootstrap_iterations")
    p.add_argument("--ci-level", type=float, default=0.95, dest="ci_level")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("tune", help="random-search hyperparameters")
    p.add_argument("--corpus", required=True)
    p.add_argument("--attribute", required=True)
    p.add_argument("--variant", default="sla", choices=tuning.METHODS)
    p.add_argument("--trials", type=int, default=40)
    p.add_argument("--folds", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--schema", default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("learning-curve", help="accuracy vs training-set size")
    p.add_argument("--corpus", required=True)
    p.add_argument("--attribute", required=True, help="attribute, or comma-separated list")
    p.add_argument("--variant", default="sla", choices=tuning.METHODS)
    p.add_argument("--sizes", default="32,64,128,186")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--trials", type=int, default=40)
    p.add_argument("--folds", type=int, default=4)
    p.add_argument("--ci-iterations", type=int, default=1000, dest="ci_iterations")
    p.add_argument("--ci-level", type=float, default=0.95, dest="ci_level")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--schema", default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_learning_curve)

    p = sub.add_parser("agreement", help="inter-annotator agreement per attribute")
    p.add_argument("--a", required=True, help="JSONL of {id, attribute, label}")
    p.add_argument("--b", required=True, help="JSONL of {id, attribute, label}")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_agreement)

    p = sub.add_parser("stage", help="extract TNM stage tokens from reports")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_stage)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusError, ValueError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
