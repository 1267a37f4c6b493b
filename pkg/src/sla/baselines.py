"""Whole-document baselines: the same two learners without line selection.

A document is represented as the union of its per-line n-gram sets
(binary presence, n-grams never crossing line boundaries), then classified
with either L1 logistic regression ("doc-logreg") or one-vs-rest boosted
trees ("doc-boost").
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import AttributeSchema, LabeledDocument, Report, compose_label, schema_value_order
from .learners import (
    GbtModel,
    GbtParams,
    LinearModel,
    LinParams,
    predict_gbt_batch,
    predict_logreg,
    train_gbt,
    train_l1_logreg,
)
from .textproc import (
    SparseVector,
    Vocabulary,
    build_vocabulary,
    to_csr,
    tokenize_lines,
    vectorize,
)

BASELINE_KINDS = ("doc-logreg", "doc-boost")


def featurize_document(report: Report, vocab: Vocabulary) -> SparseVector:
    """Union of the report's per-line n-gram features (binary presence)."""
    idx: set[int] = set()
    for tl in tokenize_lines(report):
        idx.update(vectorize(tl, vocab).indices)
    indices = tuple(sorted(idx))
    return SparseVector(indices, (1.0,) * len(indices), vocab.dimension)


@dataclass
class DocBaselineModel:
    attribute: str
    kind: str
    vocab: Vocabulary
    linear: LinearModel | None = None
    boost_classes: tuple | None = None
    boost_models: list[GbtModel] | None = None

    def __post_init__(self) -> None:
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}")


def train_doc_baseline(
    train_docs: Sequence[LabeledDocument],
    attribute: str,
    kind: str = "doc-logreg",
    ngram_n: int = 1,
    lin: LinParams | None = None,
    gbt: GbtParams | None = None,
    schemas: Mapping[tuple[str, str], AttributeSchema] | None = None,
) -> DocBaselineModel:
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline kind {kind!r}")
    docs = [d for d in train_docs if attribute in d.annotations]
    if len(docs) < 2:
        raise ValueError(
            f"need at least 2 training documents annotated for {attribute!r}, got {len(docs)}"
        )
    all_lines = [tl.tokens for d in docs for tl in tokenize_lines(d.report)]
    vocab = build_vocabulary(all_lines, ngram_n)
    X = to_csr([featurize_document(d.report, vocab) for d in docs], vocab.dimension)
    labels = [
        compose_label(
            d.annotations[attribute].values,
            schema_value_order(schemas, d.report.cancer, attribute),
        )
        for d in docs
    ]
    model = DocBaselineModel(attribute=attribute, kind=kind, vocab=vocab)
    if kind == "doc-logreg":
        model.linear = train_l1_logreg(X, labels, lin or LinParams())
    else:
        classes = tuple(sorted(set(labels)))
        model.boost_classes = classes
        model.boost_models = []
        if len(classes) == 1:
            model.boost_models = None  # constant predictor, handled at predict time
        else:
            for cls in classes:
                y = np.array([1.0 if lab == cls else 0.0 for lab in labels])
                model.boost_models.append(train_gbt(X, y, gbt or GbtParams()))
    return model


def predict_doc_baseline(model: DocBaselineModel, report: Report) -> tuple[str, dict]:
    x = featurize_document(report, model.vocab)
    if model.kind == "doc-logreg":
        label, scores = predict_logreg(model.linear, x)
        return str(label), scores
    classes = model.boost_classes
    if model.boost_models is None:
        return str(classes[0]), {str(classes[0]): 1.0}
    row = to_csr([x], model.vocab.dimension)
    probs = np.array([predict_gbt_batch(m, row)[0] for m in model.boost_models])
    best = int(np.argmax(probs))
    return str(classes[best]), {str(c): float(p) for c, p in zip(classes, probs)}


# ---------------------------------------------------------------------------
# serialization, mirroring the sla bundle format
# ---------------------------------------------------------------------------


def baseline_to_dict(model: DocBaselineModel) -> dict:
    return {
        "version": 1,
        "kind": model.kind,
        "attribute": model.attribute,
        "vocab": model.vocab.to_dict(),
        "linear": model.linear.to_dict() if model.linear else None,
        "boost_classes": list(model.boost_classes) if model.boost_classes else None,
        "boost_models": [m.to_dict() for m in model.boost_models]
        if model.boost_models
        else None,
    }


def baseline_from_dict(payload: dict) -> DocBaselineModel:
    return DocBaselineModel(
        attribute=payload["attribute"],
        kind=payload["kind"],
        vocab=Vocabulary.from_dict(payload["vocab"]),
        linear=LinearModel.from_dict(payload["linear"]) if payload.get("linear") else None,
        boost_classes=tuple(payload["boost_classes"])
        if payload.get("boost_classes")
        else None,
        boost_models=[GbtModel.from_dict(m) for m in payload["boost_models"]]
        if payload.get("boost_models")
        else None,
    )


def save_baseline(model: DocBaselineModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(baseline_to_dict(model), fh)
        fh.write("\n")


def load_baseline(path: str) -> DocBaselineModel:
    with open(path, "r", encoding="utf-8") as fh:
        return baseline_from_dict(json.load(fh))
