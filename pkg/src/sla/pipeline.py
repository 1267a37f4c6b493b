"""The two-stage supervised line attention pipeline and its ablations.

Stage 1 scores every report line for relevance to one attribute with a
boosted-tree classifier over line n-grams, trained from the annotators'
highlighted lines.  The top-k lines are kept, adjacent kept lines are
joined into segments (a joined segment's weight is the maximum of its
members' scores), and the document representation is

    d_r = sum over segments of  m(segment) * v(segment tokens)

where v is the binary bag-of-n-grams of the segment re-tokenized as one
line and m is the segment weight.  Stage 2 classifies d_r with
L1-regularized logistic regression.

Variants:
    sla                 scored top-k lines, joined, score-weighted
    no_weight           scored top-k lines, joined, weight 1
    no_join             scored top-k lines, unjoined, score-weighted
    no_weight_no_join   scored top-k lines, unjoined, weight 1
    rules               keyword-matched lines (no cap), joined, weight 1
    oracle              annotator's gold lines, joined, weight 1
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import (
    AttributeSchema,
    LabeledDocument,
    Report,
    compose_label,
    schema_value_order,
)
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
    sum_vectors,
    to_csr,
    tokenize,
    tokenize_lines,
    vectorize,
)

VARIANTS = ("sla", "rules", "oracle", "no_weight", "no_join", "no_weight_no_join")
SCORED_VARIANTS = ("sla", "no_weight", "no_join", "no_weight_no_join")

_RULES_RESOURCE = "data/keyword_rules.json"


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LineRelevanceExample:
    """One line turned into a stage-1 training example."""

    vector: SparseVector
    relevant: bool
    doc_id: str
    line_index: int


@dataclass(frozen=True)
class Segment:
    """A run of adjacent selected lines [start, end] with its weight."""

    start: int
    end: int
    weight: float

    def __post_init__(self) -> None:
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"bad segment bounds ({self.start}, {self.end})")


@dataclass(frozen=True)
class SelectedLines:
    """The lines kept for one document: disjoint, sorted segments."""

    segments: tuple[Segment, ...]
    k: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        prev_end = -1
        for seg in self.segments:
            if seg.start <= prev_end:
                raise ValueError("segments must be disjoint and sorted")
            prev_end = seg.end

    def line_indices(self) -> tuple[int, ...]:
        return tuple(
            i for seg in self.segments for i in range(seg.start, seg.end + 1)
        )


@dataclass(frozen=True)
class DocRepresentation:
    vector: SparseVector
    provenance: SelectedLines


@dataclass(frozen=True)
class SlaHyperParams:
    line_ngram_n: int = 2
    final_ngram_n: int = 2
    k: int = 3
    gbt: GbtParams = field(default_factory=GbtParams)
    lin: LinParams = field(default_factory=LinParams)

    def __post_init__(self) -> None:
        if not 1 <= self.line_ngram_n <= 4:
            raise ValueError("line_ngram_n must be in [1, 4]")
        if not 1 <= self.final_ngram_n <= 4:
            raise ValueError("final_ngram_n must be in [1, 4]")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class Prediction:
    label: str
    scores: dict[str, float]
    rationale: SelectedLines


@dataclass
class SlaModel:
    """Everything needed to reproduce a prediction: both stages' vocabularies
    and learners, the variant, and the selection hyperparameters."""

    attribute: str
    variant: str
    k: int
    final_vocab: Vocabulary
    final_classifier: LinearModel
    line_vocab: Vocabulary | None = None
    line_scorer: GbtModel | None = None
    keyword_rules: tuple[str, ...] | None = None
    hyper: SlaHyperParams | None = None

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant in SCORED_VARIANTS:
            if self.line_scorer is None or self.line_vocab is None:
                raise ValueError(f"variant {self.variant} requires a line scorer")
        if self.variant == "rules" and not self.keyword_rules:
            raise ValueError("rules variant requires keyword rules")


# ---------------------------------------------------------------------------
# keyword rules
# ---------------------------------------------------------------------------


def load_keyword_rules(path: str | None = None) -> dict[str, tuple[str, ...]]:
    """Per-attribute keyword phrases for the rule-based selector.  The
    packaged defaults are editable by pointing at another JSON file."""
    if path is None:
        raw = resources.files(__package__).joinpath(_RULES_RESOURCE).read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    payload = json.loads(raw)
    return {attr: tuple(phrases) for attr, phrases in payload["rules"].items()}


def _contains_subsequence(tokens: Sequence[str], phrase: Sequence[str]) -> bool:
    if not phrase or len(phrase) > len(tokens):
        return False
    for i in range(len(tokens) - len(phrase) + 1):
        if tuple(tokens[i : i + len(phrase)]) == tuple(phrase):
            return True
    return False


def rule_select(report: Report, keyword_rules: Iterable[str]) -> tuple[int, ...]:
    """Indices of lines whose normalized tokens contain any rule phrase as
    a contiguous subsequence."""
    phrases = [tokenize(rule) for rule in keyword_rules]
    hits = []
    for tl in tokenize_lines(report):
        if any(_contains_subsequence(tl.tokens, p) for p in phrases):
            hits.append(tl.source_line_index)
    return tuple(hits)


# ---------------------------------------------------------------------------
# selection and representation
# ---------------------------------------------------------------------------


def build_line_labels(
    doc: LabeledDocument, attribute: str, line_vocab: Vocabulary
) -> list[LineRelevanceExample]:
    """Stage-1 training examples for one document: a line is positive iff
    the annotator highlighted it for this attribute."""
    if attribute not in doc.annotations:
        raise ValueError(f"doc {doc.report.id} has no annotation for {attribute!r}")
    gold = set(doc.annotations[attribute].line_indices)
    return [
        LineRelevanceExample(
            vector=vectorize(tl, line_vocab),
            relevant=tl.source_line_index in gold,
            doc_id=doc.report.id,
            line_index=tl.source_line_index,
        )
        for tl in tokenize_lines(doc.report)
    ]


def select_top_k(scores: Sequence[float], k: int) -> tuple[int, ...]:
    """Indices of the k highest-scoring lines (ascending index order).
    Ties resolve toward the lower line index; k is clamped to the number
    of lines."""
    if k < 1:
        raise ValueError("k must be >= 1")
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    return tuple(sorted(int(i) for i in order[:k]))


def join_adjacent(
    selected: Sequence[int], line_scores, k: int | None = None
) -> SelectedLines:
    """Merge runs of adjacent selected lines into segments.  A joined
    segment's weight is the maximum of its member scores."""
    idx = sorted(set(selected))

    def score_of(i: int) -> float:
        return float(line_scores[i])

    segments: list[Segment] = []
    pos = 0
    while pos < len(idx):
        start = end = idx[pos]
        weight = score_of(start)
        while pos + 1 < len(idx) and idx[pos + 1] == end + 1:
            pos += 1
            end = idx[pos]
            weight = max(weight, score_of(end))
        segments.append(Segment(start, end, weight))
        pos += 1
    return SelectedLines(tuple(segments), k=len(idx) if k is None else k)


def compose_representation(
    selection: SelectedLines,
    report: Report,
    final_vocab: Vocabulary,
    weighting: bool = True,
) -> DocRepresentation:
    """Weighted sum of segment vectors.  Each segment's member lines are
    joined with a space and re-tokenized as one line, so n-grams may cross
    the original line boundaries inside a segment.  With weighting off,
    every segment contributes with weight 1."""
    parts = []
    for seg in selection.segments:
        text = " ".join(report.lines[seg.start : seg.end + 1])
        vec = vectorize(tokenize(text), final_vocab)
        parts.append(vec.scaled(seg.weight if weighting else 1.0))
    vector = sum_vectors(parts, final_vocab.dimension)
    return DocRepresentation(vector=vector, provenance=selection)


def _flat_weight_one(selection: SelectedLines) -> SelectedLines:
    return SelectedLines(
        tuple(Segment(s.start, s.end, 1.0) for s in selection.segments), selection.k
    )


def _select(
    variant: str,
    k: int,
    line_vocab: Vocabulary | None,
    line_scorer: GbtModel | None,
    keyword_rules: Sequence[str] | None,
    report: Report,
    gold_lines: Sequence[int] | None,
) -> SelectedLines:
    if variant in SCORED_VARIANTS:
        vecs = [vectorize(tl, line_vocab) for tl in tokenize_lines(report)]
        scores = predict_gbt_batch(line_scorer, to_csr(vecs, line_vocab.dimension))
        chosen = select_top_k(scores, k)
        if variant in ("no_join", "no_weight_no_join"):
            segments = tuple(
                Segment(i, i, 1.0 if variant == "no_weight_no_join" else float(scores[i]))
                for i in chosen
            )
            return SelectedLines(segments, k=k)
        selection = join_adjacent(chosen, scores, k=k)
        return _flat_weight_one(selection) if variant == "no_weight" else selection
    if variant == "rules":
        chosen = rule_select(report, keyword_rules)
        return _flat_weight_one(join_adjacent(chosen, {i: 1.0 for i in chosen}, k=len(chosen)))
    if variant == "oracle":
        if gold_lines is None:
            raise ValueError("oracle variant needs the annotator's gold lines")
        chosen = tuple(sorted(set(gold_lines)))
        return _flat_weight_one(join_adjacent(chosen, {i: 1.0 for i in chosen}, k=len(chosen)))
    raise ValueError(f"unknown variant {variant!r}")


def select_segments(
    model: "SlaModel", report: Report, gold_lines: Sequence[int] | None = None
) -> SelectedLines:
    """Run the variant's line-selection policy for one report."""
    return _select(
        model.variant,
        model.k,
        model.line_vocab,
        model.line_scorer,
        model.keyword_rules,
        report,
        gold_lines,
    )


def represent_document(
    model: "SlaModel", report: Report, gold_lines: Sequence[int] | None = None
) -> DocRepresentation:
    selection = select_segments(model, report, gold_lines)
    return compose_representation(selection, report, model.final_vocab, weighting=True)


# ---------------------------------------------------------------------------
# training and prediction
# ---------------------------------------------------------------------------


def train_sla(
    train_docs: Sequence[LabeledDocument],
    attribute: str,
    hyper: SlaHyperParams | None = None,
    variant: str = "sla",
    keyword_rules: Sequence[str] | None = None,
    schemas: Mapping[tuple[str, str], AttributeSchema] | None = None,
) -> SlaModel:
    """Train the selected pipeline variant for one attribute.

    Both vocabularies are built from every line of the training documents,
    so a test-time selection can never produce an unseen feature index.
    Labels are the composed annotation values; the final classifier uses
    balanced class weights.
    """
    if hyper is None:
        hyper = SlaHyperParams()
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    docs = [d for d in train_docs if attribute in d.annotations]
    if len(docs) < 2:
        raise ValueError(
            f"need at least 2 training documents annotated for {attribute!r}, got {len(docs)}"
        )

    all_lines = [tl.tokens for d in docs for tl in tokenize_lines(d.report)]

    line_vocab = line_scorer = None
    rules = None
    if variant in SCORED_VARIANTS:
        line_vocab = build_vocabulary(all_lines, hyper.line_ngram_n)
        examples = [
            ex for d in docs for ex in build_line_labels(d, attribute, line_vocab)
        ]
        X_lines = to_csr([ex.vector for ex in examples], line_vocab.dimension)
        y_lines = np.array([1.0 if ex.relevant else 0.0 for ex in examples])
        line_scorer = train_gbt(X_lines, y_lines, hyper.gbt)
    elif variant == "rules":
        if keyword_rules is None:
            defaults = load_keyword_rules()
            if attribute not in defaults:
                raise ValueError(f"no default keyword rules for {attribute!r}")
            rules = defaults[attribute]
        else:
            rules = tuple(keyword_rules)

    final_vocab = build_vocabulary(all_lines, hyper.final_ngram_n)

    reps = []
    labels = []
    for d in docs:
        ann = d.annotations[attribute]
        selection = _select(
            variant, hyper.k, line_vocab, line_scorer, rules, d.report, ann.line_indices
        )
        rep = compose_representation(selection, d.report, final_vocab, weighting=True)
        order = schema_value_order(schemas, d.report.cancer, attribute)
        reps.append(rep.vector)
        labels.append(compose_label(ann.values, order))

    classifier = train_l1_logreg(to_csr(reps, final_vocab.dimension), labels, hyper.lin)
    return SlaModel(
        attribute=attribute,
        variant=variant,
        k=hyper.k,
        final_vocab=final_vocab,
        final_classifier=classifier,
        line_vocab=line_vocab,
        line_scorer=line_scorer,
        keyword_rules=rules,
        hyper=hyper,
    )


def predict_sla(
    model: SlaModel, report: Report, gold_lines: Sequence[int] | None = None
) -> Prediction:
    """Predict the attribute label for one report.  The rationale is the
    exact selection used to build the representation, so the prediction
    can be recomputed from (rationale, report, model)."""
    rep = represent_document(model, report, gold_lines=gold_lines)
    label, scores = predict_logreg(model.final_classifier, rep.vector)
    return Prediction(label=str(label), scores=scores, rationale=rep.provenance)


# ---------------------------------------------------------------------------
# model bundle serialization
# ---------------------------------------------------------------------------

_BUNDLE_VERSION = 1


def model_to_dict(model: SlaModel) -> dict:
    hyper = model.hyper
    return {
        "version": _BUNDLE_VERSION,
        "kind": "sla",
        "attribute": model.attribute,
        "variant": model.variant,
        "k": model.k,
        "final_vocab": model.final_vocab.to_dict(),
        "final_classifier": model.final_classifier.to_dict(),
        "line_vocab": model.line_vocab.to_dict() if model.line_vocab else None,
        "line_scorer": model.line_scorer.to_dict() if model.line_scorer else None,
        "keyword_rules": list(model.keyword_rules) if model.keyword_rules else None,
        "hyper": None
        if hyper is None
        else {
            "line_ngram_n": hyper.line_ngram_n,
            "final_ngram_n": hyper.final_ngram_n,
            "k": hyper.k,
        },
    }


def model_from_dict(payload: dict) -> SlaModel:
    if payload.get("kind") != "sla":
        raise ValueError(f"not an sla model bundle: kind={payload.get('kind')!r}")
    hyper = None
    if payload.get("hyper"):
        hyper = SlaHyperParams(
            line_ngram_n=payload["hyper"]["line_ngram_n"],
            final_ngram_n=payload["hyper"]["final_ngram_n"],
            k=payload["hyper"]["k"],
        )
    return SlaModel(
        attribute=payload["attribute"],
        variant=payload["variant"],
        k=payload["k"],
        final_vocab=Vocabulary.from_dict(payload["final_vocab"]),
        final_classifier=LinearModel.from_dict(payload["final_classifier"]),
        line_vocab=Vocabulary.from_dict(payload["line_vocab"])
        if payload.get("line_vocab")
        else None,
        line_scorer=GbtModel.from_dict(payload["line_scorer"])
        if payload.get("line_scorer")
        else None,
        keyword_rules=tuple(payload["keyword_rules"])
        if payload.get("keyword_rules")
        else None,
        hyper=hyper,
    )


def save_model(model: SlaModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def load_model(path: str) -> SlaModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
