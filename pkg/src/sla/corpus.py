"""Report / annotation data model, schema validation, and corpus file I/O.

A corpus is a UTF-8 JSON-lines file, one document per line:

    {"id": "colon-0007", "cancer": "colon", "lines": ["...", "..."],
     "annotations": [{"attribute": "grade", "values": ["grade 2"],
                      "lines": [14], "scheme": "minimal"}]}

Line indices are 0-based into ``lines``.  "not reported" is an ordinary
schema value, and it is the only label permitted to carry an empty
highlight set (nothing in the report supports it).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping, Sequence

CANCERS = ("colon", "kidney")
SCHEMES = ("minimal", "full")
NOT_REPORTED = "not reported"

_SCHEMA_RESOURCE = "data/schema.json"


class CorpusError(ValueError):
    """Raised for malformed corpus files or violated data invariants."""


# ---------------------------------------------------------------------------
# core types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Report:
    """One de-identified free-text report, kept as its original lines."""

    id: str
    cancer: str
    lines: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("report id must be non-empty")
        if self.cancer not in CANCERS:
            raise CorpusError(f"unknown cancer {self.cancer!r} (expected one of {CANCERS})")
        object.__setattr__(self, "lines", tuple(self.lines))
        if len(self.lines) < 1:
            raise CorpusError(f"report {self.id}: must have at least one line")
        for i, line in enumerate(self.lines):
            if "\n" in line or "\r" in line:
                raise CorpusError(f"report {self.id}: line {i} contains a newline")


@dataclass(frozen=True)
class EnrichedAnnotation:
    """A gold label for one attribute plus the lines that support it.

    ``scheme`` records how the highlights were produced: "minimal" keeps
    only the first supporting line per value (synoptic section preferred),
    "full" keeps every supporting line.
    """

    attribute: str
    values: tuple[str, ...]
    line_indices: tuple[int, ...]
    scheme: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "line_indices", tuple(sorted(set(self.line_indices))))
        if not self.attribute:
            raise CorpusError("annotation attribute must be non-empty")
        if not self.values:
            raise CorpusError(f"annotation {self.attribute}: values must be non-empty")
        if len(set(self.values)) != len(self.values):
            raise CorpusError(f"annotation {self.attribute}: duplicate values {self.values}")
        if self.scheme not in SCHEMES:
            raise CorpusError(f"annotation {self.attribute}: unknown scheme {self.scheme!r}")
        if any(i < 0 for i in self.line_indices):
            raise CorpusError(f"annotation {self.attribute}: negative line index")


@dataclass(frozen=True)
class AttributeSchema:
    """The closed set of values an attribute may take for one cancer."""

    cancer: str
    attribute: str
    allowed_values: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "allowed_values", tuple(self.allowed_values))
        if self.cancer not in CANCERS:
            raise CorpusError(f"schema {self.attribute}: unknown cancer {self.cancer!r}")
        if not self.allowed_values:
            raise CorpusError(f"schema {self.attribute}: allowed_values must be non-empty")
        if len(set(self.allowed_values)) != len(self.allowed_values):
            raise CorpusError(f"schema {self.attribute}: duplicate allowed values")


@dataclass(frozen=True)
class LabeledDocument:
    """A report together with its per-attribute annotations."""

    report: Report
    annotations: Mapping[str, EnrichedAnnotation]

    def __post_init__(self) -> None:
        object.__setattr__(self, "annotations", dict(self.annotations))
        n = len(self.report.lines)
        for attr, ann in self.annotations.items():
            if attr != ann.attribute:
                raise CorpusError(
                    f"doc {self.report.id}: annotation keyed {attr!r} names {ann.attribute!r}"
                )
            if any(i >= n for i in ann.line_indices):
                raise CorpusError(
                    f"doc {self.report.id}: annotation {attr} references line "
                    f"{max(ann.line_indices)} but report has {n} lines"
                )
            if not ann.line_indices and tuple(ann.values) != (NOT_REPORTED,):
                raise CorpusError(
                    f"doc {self.report.id}: annotation {attr} has no highlighted lines "
                    f"but its label is not {NOT_REPORTED!r}"
                )


@dataclass(frozen=True)
class Split:
    """A deterministic train/test partition of a corpus by document id."""

    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    seed: int


@dataclass(frozen=True)
class Violation:
    doc_id: str
    attribute: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default=())

    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)


# ---------------------------------------------------------------------------
# label composition
# ---------------------------------------------------------------------------


def compose_label(values: Sequence[str], schema_order: Sequence[str] | None = None) -> str:
    """Collapse an annotation's value set into a single classification label.

    A single value is returned verbatim.  Multiple values are sorted into
    schema declaration order (lexicographic when no schema is supplied)
    and joined with " and ", e.g. {"grade 2", "grade 1"} -> "grade 1 and
    grade 2".  The result is what the final-stage classifier predicts.
    """
    vals = list(dict.fromkeys(values))
    if not vals:
        raise CorpusError("cannot compose a label from zero values")
    if len(vals) == 1:
        return vals[0]
    if schema_order is not None:
        rank = {v: i for i, v in enumerate(schema_order)}
        vals.sort(key=lambda v: (rank.get(v, len(rank)), v))
    else:
        vals.sort()
    return " and ".join(vals)


# ---------------------------------------------------------------------------
# schema handling
# ---------------------------------------------------------------------------


def load_schemas(path: str | None = None) -> dict[tuple[str, str], AttributeSchema]:
    """Load attribute schemas, keyed by (cancer, attribute).

    Without a path this returns the packaged default schema covering both
    cancers.  Attributes that do not apply to a cancer (laterality for
    colon, perineural invasion for kidney) are simply absent from that
    cancer's mapping.
    """
    if path is None:
        raw = resources.files(__package__).joinpath(_SCHEMA_RESOURCE).read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    payload = json.loads(raw)
    schemas: dict[tuple[str, str], AttributeSchema] = {}
    for cancer, attrs in payload["cancers"].items():
        for attribute, values in attrs.items():
            schemas[(cancer, attribute)] = AttributeSchema(cancer, attribute, tuple(values))
    return schemas


def schema_value_order(
    schemas: Mapping[tuple[str, str], AttributeSchema] | None, cancer: str, attribute: str
) -> tuple[str, ...] | None:
    """Allowed-value declaration order for composing labels, if known."""
    if schemas is None:
        return None
    schema = schemas.get((cancer, attribute))
    return schema.allowed_values if schema is not None else None


def validate_against_schema(
    docs: Iterable[LabeledDocument],
    schemas: Mapping[tuple[str, str], AttributeSchema],
) -> ValidationReport:
    """Check every annotation's attribute and values against the schemas."""
    known_attrs = {attr for (_, attr) in schemas}
    violations: list[Violation] = []
    for doc in docs:
        cancer = doc.report.cancer
        for attr, ann in sorted(doc.annotations.items()):
            schema = schemas.get((cancer, attr))
            if schema is None:
                if attr in known_attrs:
                    msg = f"attribute not applicable to {cancer} cancer"
                else:
                    msg = "unknown attribute"
                violations.append(Violation(doc.report.id, attr, msg))
                continue
            for value in ann.values:
                if value not in schema.allowed_values:
                    violations.append(
                        Violation(doc.report.id, attr, f"value {value!r} not in schema")
                    )
    return ValidationReport(tuple(violations))


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------


def doc_to_record(doc: LabeledDocument) -> dict:
    return {
        "id": doc.report.id,
        "cancer": doc.report.cancer,
        "lines": list(doc.report.lines),
        "annotations": [
            {
                "attribute": ann.attribute,
                "values": list(ann.values),
                "lines": list(ann.line_indices),
                "scheme": ann.scheme,
            }
            for _, ann in sorted(doc.annotations.items())
        ],
    }


def record_to_doc(record: Mapping) -> LabeledDocument:
    try:
        report = Report(
            id=record["id"], cancer=record["cancer"], lines=tuple(record["lines"])
        )
        annotations = {}
        for raw in record.get("annotations", ()):
            ann = EnrichedAnnotation(
                attribute=raw["attribute"],
                values=tuple(raw["values"]),
                line_indices=tuple(raw["lines"]),
                scheme=raw["scheme"],
            )
            if ann.attribute in annotations:
                raise CorpusError(f"duplicate annotation for attribute {ann.attribute!r}")
            annotations[ann.attribute] = ann
        return LabeledDocument(report=report, annotations=annotations)
    except KeyError as exc:
        raise CorpusError(f"missing field {exc}") from exc


def load_corpus(path: str) -> list[LabeledDocument]:
    """Read a JSON-lines corpus.  Raises CorpusError naming the bad record."""
    docs: list[LabeledDocument] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: record {lineno}: invalid JSON ({exc})") from exc
            try:
                doc = record_to_doc(record)
            except CorpusError as exc:
                raise CorpusError(f"{path}: record {lineno}: {exc}") from exc
            if doc.report.id in seen:
                raise CorpusError(f"{path}: record {lineno}: duplicate id {doc.report.id!r}")
            seen.add(doc.report.id)
            docs.append(doc)
    return docs


def corpus_to_jsonl(docs: Iterable[LabeledDocument]) -> str:
    """Canonical JSON-lines serialization (round-trips byte-exactly)."""
    return "".join(
        json.dumps(doc_to_record(doc), ensure_ascii=False) + "\n" for doc in docs
    )


def save_corpus(docs: Iterable[LabeledDocument], path: str) -> None:
    """Write a corpus in canonical JSON-lines form."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(corpus_to_jsonl(docs))


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------


def split_corpus(docs: Sequence[LabeledDocument], train_size: int, seed: int) -> Split:
    """Deterministically partition a corpus into train/test by document id.

    The same (document order, train_size, seed) always yields the same
    split.  Both sides keep the corpus's original document order.
    """
    ids = [doc.report.id for doc in docs]
    if not 1 <= train_size <= len(ids) - 1:
        raise ValueError(
            f"train_size must be in [1, {len(ids) - 1}] for {len(ids)} documents, "
            f"got {train_size}"
        )
    shuffled = list(ids)
    random.Random(seed).shuffle(shuffled)
    chosen = set(shuffled[:train_size])
    train = tuple(i for i in ids if i in chosen)
    test = tuple(i for i in ids if i not in chosen)
    return Split(train_ids=train, test_ids=test, seed=seed)


def select_documents(
    docs: Sequence[LabeledDocument], ids: Iterable[str]
) -> list[LabeledDocument]:
    by_id = {doc.report.id: doc for doc in docs}
    return [by_id[i] for i in ids]
