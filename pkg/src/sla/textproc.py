"""Text normalization, line tokenization, and bag-of-n-grams featurization.

Normalization (applied identically at train and test time):

  * lowercase everything
  * delete the characters  , \\ ; ~ .
  * delete the whole word "null"
  * surround each of  : / ( ) + =  with single spaces

Tokens are whitespace-separated after normalization.  N-grams are
enumerated inside a line only; they never span line boundaries.  Unigrams
seen fewer than ``min_count`` times in the training data are replaced by
``<UNK>`` before n-grams are enumerated, and out-of-vocabulary unigrams
map through ``<UNK>`` at test time.  Features are binary presence.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from collections import Counter
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy import sparse

UNK = "<UNK>"

_REMOVE_CHARS = str.maketrans("", "", ",\\;~.")
_PAD_RE = re.compile(r"\s*([:/()+=])\s*")
_NULL_RE = re.compile(r"\bnull\b")


def normalize(raw: str) -> str:
    """Apply the character-level cleanup rules.  Idempotent."""
    s = raw.lower().translate(_REMOVE_CHARS)
    s = _PAD_RE.sub(r" \1 ", s)
    s = _NULL_RE.sub(" ", s)
    return s.strip()


def tokenize(raw: str) -> tuple[str, ...]:
    """Normalize then split on whitespace."""
    return tuple(normalize(raw).split())


@dataclass(frozen=True)
class TokenLine:
    """One report line as tokens, remembering where it came from."""

    tokens: tuple[str, ...]
    source_line_index: int

    def __post_init__(self) -> None:
        if self.source_line_index < 0:
            raise ValueError("source_line_index must be >= 0")


def tokenize_lines(report) -> list[TokenLine]:
    """Tokenize each line of a report, preserving line identity."""
    return [TokenLine(tokenize(line), i) for i, line in enumerate(report.lines)]


def _ngrams(tokens: Sequence[str], max_n: int) -> Iterator[str]:
    for n in range(1, max_n + 1):
        for i in range(len(tokens) - n + 1):
            yield " ".join(tokens[i : i + n])


@dataclass
class Vocabulary:
    """An n-gram feature index built from training lines.

    ``ngram_to_index`` maps space-joined n-grams to column indices assigned
    in lexicographic order.  ``known_words`` holds the unigrams that
    survived the frequency cutoff; all other unigrams map to ``<UNK>``.
    """

    ngram_to_index: dict[str, int]
    max_n: int
    min_count: int = 2
    unk_token: str = UNK
    known_words: frozenset[str] = field(init=False)

    def __post_init__(self) -> None:
        if not 1 <= self.max_n <= 4:
            raise ValueError(f"max_n must be in [1, 4], got {self.max_n}")
        self.known_words = frozenset(
            k for k in self.ngram_to_index if " " not in k and k != self.unk_token
        )

    @property
    def dimension(self) -> int:
        return len(self.ngram_to_index)

    def map_token(self, token: str) -> str:
        return token if token in self.known_words else self.unk_token

    def to_dict(self) -> dict:
        items = sorted(self.ngram_to_index.items(), key=lambda kv: kv[1])
        return {
            "max_n": self.max_n,
            "min_count": self.min_count,
            "unk_token": self.unk_token,
            "ngrams": [k for k, _ in items],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Vocabulary":
        mapping = {k: i for i, k in enumerate(payload["ngrams"])}
        return cls(
            ngram_to_index=mapping,
            max_n=payload["max_n"],
            min_count=payload["min_count"],
            unk_token=payload.get("unk_token", UNK),
        )


def build_vocabulary(
    token_lines: Iterable[Sequence[str]], max_n: int, min_count: int = 2
) -> Vocabulary:
    """Build the n-gram index from training token lines.

    Rare unigrams (count < min_count) are rewritten to <UNK> first, so the
    resulting index can contain n-grams with <UNK> inside them.  Indices
    are assigned by sorting the surviving n-grams lexicographically, which
    makes vocabulary construction order-independent and deterministic.
    """
    if not 1 <= max_n <= 4:
        raise ValueError(f"max_n must be in [1, 4], got {max_n}")
    lines = [tuple(getattr(toks, "tokens", toks)) for toks in token_lines]
    if not lines:
        raise ValueError("cannot build a vocabulary from an empty training set")
    counts: Counter[str] = Counter(tok for line in lines for tok in line)
    known = {tok for tok, c in counts.items() if c >= min_count}
    grams: set[str] = set()
    for line in lines:
        mapped = tuple(tok if tok in known else UNK for tok in line)
        grams.update(_ngrams(mapped, max_n))
    mapping = {gram: i for i, gram in enumerate(sorted(grams))}
    return Vocabulary(ngram_to_index=mapping, max_n=max_n, min_count=min_count)


@dataclass(frozen=True)
class SparseVector:
    """Sorted sparse feature vector; stores only nonzero entries."""

    indices: tuple[int, ...]
    values: tuple[float, ...]
    dimension: int

    def __post_init__(self) -> None:
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values must have equal length")
        if any(v == 0.0 for v in self.values):
            raise ValueError("SparseVector must not store zero values")
        prev = -1
        for i in self.indices:
            if i <= prev:
                raise ValueError("indices must be strictly increasing")
            prev = i
        if self.indices and self.indices[-1] >= self.dimension:
            raise ValueError("index out of range for dimension")

    def scaled(self, factor: float) -> "SparseVector":
        if factor == 0.0:
            return SparseVector((), (), self.dimension)
        return SparseVector(self.indices, tuple(v * factor for v in self.values), self.dimension)


def vectorize(tokens, vocab: Vocabulary) -> SparseVector:
    """Binary bag-of-n-grams for one token sequence under a fixed vocabulary.

    Unknown unigrams are first mapped to <UNK>; n-grams absent from the
    vocabulary are dropped.
    """
    if hasattr(tokens, "tokens"):
        tokens = tokens.tokens
    mapped = tuple(vocab.map_token(t) for t in tokens)
    idx = {
        vocab.ngram_to_index[g]
        for g in _ngrams(mapped, vocab.max_n)
        if g in vocab.ngram_to_index
    }
    indices = tuple(sorted(idx))
    return SparseVector(indices, (1.0,) * len(indices), vocab.dimension)


def sum_vectors(vectors: Iterable[SparseVector], dimension: int) -> SparseVector:
    """Weighted-sum accumulation of sparse vectors sharing a dimension."""
    acc: dict[int, float] = {}
    for vec in vectors:
        if vec.dimension != dimension:
            raise ValueError("cannot sum vectors of mismatched dimension")
        for i, v in zip(vec.indices, vec.values):
            acc[i] = acc.get(i, 0.0) + v
    items = sorted((i, v) for i, v in acc.items() if v != 0.0)
    return SparseVector(
        tuple(i for i, _ in items), tuple(v for _, v in items), dimension
    )


def to_csr(vectors: Sequence[SparseVector], dimension: int | None = None) -> sparse.csr_matrix:
    """Stack sparse vectors into a scipy CSR matrix for the learners."""
    if dimension is None:
        if not vectors:
            raise ValueError("cannot infer dimension from zero vectors")
        dimension = vectors[0].dimension
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for vec in vectors:
        if vec.dimension != dimension:
            raise ValueError("cannot stack vectors of mismatched dimension")
        indices.extend(vec.indices)
        data.extend(vec.values)
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64), indptr),
        shape=(len(vectors), dimension),
    )
