"""Hyperparameter search: random search over discrete spaces with k-fold
cross-validation, maximizing mean micro-F1.

Defaults follow the evaluation protocol: 40 trials, 4 folds.  The whole
search is reproducible bit-for-bit from (corpus, seed): fold assignment is
fixed once per search, and each trial samples its configuration from an
independently derived stream, so trials can run in parallel without
changing the result.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np

from .baselines import (
    BASELINE_KINDS,
    DocBaselineModel,
    predict_doc_baseline,
    train_doc_baseline,
)
from .corpus import LabeledDocument, compose_label, schema_value_order
from .evaluation import micro_f1
from .learners import GbtParams, LinParams
from .pipeline import (
    VARIANTS,
    SlaHyperParams,
    SlaModel,
    predict_sla,
    train_sla,
)

METHODS = VARIANTS + BASELINE_KINDS


# ---------------------------------------------------------------------------
# search spaces
# ---------------------------------------------------------------------------


def log_grid(lo_exp: float, hi_exp: float, count: int, base: float = 10.0) -> tuple[float, ...]:
    """``count`` points spaced evenly in log space between base**lo_exp and
    base**hi_exp inclusive."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return tuple(float(v) for v in np.power(base, np.linspace(lo_exp, hi_exp, count)))


@dataclass(frozen=True)
class SearchSpace:
    """Named discrete dimensions; a configuration picks one value of each."""

    dimensions: dict[str, tuple]

    def __post_init__(self) -> None:
        if not self.dimensions:
            raise ValueError("search space needs at least one dimension")
        for name, values in self.dimensions.items():
            if not values:
                raise ValueError(f"dimension {name!r} has no values")
        object.__setattr__(
            self, "dimensions", {k: tuple(v) for k, v in self.dimensions.items()}
        )


_GBT_DIMS = {
    "learning_rate": log_grid(-2.0, -0.5, 500),
    "max_depth": (3, 4, 5, 6, 7),
    "min_split_loss": (0.0, 0.01, 0.05, 0.1, 0.5, 1.0),
    "subsample": (0.5, 0.75, 1.0),
    "l2_lambda": (0.1, 0.5, 1.0, 1.5, 2.0),
}
_C_DIM = log_grid(-6.0, 6.0, 500)
_NGRAM_DIM = (1, 2, 3, 4)


def default_space(method: str) -> SearchSpace:
    """The stock search space for each pipeline variant or baseline."""
    if method in ("sla", "no_weight", "no_join", "no_weight_no_join"):
        dims = {
            "line_ngram_n": _NGRAM_DIM,
            "final_ngram_n": _NGRAM_DIM,
            "k": (1, 2, 3, 4, 5),
            "C": _C_DIM,
            **_GBT_DIMS,
        }
    elif method in ("rules", "oracle"):
        dims = {"final_ngram_n": _NGRAM_DIM, "C": _C_DIM}
    elif method == "doc-logreg":
        dims = {"ngram_n": _NGRAM_DIM, "C": _C_DIM}
    elif method == "doc-boost":
        dims = {"ngram_n": _NGRAM_DIM, **_GBT_DIMS}
    else:
        raise ValueError(f"unknown method {method!r}")
    return SearchSpace(dims)


def sample_config(space: SearchSpace, rng: np.random.Generator) -> dict:
    """Independent uniform draw for every dimension (iterated in sorted
    name order so the result does not depend on dict construction order)."""
    config = {}
    for name in sorted(space.dimensions):
        values = space.dimensions[name]
        config[name] = values[int(rng.integers(0, len(values)))]
    return config


# ---------------------------------------------------------------------------
# fitting any method from a sampled configuration
# ---------------------------------------------------------------------------


@dataclass
class FittedVariant:
    """Uniform prediction interface over pipeline variants and baselines."""

    method: str
    sla_model: SlaModel | None = None
    baseline: DocBaselineModel | None = None

    def predict_label(self, doc: LabeledDocument) -> str:
        if self.sla_model is not None:
            gold = None
            if self.sla_model.variant == "oracle":
                ann = doc.annotations.get(self.sla_model.attribute)
                if ann is None:
                    raise ValueError(
                        f"oracle variant needs gold lines for doc {doc.report.id}"
                    )
                gold = ann.line_indices
            return predict_sla(self.sla_model, doc.report, gold_lines=gold).label
        label, _ = predict_doc_baseline(self.baseline, doc.report)
        return label


def fit_variant(
    method: str,
    train_docs: Sequence[LabeledDocument],
    attribute: str,
    config: Mapping | None = None,
    seed: int = 0,
    schemas=None,
    keyword_rules=None,
) -> FittedVariant:
    """Train one pipeline variant or baseline from a flat config dict."""
    cfg = dict(config or {})
    if method in VARIANTS:
        gbt = GbtParams(
            learning_rate=cfg.get("learning_rate", 0.1),
            max_depth=cfg.get("max_depth", 5),
            min_split_loss=cfg.get("min_split_loss", 0.0),
            subsample=cfg.get("subsample", 1.0),
            l2_lambda=cfg.get("l2_lambda", 1.0),
            num_rounds=cfg.get("num_rounds", 100),
            seed=seed,
        )
        lin = LinParams(l1_strength=cfg.get("C", 1.0))
        hyper = SlaHyperParams(
            line_ngram_n=cfg.get("line_ngram_n", 2),
            final_ngram_n=cfg.get("final_ngram_n", 2),
            k=cfg.get("k", 3),
            gbt=gbt,
            lin=lin,
        )
        model = train_sla(
            train_docs,
            attribute,
            hyper=hyper,
            variant=method,
            keyword_rules=keyword_rules,
            schemas=schemas,
        )
        return FittedVariant(method=method, sla_model=model)
    if method in BASELINE_KINDS:
        lin = LinParams(l1_strength=cfg.get("C", 1.0))
        gbt = GbtParams(
            learning_rate=cfg.get("learning_rate", 0.1),
            max_depth=cfg.get("max_depth", 5),
            min_split_loss=cfg.get("min_split_loss", 0.0),
            subsample=cfg.get("subsample", 1.0),
            l2_lambda=cfg.get("l2_lambda", 1.0),
            num_rounds=cfg.get("num_rounds", 100),
            seed=seed,
        )
        model = train_doc_baseline(
            train_docs,
            attribute,
            kind=method,
            ngram_n=cfg.get("ngram_n", 1),
            lin=lin,
            gbt=gbt,
            schemas=schemas,
        )
        return FittedVariant(method=method, baseline=model)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------


def assign_folds(labels: Sequence[Hashable], folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold id per item.  Stratified by label when every class has at least
    ``folds`` members; otherwise a plain shuffled partition into
    nearly-equal folds."""
    n = len(labels)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if n < folds:
        raise ValueError(f"cannot make {folds} folds from {n} items")
    counts: dict[Hashable, int] = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    out = np.empty(n, dtype=np.int64)
    if all(c >= folds for c in counts.values()):
        pointer = 0
        for lab in sorted(counts, key=str):
            idx = np.array([i for i, l in enumerate(labels) if l == lab])
            rng.shuffle(idx)
            for i in idx:
                out[i] = pointer % folds
                pointer += 1
    else:
        idx = np.arange(n)
        rng.shuffle(idx)
        for pos, i in enumerate(idx):
            out[i] = pos % folds
    return out


@dataclass(frozen=True)
class TrialResult:
    config: dict
    fold_scores: tuple[float, ...]
    mean_score: float


def cross_validate(
    train_docs: Sequence[LabeledDocument],
    attribute: str,
    config: Mapping,
    folds: int = 4,
    variant: str = "sla",
    seed: int = 0,
    schemas=None,
    keyword_rules=None,
) -> TrialResult:
    """Mean held-out micro-F1 of one configuration across k folds."""
    docs = [d for d in train_docs if attribute in d.annotations]
    if len(docs) < folds:
        raise ValueError(
            f"{folds}-fold cross-validation needs at least {folds} annotated "
            f"documents, got {len(docs)}"
        )
    labels = [
        compose_label(
            d.annotations[attribute].values,
            schema_value_order(schemas, d.report.cancer, attribute),
        )
        for d in docs
    ]
    fold_rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    fold_of = assign_folds(labels, folds, fold_rng)
    scores = []
    for fold in range(folds):
        train = [d for d, f in zip(docs, fold_of) if f != fold]
        held = [d for d, f in zip(docs, fold_of) if f == fold]
        fit_seed = int(np.random.SeedSequence((seed, 1 + fold)).generate_state(1)[0])
        fitted = fit_variant(
            variant,
            train,
            attribute,
            config,
            seed=fit_seed,
            schemas=schemas,
            keyword_rules=keyword_rules,
        )
        preds = [fitted.predict_label(d) for d in held]
        golds = [lab for lab, f in zip(labels, fold_of) if f == fold]
        scores.append(micro_f1(preds, golds))
    return TrialResult(
        config=dict(config),
        fold_scores=tuple(scores),
        mean_score=sum(scores) / len(scores),
    )


# ---------------------------------------------------------------------------
# random search
# ---------------------------------------------------------------------------


def random_search(
    train_docs: Sequence[LabeledDocument],
    attribute: str,
    space: SearchSpace | None = None,
    trials: int = 40,
    folds: int = 4,
    seed: int = 0,
    variant: str = "sla",
    schemas=None,
    keyword_rules=None,
    jobs: int = 1,
) -> tuple[dict, list[TrialResult]]:
    """Best configuration (ties broken toward the earliest trial) plus the
    full trial log."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if space is None:
        space = default_space(variant)
    trial_seeds = np.random.SeedSequence(seed).spawn(trials)
    configs = [
        sample_config(space, np.random.default_rng(ss)) for ss in trial_seeds
    ]

    def _one(config: dict) -> TrialResult:
        return cross_validate(
            train_docs,
            attribute,
            config,
            folds=folds,
            variant=variant,
            seed=seed,
            schemas=schemas,
            keyword_rules=keyword_rules,
        )

    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        args = [
            (train_docs, attribute, config, folds, variant, seed, schemas, keyword_rules)
            for config in configs
        ]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cross_validate_args, args))
    else:
        results = [_one(c) for c in configs]

    best = results[0]
    for result in results[1:]:
        if result.mean_score > best.mean_score:
            best = result
    return dict(best.config), results


def _cross_validate_args(args) -> TrialResult:
    train_docs, attribute, config, folds, variant, seed, schemas, keyword_rules = args
    return cross_validate(
        train_docs,
        attribute,
        config,
        folds=folds,
        variant=variant,
        seed=seed,
        schemas=schemas,
        keyword_rules=keyword_rules,
    )
