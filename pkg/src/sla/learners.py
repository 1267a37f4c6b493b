"""From-scratch supervised learners used by both pipeline stages.

Gradient-boosted trees (binary, logistic loss)
    Trees are grown greedily on second-order statistics.  With gradient
    sum G and hessian sum H at a node, splitting into (GL, HL) / (GR, HR)
    scores

        gain = 0.5 * (GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam)) - gamma

    and a leaf takes the Newton value -G/(H+lam).  Features are binary
    presence indicators, so the only candidate split per feature is
    present vs absent.  The model's output is
    sigmoid(base_score + sum_t learning_rate * leaf_t(x)) where base_score
    is the prior log-odds of the training labels.

L1-regularized logistic regression (one-vs-rest multiclass)
    Each binary subproblem minimizes

        (1/C) * ||w||_1  +  sum_i s_i * log(1 + exp(-y_i * (x_i.w + b)))

    with unpenalized intercept b, solved by proximal gradient descent
    (soft-thresholding) with backtracking line search until the objective
    change drops below tol.  Sample weights s_i default to the balanced
    scheme n / (n_classes * n_c).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np
from scipy import sparse

from .textproc import SparseVector, to_csr

# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _sigmoid_scalar(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def _as_csr(X) -> sparse.csr_matrix:
    if sparse.issparse(X):
        return X.tocsr()
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], SparseVector):
        return to_csr(X)
    return sparse.csr_matrix(np.asarray(X, dtype=np.float64))


def balanced_class_weights(labels: Sequence[Hashable]) -> dict[Hashable, float]:
    """Class weight n_total / (n_classes * n_c) for each observed class."""
    counts: dict[Hashable, int] = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    n = len(labels)
    k = len(counts)
    return {lab: n / (k * c) for lab, c in counts.items()}


# ---------------------------------------------------------------------------
# gradient-boosted trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GbtParams:
    learning_rate: float = 0.1
    max_depth: int = 5
    min_split_loss: float = 0.0
    subsample: float = 1.0
    l2_lambda: float = 1.0
    num_rounds: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_split_loss < 0:
            raise ValueError("min_split_loss must be >= 0")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must be in (0, 1]")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if self.num_rounds < 0:
            raise ValueError("num_rounds must be >= 0")


@dataclass
class TreeNode:
    """Binary tree over presence features: left = absent, right = present."""

    feature: int | None = None
    value: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value}
        return {
            "feature": self.feature,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TreeNode":
        if "value" in payload:
            return cls(value=float(payload["value"]))
        return cls(
            feature=int(payload["feature"]),
            left=cls.from_dict(payload["left"]),
            right=cls.from_dict(payload["right"]),
        )


@dataclass
class GbtModel:
    params: GbtParams
    base_score: float
    trees: list[TreeNode]
    num_features: int

    def to_dict(self) -> dict:
        return {
            "params": {
                "learning_rate": self.params.learning_rate,
                "max_depth": self.params.max_depth,
                "min_split_loss": self.params.min_split_loss,
                "subsample": self.params.subsample,
                "l2_lambda": self.params.l2_lambda,
                "num_rounds": self.params.num_rounds,
                "seed": self.params.seed,
            },
            "base_score": self.base_score,
            "num_features": self.num_features,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GbtModel":
        return cls(
            params=GbtParams(**payload["params"]),
            base_score=float(payload["base_score"]),
            trees=[TreeNode.from_dict(t) for t in payload["trees"]],
            num_features=int(payload["num_features"]),
        )


_MIN_GAIN = 1e-12
_PRIOR_EPS = 1e-6


def _leaf_value(g_sum: float, h_sum: float, lam: float) -> float:
    denom = h_sum + lam
    if denom <= _MIN_GAIN:
        return 0.0
    return -g_sum / denom


def _grow_tree(
    X_csr: sparse.csr_matrix,
    X_csc: sparse.csc_matrix,
    rows: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    params: GbtParams,
) -> TreeNode:
    """Grow one tree level by level on the given row subset.

    Split statistics for every (frontier node, feature) pair come from two
    sparse matrix products per level, which keeps the cost at
    O(nnz) per level regardless of how many nodes are open.
    """
    n_total = X_csr.shape[0]
    lam = params.l2_lambda
    gamma = params.min_split_loss
    nodes: list[dict] = [{}]
    frontier: list[tuple[int, np.ndarray]] = [(0, rows)]
    col_mark = np.zeros(n_total, dtype=bool)
    indptr, col_indices = X_csc.indptr, X_csc.indices

    for depth in range(params.max_depth + 1):
        if not frontier:
            break
        if depth == params.max_depth:
            for nid, nrows in frontier:
                g, h = grad[nrows].sum(), hess[nrows].sum()
                nodes[nid] = {"value": _leaf_value(g, h, lam)}
            break

        sizes = np.array([len(nrows) for _, nrows in frontier])
        all_rows = np.concatenate([nrows for _, nrows in frontier])
        owner = np.repeat(np.arange(len(frontier)), sizes)
        shape = (len(frontier), n_total)
        G1 = np.asarray(
            sparse.csr_matrix((grad[all_rows], (owner, all_rows)), shape=shape)
            .dot(X_csr)
            .todense()
        )
        H1 = np.asarray(
            sparse.csr_matrix((hess[all_rows], (owner, all_rows)), shape=shape)
            .dot(X_csr)
            .todense()
        )
        C1 = np.asarray(
            sparse.csr_matrix(
                (np.ones(len(all_rows)), (owner, all_rows)), shape=shape
            )
            .dot(X_csr)
            .todense()
        )
        Gt = np.array([grad[nrows].sum() for _, nrows in frontier])
        Ht = np.array([hess[nrows].sum() for _, nrows in frontier])

        G0 = Gt[:, None] - G1
        H0 = Ht[:, None] - H1
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = 0.5 * (
                G1 * G1 / np.maximum(H1 + lam, _MIN_GAIN)
                + G0 * G0 / np.maximum(H0 + lam, _MIN_GAIN)
                - (Gt * Gt / np.maximum(Ht + lam, _MIN_GAIN))[:, None]
            ) - gamma
        invalid = (C1 < 1) | (C1 > (sizes[:, None] - 1))
        gain[invalid] = -np.inf
        best_j = np.argmax(gain, axis=1)
        best_gain = gain[np.arange(len(frontier)), best_j]

        next_frontier: list[tuple[int, np.ndarray]] = []
        for i, (nid, nrows) in enumerate(frontier):
            if len(nrows) < 2 or not best_gain[i] > _MIN_GAIN:
                g, h = Gt[i], Ht[i]
                nodes[nid] = {"value": _leaf_value(g, h, lam)}
                continue
            j = int(best_j[i])
            col_rows = col_indices[indptr[j] : indptr[j + 1]]
            col_mark[col_rows] = True
            present = nrows[col_mark[nrows]]
            absent = nrows[~col_mark[nrows]]
            col_mark[col_rows] = False
            lid, rid = len(nodes), len(nodes) + 1
            nodes.append({})
            nodes.append({})
            nodes[nid] = {"feature": j, "left": lid, "right": rid}
            next_frontier.append((lid, absent))
            next_frontier.append((rid, present))
        frontier = next_frontier

    def assemble(nid: int) -> TreeNode:
        nd = nodes[nid]
        if "value" in nd:
            return TreeNode(value=float(nd["value"]))
        return TreeNode(
            feature=nd["feature"], left=assemble(nd["left"]), right=assemble(nd["right"])
        )

    return assemble(0)


def _tree_outputs(root: TreeNode, X_csc: sparse.csc_matrix) -> np.ndarray:
    """Leaf value per row of X for one tree, computed by row partitioning."""
    n = X_csc.shape[0]
    out = np.zeros(n, dtype=np.float64)
    mark = np.zeros(n, dtype=bool)
    indptr, col_indices = X_csc.indptr, X_csc.indices
    stack = [(root, np.arange(n))]
    while stack:
        node, rows = stack.pop()
        if len(rows) == 0:
            continue
        if node.is_leaf:
            out[rows] = node.value
            continue
        j = node.feature
        col_rows = col_indices[indptr[j] : indptr[j + 1]]
        mark[col_rows] = True
        present = rows[mark[rows]]
        absent = rows[~mark[rows]]
        mark[col_rows] = False
        stack.append((node.left, absent))
        stack.append((node.right, present))
    return out


def train_gbt(X, y, params: GbtParams | None = None) -> GbtModel:
    """Fit a boosted-tree binary classifier on binary presence features."""
    params = params or GbtParams()
    X_csr = _as_csr(X)
    y_arr = np.asarray(y, dtype=np.float64)
    if y_arr.ndim != 1 or X_csr.shape[0] != len(y_arr):
        raise ValueError("X and y must have matching first dimension")
    if not set(np.unique(y_arr)) <= {0.0, 1.0}:
        raise ValueError("labels must be binary 0/1")
    n = X_csr.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty dataset")

    prior = min(max(float(y_arr.mean()), _PRIOR_EPS), 1.0 - _PRIOR_EPS)
    base = math.log(prior / (1.0 - prior))
    margins = np.full(n, base, dtype=np.float64)
    X_csc = X_csr.tocsc()
    rng = np.random.default_rng(params.seed)
    all_rows = np.arange(n)
    subsample_size = max(1, int(round(params.subsample * n)))

    trees: list[TreeNode] = []
    for _ in range(params.num_rounds):
        if params.subsample < 1.0:
            rows = np.sort(rng.choice(n, size=subsample_size, replace=False))
        else:
            rows = all_rows
        p = _sigmoid(margins)
        grad = p - y_arr
        hess = p * (1.0 - p)
        tree = _grow_tree(X_csr, X_csc, rows, grad, hess, params)
        margins += params.learning_rate * _tree_outputs(tree, X_csc)
        trees.append(tree)

    return GbtModel(params=params, base_score=base, trees=trees, num_features=X_csr.shape[1])


def _walk_tree(node: TreeNode, present: frozenset[int]) -> float:
    while not node.is_leaf:
        node = node.right if node.feature in present else node.left
    return node.value


def predict_gbt(model: GbtModel, x) -> float:
    """Probability of the positive class for a single feature vector."""
    if isinstance(x, SparseVector):
        present = frozenset(x.indices)
    elif sparse.issparse(x):
        present = frozenset(x.tocsr().indices.tolist())
    else:
        present = frozenset(int(i) for i in np.flatnonzero(np.asarray(x)))
    margin = model.base_score
    for tree in model.trees:
        margin += model.params.learning_rate * _walk_tree(tree, present)
    return _sigmoid_scalar(margin)


def predict_gbt_margin(model: GbtModel, X, num_trees: int | None = None) -> np.ndarray:
    """Raw margins (pre-sigmoid) for a batch, optionally truncated to a
    prefix of the tree sequence; useful for inspecting the boosting path."""
    X_csc = _as_csr(X).tocsc()
    k = len(model.trees) if num_trees is None else num_trees
    margins = np.full(X_csc.shape[0], model.base_score, dtype=np.float64)
    for tree in model.trees[:k]:
        margins += model.params.learning_rate * _tree_outputs(tree, X_csc)
    return margins


def predict_gbt_batch(model: GbtModel, X) -> np.ndarray:
    """Positive-class probabilities for a batch of feature vectors."""
    return _sigmoid(predict_gbt_margin(model, X))


# ---------------------------------------------------------------------------
# L1 logistic regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinParams:
    l1_strength: float = 1.0  # C; the penalty applied is (1/C) * ||w||_1
    balanced: bool = True
    max_iter: int = 2000
    tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.l1_strength <= 0:
            raise ValueError("l1_strength must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")


@dataclass
class LinearModel:
    classes: tuple
    weights: np.ndarray  # (n_classes, n_features)
    intercepts: np.ndarray  # (n_classes,)

    @property
    def num_features(self) -> int:
        return self.weights.shape[1]

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "weights": [row.tolist() for row in self.weights],
            "intercepts": self.intercepts.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "LinearModel":
        return cls(
            classes=tuple(payload["classes"]),
            weights=np.asarray(payload["weights"], dtype=np.float64),
            intercepts=np.asarray(payload["intercepts"], dtype=np.float64),
        )


def logloss_value_grad(
    w: np.ndarray,
    b: float,
    X: sparse.csr_matrix,
    y_pm: np.ndarray,
    sample_weights: np.ndarray,
) -> tuple[float, np.ndarray, float]:
    """Weighted logistic loss (the smooth part of the objective) and its
    gradient in (w, b).  y_pm is +/-1.  Exposed for verification."""
    z = X.dot(w) + b
    value = float(np.dot(sample_weights, np.logaddexp(0.0, -y_pm * z)))
    coef = sample_weights * (-y_pm) * _sigmoid(-y_pm * z)
    grad_w = X.T.dot(coef)
    grad_b = float(coef.sum())
    return value, np.asarray(grad_w, dtype=np.float64), grad_b


def _soft_threshold(v: np.ndarray, thresh: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def _fit_l1_binary(
    X: sparse.csr_matrix,
    y_pm: np.ndarray,
    sample_weights: np.ndarray,
    lam: float,
    max_iter: int,
    tol: float,
) -> tuple[np.ndarray, float]:
    """Proximal gradient with backtracking.  The intercept is unpenalized.

    Each accepted step satisfies the standard quadratic upper bound on the
    smooth part, which makes the full objective non-increasing.  Iteration
    stops once the objective improves by less than tol.
    """
    n, d = X.shape
    w = np.zeros(d, dtype=np.float64)
    b = 0.0
    z = np.zeros(n, dtype=np.float64)

    def smooth_at(z_vec: np.ndarray) -> float:
        return float(np.dot(sample_weights, np.logaddexp(0.0, -y_pm * z_vec)))

    f = smooth_at(z)
    obj = f  # ||w||_1 is zero at the start
    step = 1.0
    for _ in range(max_iter):
        coef = sample_weights * (-y_pm) * _sigmoid(-y_pm * z)
        grad_w = np.asarray(X.T.dot(coef), dtype=np.float64)
        grad_b = float(coef.sum())

        while True:
            w_new = _soft_threshold(w - step * grad_w, step * lam)
            b_new = b - step * grad_b
            dw = w_new - w
            db = b_new - b
            z_new = z + X.dot(dw) + db
            f_new = smooth_at(z_new)
            bound = (
                f
                + float(np.dot(grad_w, dw))
                + grad_b * db
                + (float(np.dot(dw, dw)) + db * db) / (2.0 * step)
            )
            if f_new <= bound + 1e-12:
                break
            step *= 0.5
            if step < 1e-18:
                return w, b

        obj_new = f_new + lam * float(np.abs(w_new).sum())
        delta = obj - obj_new
        w, b, z, f, obj = w_new, b_new, z_new, f_new, obj_new
        step *= 1.25
        if delta < tol:
            break
    return w, b


def train_l1_logreg(
    X,
    y: Sequence[Hashable],
    params: LinParams | None = None,
    class_order: Sequence[Hashable] | None = None,
    sample_weights: Mapping[Hashable, float] | None = None,
) -> LinearModel:
    """One-vs-rest L1 logistic regression over arbitrary hashable labels.

    Classes are ordered by ``class_order`` when given, otherwise sorted;
    prediction ties resolve to the earliest class in that order.
    """
    params = params or LinParams()
    X_csr = _as_csr(X)
    labels = list(y)
    if X_csr.shape[0] != len(labels):
        raise ValueError("X and y must have matching first dimension")
    if not labels:
        raise ValueError("cannot train on an empty dataset")

    if class_order is not None:
        classes = tuple(class_order)
        if set(labels) - set(classes):
            raise ValueError("labels outside the supplied class order")
    else:
        classes = tuple(sorted(set(labels)))

    if sample_weights is not None:
        per_class = dict(sample_weights)
    elif params.balanced:
        per_class = balanced_class_weights(labels)
    else:
        per_class = {c: 1.0 for c in classes}
    sw = np.array([per_class.get(lab, 1.0) for lab in labels], dtype=np.float64)

    d = X_csr.shape[1]
    weights = np.zeros((len(classes), d), dtype=np.float64)
    intercepts = np.zeros(len(classes), dtype=np.float64)
    if len(classes) == 1:
        return LinearModel(classes=classes, weights=weights, intercepts=intercepts)

    lam = 1.0 / params.l1_strength
    label_arr = np.array([classes.index(lab) for lab in labels])
    for k in range(len(classes)):
        y_pm = np.where(label_arr == k, 1.0, -1.0)
        w, b = _fit_l1_binary(X_csr, y_pm, sw, lam, params.max_iter, params.tol)
        weights[k] = w
        intercepts[k] = b
    return LinearModel(classes=classes, weights=weights, intercepts=intercepts)


def decision_scores(model: LinearModel, x) -> np.ndarray:
    """Per-class sigmoid scores for one feature vector."""
    if isinstance(x, SparseVector):
        if x.indices:
            idx = np.asarray(x.indices, dtype=np.int64)
            vals = np.asarray(x.values, dtype=np.float64)
            margins = model.weights[:, idx].dot(vals) + model.intercepts
        else:
            margins = model.intercepts.copy()
    elif sparse.issparse(x):
        row = x.tocsr()
        margins = np.asarray(row.dot(model.weights.T)).ravel() + model.intercepts
    else:
        margins = model.weights.dot(np.asarray(x, dtype=np.float64)) + model.intercepts
    return _sigmoid(margins)


def predict_logreg(model: LinearModel, x) -> tuple[Hashable, dict]:
    """Predicted label (argmax of per-class scores, ties to the earliest
    class in class order) plus the full score map."""
    scores = decision_scores(model, x)
    best = int(np.argmax(scores))
    return model.classes[best], {c: float(s) for c, s in zip(model.classes, scores)}
