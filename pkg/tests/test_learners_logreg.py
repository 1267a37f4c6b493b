import numpy as np
import pytest
from scipy import sparse

from sla.learners import (
    LinearModel,
    LinParams,
    balanced_class_weights,
    decision_scores,
    logloss_value_grad,
    predict_logreg,
    train_l1_logreg,
)
from sla.textproc import SparseVector


def random_problem(rng, n=30, d=8):
    X = sparse.csr_matrix((rng.random((n, d)) < 0.4).astype(np.float64))
    y_pm = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    sw = rng.uniform(0.5, 2.0, size=n)
    return X, y_pm, sw


# ---------------------------------------------------------------------------
# gradient correctness (smooth part)
# ---------------------------------------------------------------------------


def test_gradient_matches_central_finite_differences():
    rng = np.random.default_rng(17)
    eps = 1e-6
    for _ in range(20):
        X, y_pm, sw = random_problem(rng)
        w = rng.normal(scale=0.8, size=X.shape[1])
        b = float(rng.normal())
        _, grad_w, grad_b = logloss_value_grad(w, b, X, y_pm, sw)

        for j in range(X.shape[1]):
            wp, wm = w.copy(), w.copy()
            wp[j] += eps
            wm[j] -= eps
            fp, _, _ = logloss_value_grad(wp, b, X, y_pm, sw)
            fm, _, _ = logloss_value_grad(wm, b, X, y_pm, sw)
            fd = (fp - fm) / (2 * eps)
            denom = max(abs(fd), abs(grad_w[j]), 1e-8)
            assert abs(grad_w[j] - fd) / denom <= 1e-4

        fp, _, _ = logloss_value_grad(w, b + eps, X, y_pm, sw)
        fm, _, _ = logloss_value_grad(w, b - eps, X, y_pm, sw)
        fd_b = (fp - fm) / (2 * eps)
        assert abs(grad_b - fd_b) / max(abs(fd_b), abs(grad_b), 1e-8) <= 1e-4


# ---------------------------------------------------------------------------
# optimality at convergence
# ---------------------------------------------------------------------------


def test_subgradient_optimality_at_convergence():
    """At the optimum of f(w) + lam*||w||_1: grad_j = -lam*sign(w_j) when
    w_j != 0, and |grad_j| <= lam when w_j = 0 (up to solver tolerance)."""
    rng = np.random.default_rng(23)
    X, y_pm, sw = random_problem(rng, n=60, d=10)
    y = ["pos" if v > 0 else "neg" for v in y_pm]
    C = 0.5
    params = LinParams(l1_strength=C, balanced=False, max_iter=20000, tol=1e-14)
    model = train_l1_logreg(X, y, params)
    lam = 1.0 / C

    k = list(model.classes).index("pos")
    w, b = model.weights[k], float(model.intercepts[k])
    ones = np.ones(X.shape[0])
    _, grad_w, grad_b = logloss_value_grad(w, b, X, y_pm, ones)

    slack = 1e-4
    for j in range(X.shape[1]):
        if w[j] != 0.0:
            assert grad_w[j] + lam * np.sign(w[j]) == pytest.approx(0.0, abs=slack)
        else:
            assert abs(grad_w[j]) <= lam + slack
    assert grad_b == pytest.approx(0.0, abs=slack)  # intercept is unpenalized


def test_tiny_c_drives_all_weights_to_exact_zero():
    rng = np.random.default_rng(4)
    X, y_pm, _ = random_problem(rng, n=40, d=12)
    y = ["a" if v > 0 else "b" for v in y_pm]
    model = train_l1_logreg(X, y, LinParams(l1_strength=1e-9, balanced=False))
    assert np.all(model.weights == 0.0)
    # intercepts stay free: prediction falls back to class priors
    assert np.all(np.isfinite(model.intercepts))


def test_objective_never_increases_along_iterates():
    # indirect check: rerunning with more iterations never worsens the objective
    rng = np.random.default_rng(31)
    X, y_pm, _ = random_problem(rng, n=50, d=9)
    y = ["a" if v > 0 else "b" for v in y_pm]
    lam = 2.0

    def objective(model):
        k = list(model.classes).index("a")
        w, b = model.weights[k], float(model.intercepts[k])
        val, _, _ = logloss_value_grad(w, b, X, y_pm, np.ones(X.shape[0]))
        return val + lam * np.abs(w).sum()

    prev = None
    for iters in (1, 3, 10, 50, 300):
        model = train_l1_logreg(
            X, y, LinParams(l1_strength=1 / lam, balanced=False, max_iter=iters, tol=0.0)
        )
        obj = objective(model)
        if prev is not None:
            assert obj <= prev + 1e-9
        prev = obj


# ---------------------------------------------------------------------------
# classification behavior
# ---------------------------------------------------------------------------


def test_separable_multiclass_is_fit_perfectly():
    # three classes, each keyed by its own indicator feature
    X = sparse.csr_matrix(np.vstack([np.eye(3)] * 7))
    y = ["a", "b", "c"] * 7
    model = train_l1_logreg(X, y, LinParams(l1_strength=100.0))
    for i, label in enumerate(("a", "b", "c")):
        pred, scores = predict_logreg(model, X[i])
        assert pred == label
        assert scores[label] == max(scores.values())


def test_prediction_tie_breaks_to_earliest_class():
    model = LinearModel(
        classes=("a", "b"),
        weights=np.zeros((2, 3)),
        intercepts=np.zeros(2),
    )
    pred, scores = predict_logreg(model, SparseVector((0,), (1.0,), 3))
    assert scores["a"] == scores["b"]
    assert pred == "a"


def test_class_order_overrides_sorting():
    X = sparse.csr_matrix(np.eye(2))
    model = train_l1_logreg(X, ["b", "a"], class_order=("b", "a"))
    assert model.classes == ("b", "a")
    with pytest.raises(ValueError):
        train_l1_logreg(X, ["b", "z"], class_order=("b", "a"))


def test_single_class_degenerates_to_constant():
    X = sparse.csr_matrix(np.eye(3))
    model = train_l1_logreg(X, ["only"] * 3)
    assert model.classes == ("only",)
    assert np.all(model.weights == 0.0)
    pred, _ = predict_logreg(model, X[0])
    assert pred == "only"


def test_balanced_class_weights_formula():
    w = balanced_class_weights(["a", "a", "a", "b"])
    # n / (K * n_c)
    assert w["a"] == pytest.approx(4 / (2 * 3))
    assert w["b"] == pytest.approx(4 / (2 * 1))


def test_balanced_weights_shift_decisions_toward_rare_class():
    # 9-vs-1 imbalance on an ambiguous feature column
    rows = [[1.0]] * 10
    X = sparse.csr_matrix(np.asarray(rows))
    y = ["maj"] * 9 + ["min"]
    balanced = train_l1_logreg(X, y, LinParams(l1_strength=10.0, balanced=True))
    unbalanced = train_l1_logreg(X, y, LinParams(l1_strength=10.0, balanced=False))
    s_bal = decision_scores(balanced, X[0])
    s_unbal = decision_scores(unbalanced, X[0])
    min_idx = list(balanced.classes).index("min")
    assert s_bal[min_idx] > s_unbal[min_idx]


def test_decision_scores_sparse_vector_fast_path_matches_csr():
    rng = np.random.default_rng(6)
    X, y_pm, _ = random_problem(rng, n=25, d=7)
    y = ["a" if v > 0 else "b" for v in y_pm]
    model = train_l1_logreg(X, y)
    row = X[3]
    vec = SparseVector(
        indices=tuple(int(i) for i in row.indices),
        values=tuple(float(v) for v in row.data),
        dimension=7,
    )
    assert np.allclose(decision_scores(model, vec), decision_scores(model, row))


def test_linear_model_roundtrip():
    rng = np.random.default_rng(2)
    X, y_pm, _ = random_problem(rng)
    y = ["a" if v > 0 else "b" for v in y_pm]
    model = train_l1_logreg(X, y)
    again = LinearModel.from_dict(model.to_dict())
    assert again.classes == model.classes
    assert np.array_equal(again.weights, model.weights)
    assert np.array_equal(again.intercepts, model.intercepts)


def test_rejects_empty_and_mismatched_inputs():
    X = sparse.csr_matrix(np.eye(2))
    with pytest.raises(ValueError):
        train_l1_logreg(X, ["a"])
    with pytest.raises(ValueError):
        train_l1_logreg(sparse.csr_matrix((0, 2)), [])
    with pytest.raises(ValueError):
        LinParams(l1_strength=0.0)
