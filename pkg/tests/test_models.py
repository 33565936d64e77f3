import numpy as np
import pytest
import scipy.optimize
import scipy.sparse as sp

import oracles
from civic_lens import features, models
from civic_lens.models import LogisticConfig, SvmConfig


def problem(seed=0, n=60, d=12, density=0.4):
    rng = np.random.default_rng(seed)
    X = sp.random(n, d, density=density, random_state=np.random.RandomState(seed), format="csr")
    w = rng.normal(size=d)
    y = (X @ w + 0.3 * rng.normal(size=n) > np.median(X @ w)).astype(int)
    return X, y


def test_grids_match_tuning_ranges():
    assert len(models.logistic_grid()) == 12
    svm = models.svm_grid()
    assert len(svm) == 4 + 16
    assert {c.kernel for c in svm} == {"linear", "rbf"}


def test_class_weights():
    assert models.class_weights([0, 0, 0, 1]) == (4 / 6, 4 / 2)
    with pytest.raises(models.DegenerateLabelsError):
        models.class_weights([1, 1])


def test_config_validation():
    with pytest.raises(ValueError):
        LogisticConfig(penalty="elasticnet")
    with pytest.raises(ValueError):
        LogisticConfig(C=0)
    with pytest.raises(ValueError):
        SvmConfig(kernel="poly")


@pytest.mark.parametrize("penalty", models.PENALTIES)
def test_objective_value_matches_naive_loop(penalty):
    X, y = problem(1, n=15, d=6)
    sw = np.where(y == 1, 1.7, 0.6)
    p = np.random.default_rng(3).normal(size=7)
    val, _ = models.logistic_objective(p, X, y, sw, penalty, 3.0)
    ref = oracles.logistic_value(p[:-1], p[-1], X.toarray().tolist(), y, sw, penalty, 3.0)
    assert val == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("penalty", models.PENALTIES)
def test_objective_trace_non_increasing(penalty):
    X, y = problem(2)
    m = models.train_logistic(X, y, LogisticConfig(penalty=penalty, C=10.0), trace=True)
    tr = np.array(m.objective_trace)
    assert tr.size >= 2
    assert np.all(np.diff(tr) <= 1e-10)


def test_l2_matches_sklearn():
    lm = pytest.importorskip("sklearn.linear_model")
    X, y = problem(4)
    for C in (1.0, 100.0):
        ours = models.train_logistic(X, y, LogisticConfig(penalty="l2", C=C, tol=1e-10))
        ref = lm.LogisticRegression(C=C, class_weight="balanced", tol=1e-12, max_iter=10000).fit(X, y)
        assert np.allclose(ours.weights, ref.coef_.ravel(), atol=1e-5)
        assert ours.bias == pytest.approx(ref.intercept_[0], abs=1e-5)


@pytest.mark.parametrize("C", [1.0, 10.0, 1000.0])
def test_l1_solution_satisfies_optimality_conditions(C):
    X, y = problem(5)
    m = models.train_logistic(X, y, LogisticConfig(penalty="l1", C=C))
    assert m.converged
    sw = np.where(y == 1, *models.class_weights(y)[::-1])
    _, g = models.logistic_objective(np.append(m.weights, m.bias), X, y, sw, "none", C)
    gw, gb = g[:-1], g[-1]
    nz = m.weights != 0
    assert abs(gb) < 1e-4
    assert np.all(np.abs(gw[~nz]) <= 1 / C + 1e-4)
    assert np.allclose(gw[nz], -np.sign(m.weights[nz]) / C, atol=1e-4)


def test_l1_is_sparser_than_l2():
    X, y = problem(6, d=40)
    l1 = models.train_logistic(X, y, LogisticConfig(penalty="l1", C=1.0))
    l2 = models.train_logistic(X, y, LogisticConfig(penalty="l2", C=1.0))
    assert np.count_nonzero(l1.weights) < np.count_nonzero(l2.weights)


def test_linear_svm_matches_direct_minimization():
    X, y = problem(7, n=40, d=8)
    C = 10.0
    ys = 2.0 * y - 1
    sw = np.where(y == 1, *models.class_weights(y)[::-1])
    Xd = X.toarray()

    def f(p):
        h = np.maximum(0.0, 1 - ys * (Xd @ p[:-1] + p[-1]))
        return 0.5 * p[:-1] @ p[:-1] + C * np.sum(sw * h * h)

    ref = scipy.optimize.minimize(f, np.zeros(9), method="Powell", options={"xtol": 1e-10, "ftol": 1e-14,
                                                                           "maxiter": 200000}).x
    m = models.train_svm(X, y, SvmConfig(C=C, kernel="linear", tol=1e-8))
    assert f(np.append(m.weights, m.bias)) <= f(ref) + 1e-6


@pytest.mark.parametrize("C,gamma", [(1.0, 1.0), (10.0, 0.1), (100.0, 1.0)])
def test_rbf_svm_matches_sklearn(C, gamma):
    svm = pytest.importorskip("sklearn.svm")
    X, y = problem(8)
    ours = models.train_svm(X, y, SvmConfig(C=C, kernel="rbf", gamma=gamma, tol=1e-6))
    ref = svm.SVC(C=C, kernel="rbf", gamma=gamma, class_weight="balanced", tol=1e-6).fit(X, y)
    assert np.allclose(models.decision_values(ours, X), ref.decision_function(X), atol=2e-3)


def test_rbf_kernel():
    A = sp.csr_matrix([[1.0, 0.0], [0.0, 2.0]])
    K = models.rbf_kernel(A, A, 0.5)
    assert np.allclose(K, [[1.0, np.exp(-0.5 * 5)], [np.exp(-0.5 * 5), 1.0]])


@pytest.mark.parametrize("family,cfg", [
    ("logistic", LogisticConfig(penalty="l1", C=10.0)),
    ("logistic", LogisticConfig(penalty="l2", C=10.0)),
    ("logistic", LogisticConfig(penalty="none")),
    ("svm", SvmConfig(C=10.0)),
    ("svm", SvmConfig(C=10.0, kernel="rbf", gamma=0.1)),
])
def test_training_is_deterministic_and_serializes(family, cfg):
    X, y = problem(9)
    a, b = models.train(family, X, y, cfg), models.train(family, X, y, cfg)
    assert models.dumps_model(a, "v.json") == models.dumps_model(b, "v.json")
    back = models.model_from_dict(a.to_dict())
    assert np.array_equal(models.decision_values(back, X), models.decision_values(a, X))


def test_predict_single_matches_batch():
    X, y = problem(10)
    m = models.train_logistic(X, y)
    rows = [features.SparseVector.from_row(X[i]) for i in range(X.shape[0])]
    assert [models.predict(m, r) for r in rows] == models.predict_many(m, X).tolist()
    assert models.predict_many(m, rows).tolist() == models.predict_many(m, X).tolist()


def test_dimension_mismatch_raises():
    X, y = problem(11)
    m = models.train_logistic(X, y)
    with pytest.raises(ValueError):
        models.decision_values(m, sp.csr_matrix((1, X.shape[1] + 1)))


def test_degenerate_labels_rejected():
    X, _ = problem(12)
    with pytest.raises(models.DegenerateLabelsError):
        models.train_logistic(X, np.zeros(X.shape[0], dtype=int))


def test_prediction_invariant_to_repeated_tokens():
    docs = ["kwtax budget now", "parks budget", "kwtax again here", "roads and lights", "kwtax", "lights parks"]
    y = [1, 0, 1, 0, 1, 0]
    vocab = features.fit_vocabulary(docs)
    m = models.train_logistic(features.transform_matrix(docs, vocab), y)
    for d in docs:
        triple = " ".join(t for t in d.split() for _ in range(3))
        assert models.predict(m, features.transform(d, vocab)) == models.predict(m, features.transform(triple, vocab))
