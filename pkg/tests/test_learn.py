import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gkc.learn import (
    DimensionMismatchError,
    HyperparameterError,
    ModelKind,
    ModelSpec,
    NoPositiveError,
    SingleClassError,
    auc_prc,
    auc_roc,
    load_model,
    model_from_json,
    model_to_json,
    predict_scores,
    save_model,
    train,
)
from gkc.learn.logreg import fit_logreg_en, gradient, objective
from oracles import auc_pairwise, average_precision_bruteforce, best_stump, central_difference


def _data(n=80, p=5, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = (X[:, 0] + 0.5 * rng.normal(size=n) > 0).astype(int)
    return X, y


# ---------------------------------------------------------------- metrics

scores_and_labels = st.integers(2, 20).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 4).map(float), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n)))


@given(scores_and_labels)
def test_auc_roc_matches_pairwise(sl):
    s, y = sl
    if len(set(y)) < 2:
        with pytest.raises(SingleClassError):
            auc_roc(s, y)
        return
    assert abs(auc_roc(s, y) - auc_pairwise(s, y)) <= 1e-12


@given(scores_and_labels)
def test_auc_prc_matches_bruteforce(sl):
    s, y = sl
    if sum(y) == 0:
        with pytest.raises(NoPositiveError):
            auc_prc(s, y)
        return
    assert abs(auc_prc(s, y) - average_precision_bruteforce(s, y)) <= 1e-12


def test_metric_edge_cases():
    assert auc_roc([0.9, 0.1], [1, 0]) == 1.0
    assert auc_roc([0.5, 0.5], [1, 0]) == 0.5
    assert auc_prc([0.9, 0.1, 0.2], [1, 0, 0]) == 1.0
    # all tied: precision of the whole block, i.e. prevalence
    assert auc_prc([1.0] * 4, [1, 0, 0, 0]) == 0.25


# ---------------------------------------------------------------- logistic regression

def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    Z = rng.normal(size=(30, 4))
    y = rng.integers(0, 2, 30).astype(float)
    for _ in range(20):
        theta = rng.normal(size=5)
        # keep weights away from the |w| kink so the gradient exists
        theta[:4] += np.sign(theta[:4]) * 0.1
        f = lambda t: objective(t[:4], t[4], Z, y, 0.05, 0.5)
        gw, gb = gradient(theta[:4], theta[4], Z, y, 0.05, 0.5)
        num = central_difference(f, theta)
        np.testing.assert_allclose(np.append(gw, gb), num, rtol=1e-6, atol=1e-9)


def test_objective_monotone_and_converges():
    X, y = _data()
    fit = fit_logreg_en(X, y, lam=0.01, alpha=0.5)
    assert fit.converged
    assert np.all(np.diff(fit.history) <= 1e-12)


def test_large_lambda_zeroes_weights():
    X, y = _data()
    fit = fit_logreg_en(X, y, lam=1e3, alpha=1.0)
    assert not fit.weights.any()
    # with all weights at zero the intercept is the training log-odds
    assert fit.intercept == pytest.approx(np.log(y.mean() / (1 - y.mean())), abs=1e-6)


def test_logreg_learns_signal():
    X, y = _data(200)
    m = train(X, y, ModelSpec("LogRegEN"))
    assert auc_roc(predict_scores(m, X), y) > 0.85
    assert np.argmax(np.abs(m.params["weights"])) == 0


# ---------------------------------------------------------------- boosting

def test_single_stump_matches_oracle():
    X, y = _data(60, 4, seed=2)
    lam = 1.0
    m = train(X, y, ModelSpec("GradBoost", {"n_rounds": 1, "learning_rate": 1.0,
                                            "max_depth": 1, "l2_leaf_reg": lam}))
    base = float(m.params["base"][0])
    p = 1 / (1 + np.exp(-base))
    g, h = p - y, np.full(y.size, p * (1 - p))
    cands = [(best_stump(X[:, j], g, h, lam, 1.0), j) for j in range(X.shape[1])]
    (thr, gain), j = max(cands, key=lambda c: c[0][1])
    assert m.params["feat"][0, 0] == j
    assert m.params["thr"][0, 0] == pytest.approx(thr)
    left = X[:, j] <= thr
    for node, mask in ((1, left), (2, ~left)):
        assert m.params["val"][0, node] == pytest.approx(-g[mask].sum() / (h[mask].sum() + lam))


@pytest.mark.parametrize("hp", [{"n_rounds": 0}, {"learning_rate": 0.0}])
def test_boost_constant_prediction(hp):
    X, y = _data()
    s = predict_scores(train(X, y, ModelSpec("GradBoost", hp)), X)
    np.testing.assert_allclose(s, y.mean(), rtol=1e-9)


def test_huge_l2_gives_near_zero_leaves():
    X, y = _data()
    m = train(X, y, ModelSpec("GradBoost", {"l2_leaf_reg": 1e12}))
    assert np.abs(m.params["val"]).max() < 1e-9


def test_staged_scores_match_truncated_margin():
    X, y = _data()
    m = train(X, y, ModelSpec("GradBoost", {"n_rounds": 30}))
    staged = m.staged_scores(X, [0, 10, 30])
    for row, k in zip(staged, (0, 10, 30)):
        np.testing.assert_allclose(row, 1 / (1 + np.exp(-m.margin(X, k))), rtol=1e-12)


# ---------------------------------------------------------------- forest

def test_forest_memorizes_and_is_deterministic():
    X, y = _data(50)
    spec = ModelSpec("RandomForest", {"n_trees": 20, "bootstrap": False,
                                      "feature_fraction": 1.0}, seed=4)
    s = predict_scores(train(X, y, spec), X)
    np.testing.assert_array_equal(s, y)
    spec = ModelSpec("RandomForest", {"n_trees": 30}, seed=4)
    a = predict_scores(train(X, y, spec), X)
    b = predict_scores(train(X, y, spec), X)
    assert a.tobytes() == b.tobytes()
    assert a.min() >= 0 and a.max() <= 1
    c = predict_scores(train(X, y, ModelSpec("RandomForest", {"n_trees": 30}, seed=5)), X)
    assert not np.array_equal(a, c)


# ---------------------------------------------------------------- shared contract

@pytest.mark.parametrize("kind", list(ModelKind))
def test_serialization_roundtrip(tmp_path, kind):
    X, y = _data()
    spec = ModelSpec(kind, {"n_trees": 10} if kind is ModelKind.RANDOM_FOREST else {}, seed=3)
    m = train(X, y, spec)
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert predict_scores(back, X).tobytes() == predict_scores(m, X).tobytes()
    assert model_to_json(model_from_json(model_to_json(m))) == model_to_json(m)


@pytest.mark.parametrize("kind", list(ModelKind))
def test_width_mismatch(kind):
    X, y = _data()
    m = train(X, y, ModelSpec(kind, {"n_trees": 5} if kind is ModelKind.RANDOM_FOREST else {}))
    with pytest.raises(DimensionMismatchError):
        predict_scores(m, X[:, :3])


def test_training_errors():
    X, y = _data()
    with pytest.raises(SingleClassError):
        train(X, np.zeros_like(y), ModelSpec("GradBoost"))
    with pytest.raises(HyperparameterError):
        ModelSpec("LogRegEN", {"alpha": 2.0})
    with pytest.raises(HyperparameterError):
        ModelSpec("GradBoost", {"depth": 3})
    with pytest.raises(ValueError):
        ModelSpec("SVM")


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_scores_in_unit_interval(seed):
    X, y = _data(30, 3, seed % 1000)
    for kind in ModelKind:
        hp = {"n_trees": 5} if kind is ModelKind.RANDOM_FOREST else {}
        s = predict_scores(train(X, y, ModelSpec(kind, hp, seed=seed)), X)
        assert np.all((s >= 0) & (s <= 1))


# ---------------------------------------------------------------- documented properties

def test_metric_worked_examples():
    assert auc_roc([0.7, 0.6, 0.4, 0.3, 0.2], [1, 0, 1, 0, 0]) == pytest.approx(5 / 6)
    assert auc_prc([0.9, 0.8, 0.7], [1, 0, 1]) == pytest.approx(5 / 6)
    assert auc_roc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0


@given(st.lists(st.integers(-500, 500), min_size=4, max_size=20, unique=True), st.data())
def test_auc_transform_invariance_and_flip(scores, data):
    y = data.draw(st.lists(st.integers(0, 1), min_size=len(scores), max_size=len(scores)))
    if len(set(y)) < 2:
        return
    s = np.array(scores) / 100.0
    a = auc_roc(s, y)
    assert auc_roc(np.exp(s) * 3 + 1, y) == a
    assert a + auc_roc(s, 1 - np.array(y)) == pytest.approx(1.0, abs=1e-12)


def test_separable_cases_reach_auc_one():
    x = np.linspace(-1, 1, 20)[:, None]
    y = (x[:, 0] > 0.1).astype(int)
    lr = train(x, y, ModelSpec("LogRegEN", {"lambda": 0.01}))
    assert auc_roc(predict_scores(lr, x), y) == 1.0
    stump = train(x, y, ModelSpec("GradBoost", {"n_rounds": 1, "max_depth": 1}))
    assert x[:, 0][y == 0].max() < stump.params["thr"][0, 0] < x[:, 0][y == 1].min()
    assert auc_roc(predict_scores(stump, x), y) == 1.0
    rf = train(x, y, ModelSpec("RandomForest", {"n_trees": 1, "feature_fraction": 1.0,
                                                "bootstrap": False}))
    assert np.array_equal(predict_scores(rf, x) > 0.5, y == 1)


def test_positive_weight_monotone():
    X, y = _data()
    m = train(X, y, ModelSpec("LogRegEN", {"lambda": 0.01}))
    j = int(np.argmax(m.params["weights"]))
    bumped = X.copy()
    bumped[:, j] += 1.0
    assert np.all(predict_scores(m, bumped) >= predict_scores(m, X))


@pytest.mark.parametrize("kind", ["LogRegEN", "GradBoost"])
def test_row_order_invariance(kind):
    X, y = _data(60)
    perm = np.random.default_rng(9).permutation(y.size)
    a = predict_scores(train(X, y, ModelSpec(kind)), X)
    b = predict_scores(train(X[perm], y[perm], ModelSpec(kind)), X)
    np.testing.assert_allclose(a, b, rtol=1e-7, atol=1e-9)
