import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gkc.cohort import Modality
from gkc.embedding import GroupSpan
from gkc.evaluation import (
    DegenerateModelError,
    MetricsRecord,
    PairingError,
    TooFewPairsError,
    TooFewPerClassError,
    all_subsets,
    attribute_modalities,
    bootstrap_ci,
    compare_records,
    expand_grid,
    inner_tune,
    linear_shapley,
    make_cv_plan,
    read_records,
    run_cv,
    summarize,
    wilcoxon_signed_rank,
    write_records,
)
from gkc.evaluation.attribution import shares_from_drops
from gkc.evaluation.results import comparison_table
from gkc.features import AuditedCohort, EnfFactory, PrecomputedFactory
from gkc.learn import ModelSpec, predict_scores, train
from oracles import wilcoxon_enumerate

Y184 = np.array([1] * 67 + [0] * 117)


def _data(n=120, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 6))
    y = (X[:, 0] + X[:, 3] + 0.7 * rng.normal(size=n) > 0.4).astype(int)
    return X, y


SPANS = [GroupSpan(Modality.LAB, 0, 2), GroupSpan(Modality.GENE, 2, 4),
         GroupSpan(Modality.MED, 4, 6)]


# ---------------------------------------------------------------- plans

@pytest.mark.parametrize("seed", [0, 7, 123])
def test_plan_fold_composition(seed):
    plan = make_cv_plan(Y184, seed=seed)
    for r, f, tr, te in plan.splits():
        assert Y184[te].sum() in (13, 14)
        assert te.size in (36, 37)
        assert np.intersect1d(tr, te).size == 0 and tr.size + te.size == 184
    assert plan.assignments.shape == (10, 184)


def test_plan_deterministic_and_repeats_differ():
    a, b = make_cv_plan(Y184, seed=7), make_cv_plan(Y184, seed=7)
    assert a.assignments.tobytes() == b.assignments.tobytes()
    assert not np.array_equal(a.assignments[0], a.assignments[1])
    assert not np.array_equal(a.assignments, make_cv_plan(Y184, seed=8).assignments)


def test_plan_too_few_per_class():
    with pytest.raises(TooFewPerClassError):
        make_cv_plan([1, 1, 1, 0, 0, 0, 0, 0, 0, 0])


def test_expand_grid_order():
    pts = expand_grid({"a": [1, 2], "b": [3, 4]})
    assert pts == [{"a": 1, "b": 3}, {"a": 1, "b": 4}, {"a": 2, "b": 3}, {"a": 2, "b": 4}]
    with pytest.raises(ValueError):
        expand_grid([])


# ---------------------------------------------------------------- tuning

def test_inner_tune_prefers_informative_lambda():
    X, y = _data()
    fac = PrecomputedFactory(X, SPANS)
    best, scores = inner_tune(np.arange(y.size), y, fac, "LogRegEN",
                              {"lambda": [1e3, 1e-3]}, seed=1)
    assert best == {"lambda": 1e-3}
    assert scores[1] > scores[0]


def test_inner_tune_tie_takes_first():
    X, y = _data()
    fac = PrecomputedFactory(X, SPANS)
    best, scores = inner_tune(np.arange(y.size), y, fac, "LogRegEN",
                              {"lambda": [1e4, 1e3], "alpha": [1.0]}, seed=1)
    assert scores[0] == scores[1]
    assert best["lambda"] == 1e4


def test_gbt_shared_fit_matches_separate_fits():
    X, y = _data()
    fac = PrecomputedFactory(X, SPANS)
    grid = {"n_rounds": [5, 20], "max_depth": [2]}
    _, shared = inner_tune(np.arange(y.size), y, fac, "GradBoost", grid, seed=3)
    for k, pt in enumerate(expand_grid(grid)):
        # a second point with another depth forces a separate fit for ``pt``
        _, alone = inner_tune(np.arange(y.size), y, fac, "GradBoost",
                              [pt, {**pt, "max_depth": 3}], seed=3)
        assert shared[k] == pytest.approx(alone[0], abs=1e-12)


# ---------------------------------------------------------------- cv runs

def test_run_cv_records_and_determinism():
    X, y = _data()
    plan = make_cv_plan(y, n_repeats=2, seed=4)
    fac = PrecomputedFactory(X, SPANS)
    a = run_cv(plan, y, fac, "LogRegEN", {"lambda": [0.01]}, strategy="S", subset="All")
    b = run_cv(plan, y, fac, "LogRegEN", {"lambda": [0.01]}, strategy="S", subset="All")
    assert [r.key for r in a] == [(r, f) for r in range(2) for f in range(5)]
    assert a == b
    assert np.mean([r.auc_roc for r in a]) > 0.8


def test_leakage_audit_small(kb, small_cohort):
    from gkc.cohort import labels
    audit = AuditedCohort(small_cohort)
    y = labels(small_cohort)
    plan = make_cv_plan(y, n_repeats=2, seed=1)
    fac = EnfFactory(audit, kb.classes.class_ids)
    run_cv(plan, y, fac, "LogRegEN", {"lambda": [0.1, 1.0]}, audit=audit)
    assert audit.reads
    for (stage, r, f), phase, row in ((s, p, i) for s, p, i in audit.reads if s[0] != "setup"):
        te = set(plan.train_test(r, f)[1].tolist())
        if stage == "tune" or phase == "fit":
            assert row not in te
    scored = {row for s, p, row in audit.reads if s[0] == "score" and p == "transform"}
    assert scored == set(range(len(small_cohort)))


# ---------------------------------------------------------------- statistics

def test_wilcoxon_documented_case():
    r = wilcoxon_signed_rank([0.8] * 5, [0.7] * 5)
    assert r.p_value == 0.0625
    assert r.method == "exact" and r.w == 0.0 and r.n_effective == 5


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4)), min_size=5, max_size=12))
def test_wilcoxon_exact_matches_enumeration(pairs):
    a = [x for x, _ in pairs]
    b = [y for _, y in pairs]
    n_eff = sum(x != y for x, y in pairs)
    if n_eff == 0:
        assert wilcoxon_signed_rank(a, b).p_value == 1.0
        return
    if n_eff < 5:
        with pytest.raises(TooFewPairsError):
            wilcoxon_signed_rank(a, b)
        return
    r = wilcoxon_signed_rank(a, b)
    w, p = wilcoxon_enumerate(a, b)
    assert r.w == w and r.p_value == p


def test_wilcoxon_normal_path_and_agreement():
    rng = np.random.default_rng(0)
    a = rng.normal(size=26)
    b = a - rng.normal(0.3, 1.0, size=26)
    assert wilcoxon_signed_rank(a, b).method == "normal"
    for seed in range(20):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=25), rng.normal(size=25)
        exact = wilcoxon_signed_rank(a, b).p_value
        approx = wilcoxon_signed_rank(a, b, exact_max_n=0).p_value
        assert abs(exact - approx) <= 0.02


def test_wilcoxon_all_zero_and_pairing():
    assert wilcoxon_signed_rank([0.5] * 6, [0.5] * 6).p_value == 1.0
    with pytest.raises(PairingError):
        wilcoxon_signed_rank([1, 2, 3], [1, 2])


def _recs(vals, strategy="S", keys=None):
    keys = keys or [(0, f) for f in range(len(vals))]
    return [MetricsRecord(r, f, strategy, "All", "GradBoost", {}, v, v)
            for (r, f), v in zip(keys, vals)]


def test_compare_records_requires_identical_keys():
    a = _recs([0.7, 0.8, 0.75, 0.9, 0.85])
    b = _recs([0.6, 0.6, 0.6, 0.6, 0.6], "T")
    assert compare_records(a, b).p_value == 0.0625
    shifted = _recs([0.6] * 5, "T", keys=[(1, f) for f in range(5)])
    with pytest.raises(PairingError):
        compare_records(a, shifted)


def test_bootstrap_properties():
    v = np.random.default_rng(2).uniform(size=50)
    lo, hi = bootstrap_ci(v, seed=3)
    assert lo <= v.mean() <= hi
    lo2, hi2 = bootstrap_ci(v + 10.0, seed=3)
    assert lo2 == pytest.approx(lo + 10.0, abs=1e-12)
    assert hi2 == pytest.approx(hi + 10.0, abs=1e-12)
    assert bootstrap_ci(v, seed=3) == (lo, hi)
    assert bootstrap_ci([0.7] * 10) == (0.7, 0.7)
    s = summarize(v, "auc_roc")
    assert s.n == 50 and s.ci_lo <= s.mean <= s.ci_hi


def test_records_roundtrip(tmp_path):
    recs = _recs([0.71234567891, 0.5, 1.0])
    back = read_records(write_records(recs, tmp_path / "r.csv"))
    assert back == recs


def test_comparison_table_mentions_all_rows():
    rows = [{"name": "GKC", "metric": "auc_roc", "mean": 0.8, "sd": 0.05, "ci_lo": 0.78,
             "ci_hi": 0.82, "p_value": None},
            {"name": "ENF", "metric": "auc_roc", "mean": 0.5, "sd": 0.07, "ci_lo": 0.48,
             "ci_hi": 0.52, "p_value": 1e-9}]
    lines = comparison_table(rows).splitlines()
    assert len(lines) == 4
    assert lines[2].startswith("GKC") and lines[3].rstrip().endswith("1e-09")


# ---------------------------------------------------------------- ablation and attribution

def test_all_subsets():
    subs = all_subsets()
    assert len(subs) == 7 and len(set(subs)) == 7
    assert subs[0] == (Modality.LAB,) and subs[-1] == (Modality.LAB, Modality.GENE, Modality.MED)


def test_shares_sum_to_100_and_clip():
    s = shares_from_drops({Modality.LAB: 0.1, Modality.GENE: 0.2, Modality.MED: -0.05})
    assert sum(s.values()) == 100.0
    assert s[Modality.MED] == 0.0
    with pytest.raises(DegenerateModelError):
        shares_from_drops({Modality.LAB: -0.1, Modality.GENE: 0.0})


def test_attribution_invariants():
    X, y = _data(200)
    m = train(X, y, ModelSpec("LogRegEN", {"lambda": 0.01}))
    res = attribute_modalities(m, X, y, SPANS, seed=0, n_permutations=10)
    assert abs(sum(res.shares.values()) - 100) <= 1e-9
    # signal lives in columns 0 and 3, so Lab and Gene carry the importance
    assert res.shares[Modality.MED] < 10
    reordered = attribute_modalities(m, X, y, SPANS[::-1], seed=0, n_permutations=10)
    assert reordered.shares == pytest.approx(res.shares)


def test_linear_shapley_efficiency():
    X, y = _data(200)
    m = train(X, y, ModelSpec("LogRegEN", {"lambda": 0.01}))
    phi = linear_shapley(m, X, SPANS)
    logit = np.log(predict_scores(m, X) / (1 - predict_scores(m, X)))
    np.testing.assert_allclose(phi.sum(axis=1) + m.params["intercept"][0], logit, atol=1e-9)


def test_degenerate_attribution():
    X, y = _data()
    m = train(X, y, ModelSpec("LogRegEN", {"lambda": 1e3}))
    with pytest.raises(DegenerateModelError):
        attribute_modalities(m, X, y, SPANS)


def test_zero_weight_spans_give_full_share():
    X, y = _data(200)
    m = train(X, y, ModelSpec("LogRegEN", {"lambda": 0.01}))
    m.params["weights"] = np.where((np.arange(6) >= 2) & (np.arange(6) < 4),
                                   m.params["weights"] + 1.0, 0.0)
    res = attribute_modalities(m, X, y, SPANS, n_permutations=5)
    assert res.shares[Modality.GENE] == 100.0
    assert res.shares[Modality.LAB] == res.shares[Modality.MED] == 0.0
