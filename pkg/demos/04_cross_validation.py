"""
Comparing feature strategies
============================

Repeated stratified cross-validation with nested tuning, paired Wilcoxon
tests on the per-fold scores and bootstrap intervals.  Three repeats keep
the demo short; the acceptance suite runs ten.
"""
from gkc.evaluation import compare_records, make_cv_plan, summarize_records
from gkc.pipeline import evaluate, prepare
from gkc.synthetic import SyntheticConfig

art = prepare(SyntheticConfig())
plan = make_cv_plan(art.y, n_repeats=3, seed=7)
res = evaluate(art, ("ENF", "CTE", "GKC"), "GradBoost", plan=plan)

for name, recs in res.items():
    s = summarize_records(recs)["auc_roc"]
    print(f"{name}: AUC-ROC {s.mean:.3f} (95% CI {s.ci_lo:.3f}-{s.ci_hi:.3f}, n={s.n})")

for other in ("CTE", "ENF"):
    c = compare_records(res["GKC"], res[other])
    print(f"GKC vs {other}: W={c.w:.0f}, p={c.p_value:.2g} ({c.method})")
