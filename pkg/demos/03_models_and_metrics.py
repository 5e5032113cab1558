"""
Classifiers and ranking metrics
===============================

Fit the three model families on the curated-embedding matrix and score a
held-out split.  The metrics treat tied scores the same way the pairwise
definitions do.
"""
import numpy as np

from gkc.learn import ModelSpec, auc_prc, auc_roc, predict_scores, train
from gkc.pipeline import prepare
from gkc.synthetic import SyntheticConfig

art = prepare(SyntheticConfig())
X, spans = art.text_block("GKC")
y = art.y
print(f"GKC matrix {X.shape}, spans " + ", ".join(f"{s.modality.label}[{s.start}:{s.stop})"
                                                 for s in spans))

rng = np.random.default_rng(0)
test = rng.permutation(y.size)[:46]
train_rows = np.setdiff1d(np.arange(y.size), test)

for kind, hp in (("LogRegEN", {"lambda": 0.01}), ("GradBoost", {}),
                 ("RandomForest", {"n_trees": 200})):
    model = train(X[train_rows], y[train_rows], ModelSpec(kind, hp, seed=1))
    s = predict_scores(model, X[test])
    print(f"{kind:<13} AUC-ROC {auc_roc(s, y[test]):.3f}  AUC-PRC {auc_prc(s, y[test]):.3f}")

# ties: a block of equal scores is credited as a block
scores = np.array([0.9, 0.5, 0.5, 0.5, 0.1])
truth = np.array([1, 1, 0, 0, 0])
print(f"\ntied example: AUC-ROC {auc_roc(scores, truth):.4f}, AUC-PRC {auc_prc(scores, truth):.4f}")
