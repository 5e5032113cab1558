"""In-memory orchestration of the full pipeline.

    cohort -> profiles -> curator reports -> embeddings -> matrices -> CV

The CLI runs the same steps stage by stage with on-disk artifacts.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cohort import MODALITIES, Modality, PatientRecord, labels
from .curation import ReportCache, ReportStore, curate_corpus
from .embedding import EmbeddingCache, GroupSpan, MockEmbedder
from .evaluation import (
    CvPlan,
    MetricsRecord,
    make_cv_plan,
    run_cv,
)
from .features import (
    EnfFactory,
    PrecomputedFactory,
    Strategy,
    parse_subset,
    text_matrix,
)
from .knowledge import KnowledgeBase, load_knowledge_base
from .mock_curator import MockCurator
from .profiles import ProfileCorpus, profile_corpus
from .synthetic import SyntheticConfig, generate_synthetic_cohort


@dataclass
class Artifacts:
    kb: KnowledgeBase
    cohort: Sequence[PatientRecord]
    y: np.ndarray
    corpus: ProfileCorpus
    reports: ReportStore | None = None
    embedder: object = None
    embedding_cache: EmbeddingCache = field(default_factory=EmbeddingCache)
    _text: dict = field(default_factory=dict)

    def source(self, strategy: Strategy):
        return self.corpus if strategy is Strategy.CTE else self.reports

    def text_block(self, strategy, subset=MODALITIES):
        """Embedding matrix for ``subset``, sliced from the full-modality matrix."""
        strategy = Strategy.parse(strategy)
        subset = parse_subset(subset)
        if strategy not in self._text:
            self._text[strategy] = text_matrix(self.cohort, strategy, MODALITIES,
                                               self.source(strategy), self.embedder,
                                               self.embedding_cache)
        X, spans = self._text[strategy]
        by_mod = {s.modality: s for s in spans}
        cols, out_spans, start = [], [], 0
        for m in subset:
            s = by_mod[m]
            cols.append(X[:, s.start:s.stop])
            out_spans.append(GroupSpan(m, start, start + s.width))
            start += s.width
        return np.hstack(cols), out_spans

    def factory(self, strategy, subset=MODALITIES, cohort=None):
        strategy = Strategy.parse(strategy)
        if strategy is Strategy.ENF:
            return EnfFactory(self.cohort if cohort is None else cohort,
                              self.kb.classes.class_ids, subset)
        X, spans = self.text_block(strategy, subset)
        return PrecomputedFactory(X, spans)


def prepare(cfg: SyntheticConfig | None = None, kb: KnowledgeBase | None = None,
            curator=None, embedder=None, report_cache: ReportCache | None = None,
            embedding_cache: EmbeddingCache | None = None, cohort=None,
            curate: bool = True) -> Artifacts:
    """Generate (or take) a cohort and build profiles, reports and embeddings."""
    kb = kb or load_knowledge_base()
    if cohort is None:
        cohort = generate_synthetic_cohort(cfg or SyntheticConfig(), kb).patients
    corpus = profile_corpus(cohort, kb)
    reports = None
    if curate:
        reports = curate_corpus(curator or MockCurator(), corpus,
                                cache=report_cache if report_cache is not None else ReportCache(),
                                max_in_flight=1)
    return Artifacts(kb, list(cohort), labels(cohort), corpus, reports,
                     embedder or MockEmbedder(),
                     embedding_cache if embedding_cache is not None else EmbeddingCache())


def evaluate(art: Artifacts, strategies=("ENF", "CTE", "GKC"), kind="GradBoost",
             grid=None, plan: CvPlan | None = None, seed: int = 7, subset=MODALITIES,
             **cv_kwargs) -> dict[str, list[MetricsRecord]]:
    plan = plan or make_cv_plan(art.y, seed=seed)
    name = "+".join(m.label for m in parse_subset(subset))
    out = {}
    for s in strategies:
        s = Strategy.parse(s)
        out[s.value] = run_cv(plan, art.y, art.factory(s, subset), kind, grid,
                              strategy=s.value, subset=name, **cv_kwargs)
    return out


def modality_label(m: Modality) -> str:
    return m.label
