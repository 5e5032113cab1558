"""Modality ablation over every nonempty subset of {Lab, Gene, Med}."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

from ..cohort import MODALITIES, Modality
from .cv import CvPlan, MetricsRecord, run_cv
from .stats import MetricsSummary, summarize_records


def all_subsets() -> list[tuple[Modality, ...]]:
    """The 7 subsets: singles, then pairs, then the full set, each in canonical order."""
    return [c for k in (1, 2, 3) for c in itertools.combinations(MODALITIES, k)]


@dataclass
class AblationRow:
    subset: tuple[Modality, ...]
    records: list[MetricsRecord]
    summary: dict[str, MetricsSummary]

    @property
    def name(self) -> str:
        return "+".join(m.label for m in self.subset)


def run_ablation(plan: CvPlan, y, factory_for: Callable[[tuple[Modality, ...]], object],
                 kind, grid=None, strategy: str = "GKC", bootstrap_seed: int = 0,
                 **cv_kwargs) -> list[AblationRow]:
    """One cross-validation run per subset on the same fold assignments."""
    rows = []
    for subset in all_subsets():
        name = "+".join(m.label for m in subset)
        recs = run_cv(plan, y, factory_for(subset), kind, grid, strategy=strategy,
                      subset=name, **cv_kwargs)
        rows.append(AblationRow(subset, recs, summarize_records(recs, seed=bootstrap_seed)))
    return rows
