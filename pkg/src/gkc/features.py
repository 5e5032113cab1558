"""Design matrices for the three feature strategies.

ENF column layout (full modality set, 78 columns):

* ``lab:<test>:t1`` .. ``lab:<test>:t5`` for the ten tests in canonical order,
  oldest to newest, z-scored with training-fold mean and sd (50 columns);
* ``gene:mutation_count``, the raw number of distinct mutated genes (1 column);
* ``med:<class_id>``, 1 if any drug of the class was prescribed in the
  window, for the 27 classes in sorted id order (27 columns).

CTE and GKC rows are per-modality embeddings of the profile text and of the
rendered curator report, concatenated Lab, Gene, Med.
"""
from __future__ import annotations

import contextlib
import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .cohort import LAB_TESTS, MODALITIES, SERIES_LENGTH, Modality, PatientRecord, labels
from .cohort import prepare_lab_series
from .embedding import EmbeddingCache, GroupSpan, TaskHint, concat_modalities, embed_text
from .knowledge import KnowledgeBase


class Strategy(str, enum.Enum):
    ENF = "ENF"
    CTE = "CTE"
    GKC = "GKC"

    @classmethod
    def parse(cls, value) -> "Strategy":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown strategy {value!r}") from None


class InsufficientDataError(ValueError):
    pass


class MissingArtifactError(LookupError):
    def __init__(self, missing: Sequence[tuple[str, Modality]], stage: str | None = None):
        self.missing = list(missing)
        self.stage = stage
        head = ", ".join(f"{pid}/{m.label}" for pid, m in self.missing[:5])
        more = f" (+{len(self.missing) - 5} more)" if len(self.missing) > 5 else ""
        hint = f"; run the '{stage}' stage first" if stage else ""
        super().__init__(f"{len(self.missing)} missing artifact(s): {head}{more}{hint}")


def parse_subset(subset) -> tuple[Modality, ...]:
    """Canonical (Lab, Gene, Med)-ordered tuple; rejects the empty subset."""
    if isinstance(subset, str):
        subset = [s for s in subset.replace("+", ",").split(",") if s.strip()]
    ms = sorted({Modality.parse(m) for m in subset})
    if not ms:
        raise ValueError("modality subset must be nonempty")
    return tuple(ms)


def subset_name(subset) -> str:
    return "+".join(m.label for m in parse_subset(subset))


# ---------------------------------------------------------------- ENF

@dataclass(frozen=True)
class LabFoldStats:
    mean: np.ndarray          # (n_tests,)
    sd: np.ndarray            # (n_tests,), 0 where degenerate
    n_patients: int

    @property
    def degenerate(self) -> np.ndarray:
        return self.sd == 0.0


def lab_matrix(p: PatientRecord) -> np.ndarray:
    """(10, 5) LOCF series in canonical test order."""
    return np.array([prepare_lab_series(p.labs, t.id, SERIES_LENGTH) for t in LAB_TESTS])


def fit_lab_stats(training: Iterable[PatientRecord], series=None) -> LabFoldStats:
    """Per-test mean and sample sd over all 5 slots of the training patients.

    ``series`` may map a patient id to a precomputed :func:`lab_matrix`.
    """
    mats = []
    for p in training:
        m = series.get(p.patient_id) if series is not None else None
        mats.append(lab_matrix(p) if m is None else m)
    if len(mats) < 2:
        raise InsufficientDataError("lab statistics need at least 2 training patients")
    stacked = np.stack(mats)                       # (n, 10, 5)
    vals = stacked.transpose(1, 0, 2).reshape(len(LAB_TESTS), -1)
    mean = vals.mean(axis=1)
    sd = vals.std(axis=1, ddof=1)
    # exact-zero spread (all values identical) is the degenerate case
    spread = vals.max(axis=1) - vals.min(axis=1)
    sd = np.where(spread > 0, sd, 0.0)
    return LabFoldStats(mean, sd, len(mats))


def enf_columns(class_ids: Sequence[str], subset=MODALITIES) -> list[str]:
    cols = []
    for m in parse_subset(subset):
        if m is Modality.LAB:
            cols += [f"lab:{t.id}:t{k + 1}" for t in LAB_TESTS for k in range(SERIES_LENGTH)]
        elif m is Modality.GENE:
            cols.append("gene:mutation_count")
        else:
            cols += [f"med:{c}" for c in class_ids]
    return cols


def enf_spans(n_classes: int, subset=MODALITIES) -> list[GroupSpan]:
    widths = {Modality.LAB: len(LAB_TESTS) * SERIES_LENGTH, Modality.GENE: 1,
              Modality.MED: n_classes}
    spans, start = [], 0
    for m in parse_subset(subset):
        spans.append(GroupSpan(m, start, start + widths[m]))
        start += widths[m]
    return spans


def build_enf(p: PatientRecord, stats: LabFoldStats, subset, class_ids: Sequence[str],
              series: np.ndarray | None = None) -> np.ndarray:
    parts = []
    for m in parse_subset(subset):
        if m is Modality.LAB:
            s = lab_matrix(p) if series is None else series
            safe = np.where(stats.sd > 0, stats.sd, 1.0)
            z = (s - stats.mean[:, None]) / safe[:, None]
            z[stats.sd == 0] = 0.0
            parts.append(z.ravel())
        elif m is Modality.GENE:
            parts.append(np.array([float(len({g.canonical_symbol for g in p.mutations}))]))
        else:
            present = {e.class_id for e in p.meds}
            parts.append(np.array([1.0 if c in present else 0.0 for c in class_ids]))
    return np.concatenate(parts)


# ---------------------------------------------------------------- text strategies

def _has(source, pid, m) -> bool:
    try:
        return (pid, m) in source
    except TypeError:
        return False


def build_text_features(p: PatientRecord, strategy, subset, source, embedder,
                        cache: EmbeddingCache | None = None):
    """Concatenated per-modality embeddings and their group spans."""
    strategy = Strategy.parse(strategy)
    if strategy is Strategy.ENF:
        raise ValueError("build_text_features handles CTE and GKC only")
    subset = parse_subset(subset)
    missing = [(p.patient_id, m) for m in subset if not _has(source, p.patient_id, m)]
    if missing:
        raise MissingArtifactError(missing, "profiles" if strategy is Strategy.CTE else "curate")
    vecs = {m: embed_text(embedder, source.text(p.patient_id, m), TaskHint.CLASSIFICATION,
                          cache) for m in subset}
    return concat_modalities(vecs)


# ---------------------------------------------------------------- matrices

@dataclass
class FeatureMatrix:
    strategy: Strategy
    subset: tuple[Modality, ...]
    X: np.ndarray
    group_spans: list[GroupSpan]
    row_ids: list[str]
    labels: np.ndarray
    columns: list[str] | None = None

    @property
    def shape(self):
        return self.X.shape


class AuditedCohort(Sequence):
    """Cohort wrapper that logs every row read with the active stage.

    Each entry of :attr:`reads` is ``(stage, phase, row)`` where ``stage`` is
    whatever the evaluation loop set via :meth:`stage` (for example
    ``("tune", repeat, fold)``) and ``phase`` is ``"fit"`` or ``"transform"``.
    """

    def __init__(self, patients: Sequence[PatientRecord]):
        self._patients = list(patients)
        self.reads: list[tuple] = []
        self._stage: tuple = ("setup",)
        self._phase = "transform"

    def __len__(self):
        return len(self._patients)

    def __getitem__(self, i):
        if isinstance(i, slice):
            raise TypeError("audited cohorts are read row by row")
        self.reads.append((self._stage, self._phase, int(i)))
        return self._patients[i]

    @contextlib.contextmanager
    def stage(self, *stage):
        prev = self._stage
        self._stage = tuple(stage)
        try:
            yield
        finally:
            self._stage = prev

    @contextlib.contextmanager
    def phase(self, phase: str):
        prev = self._phase
        self._phase = phase
        try:
            yield
        finally:
            self._phase = prev


@contextlib.contextmanager
def _phase(cohort, name):
    if isinstance(cohort, AuditedCohort):
        with cohort.phase(name):
            yield
    else:
        yield


MatrixFactory = Callable[[np.ndarray, np.ndarray], np.ndarray]


class EnfFactory:
    """``factory(fit_rows, rows)``: fit lab stats on ``fit_rows``, return ENF rows."""

    def __init__(self, cohort: Sequence[PatientRecord], class_ids: Sequence[str],
                 subset=MODALITIES):
        self.cohort = cohort
        self.class_ids = list(class_ids)
        self.subset = parse_subset(subset)
        self.group_spans = enf_spans(len(self.class_ids), self.subset)
        self.columns = enf_columns(self.class_ids, self.subset)
        self._series: dict[str, np.ndarray] = {}

    def _series_of(self, p):
        s = self._series.get(p.patient_id)
        if s is None:
            s = self._series[p.patient_id] = lab_matrix(p)
        return s

    def fit(self, fit_rows) -> LabFoldStats | None:
        if Modality.LAB not in self.subset:
            return None
        with _phase(self.cohort, "fit"):
            train = [self.cohort[int(i)] for i in fit_rows]
        return fit_lab_stats(train, {p.patient_id: self._series_of(p) for p in train})

    def transform(self, stats, rows) -> np.ndarray:
        with _phase(self.cohort, "transform"):
            pats = [self.cohort[int(i)] for i in rows]
        return np.array([build_enf(p, stats, self.subset, self.class_ids, self._series_of(p))
                         for p in pats]).reshape(len(pats), len(self.columns))

    def __call__(self, fit_rows, rows) -> np.ndarray:
        return self.transform(self.fit(fit_rows), rows)


class PrecomputedFactory:
    """Row slicing of a fixed matrix; used for embeddings, which need no fitting."""

    def __init__(self, X: np.ndarray, group_spans: list[GroupSpan]):
        self.X = np.asarray(X, dtype=np.float64)
        self.group_spans = group_spans

    def __call__(self, fit_rows, rows) -> np.ndarray:
        return self.X[np.asarray(rows, dtype=np.int64)]


def text_matrix(cohort: Sequence[PatientRecord], strategy, subset, source, embedder,
                cache: EmbeddingCache | None = None):
    """Embed every row; raises one aggregated :class:`MissingArtifactError`."""
    strategy = Strategy.parse(strategy)
    subset = parse_subset(subset)
    pats = [cohort[i] for i in range(len(cohort))]
    missing = [(p.patient_id, m) for p in pats for m in subset
               if not _has(source, p.patient_id, m)]
    if missing:
        raise MissingArtifactError(missing, "profiles" if strategy is Strategy.CTE else "curate")
    rows, spans = [], None
    for p in pats:
        v, spans = build_text_features(p, strategy, subset, source, embedder, cache)
        rows.append(v)
    return np.vstack(rows), spans


def assemble_matrix(cohort: Sequence[PatientRecord], strategy, subset=MODALITIES, *,
                    fit_rows=None, rows=None, kb: KnowledgeBase | None = None,
                    class_ids: Sequence[str] | None = None, source=None, embedder=None,
                    cache: EmbeddingCache | None = None) -> FeatureMatrix:
    """Matrix for ``rows`` (default: all) in cohort order.

    For ENF the lab block is standardized with statistics fitted on
    ``fit_rows`` (default: the same rows).
    """
    strategy = Strategy.parse(strategy)
    subset = parse_subset(subset)
    n = len(cohort)
    rows = np.arange(n) if rows is None else np.asarray(rows, dtype=np.int64)
    fit_rows = rows if fit_rows is None else np.asarray(fit_rows, dtype=np.int64)
    if strategy is Strategy.ENF:
        if class_ids is None:
            if kb is None:
                raise ValueError("ENF needs class_ids or a knowledge base")
            class_ids = kb.classes.class_ids
        fac = EnfFactory(cohort, class_ids, subset)
        X = fac(fit_rows, rows)
        spans, cols = fac.group_spans, fac.columns
    else:
        if source is None or embedder is None:
            raise ValueError(f"{strategy.value} needs a text source and an embedder")
        pats = [cohort[int(i)] for i in rows]
        X, spans = text_matrix(pats, strategy, subset, source, embedder, cache)
        cols = None
    pats = [cohort[int(i)] for i in rows]
    return FeatureMatrix(strategy, subset, X, spans, [p.patient_id for p in pats],
                         labels(pats), cols)


# ---------------------------------------------------------------- export

def write_matrix(fm: FeatureMatrix, path: str | Path) -> Path:
    """Tab-separated export.

    Line 1 is ``#`` followed by a JSON header (strategy, subset, group spans,
    columns); line 2 names the columns; each further line is
    ``patient_id<TAB>label<TAB>v1<TAB>...`` with values in shortest
    round-trip form.
    """
    path = Path(path)
    cols = fm.columns or [f"{s.modality.label.lower()}:{k}" for s in fm.group_spans
                          for k in range(s.width)]
    header = {"strategy": fm.strategy.value, "subset": [m.label for m in fm.subset],
              "group_spans": [[s.modality.label, s.start, s.stop] for s in fm.group_spans],
              "n_rows": int(fm.X.shape[0]), "n_cols": int(fm.X.shape[1])}
    lines = ["#" + json.dumps(header, sort_keys=True), "\t".join(["patient_id", "label", *cols])]
    for pid, y, row in zip(fm.row_ids, fm.labels, fm.X):
        lines.append("\t".join([pid, str(int(y)), *(repr(float(v)) for v in row)]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_matrix(path: str | Path) -> FeatureMatrix:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    header = json.loads(text[0][1:])
    cols = text[1].split("\t")[2:]
    ids, ys, rows = [], [], []
    for line in text[2:]:
        parts = line.split("\t")
        ids.append(parts[0])
        ys.append(int(parts[1]))
        rows.append([float(v) for v in parts[2:]])
    spans = [GroupSpan(Modality.parse(m), a, b) for m, a, b in header["group_spans"]]
    X = np.array(rows, dtype=np.float64).reshape(len(ids), header["n_cols"])
    return FeatureMatrix(Strategy.parse(header["strategy"]),
                         parse_subset(header["subset"]), X, spans, ids,
                         np.array(ys, dtype=np.int64), cols)
