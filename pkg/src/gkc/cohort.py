"""Analytic cohort: landmark eligibility, outcome labels and lab series.

Days are integer epoch-days.  Modality events carry day offsets from the
diagnosis day, so the landmark window is ``[0, 90]`` in event coordinates.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

LANDMARK_DAYS = 90
HORIZON_DAYS = 365
SERIES_LENGTH = 5


@dataclass(frozen=True)
class LabTest:
    id: str
    display: str
    unit: str
    reference_low: float
    reference_high: float
    band_factor: float = 6.0

    @property
    def plausible_low(self) -> float:
        width = self.reference_high - self.reference_low
        mid = 0.5 * (self.reference_low + self.reference_high)
        return max(0.0, mid - 0.5 * self.band_factor * width)

    @property
    def plausible_high(self) -> float:
        width = self.reference_high - self.reference_low
        mid = 0.5 * (self.reference_low + self.reference_high)
        return mid + 0.5 * self.band_factor * width

    def plausible(self, value: float) -> bool:
        return math.isfinite(value) and self.plausible_low <= value <= self.plausible_high


# Canonical order; ENF columns and lab profiles follow it.
LAB_TESTS: tuple[LabTest, ...] = (
    LabTest("albumin", "Albumin", "g/dL", 3.5, 5.0),
    LabTest("hemoglobin", "Hemoglobin", "g/dL", 12.0, 17.5),
    LabTest("platelets", "Platelets", "K/uL", 150.0, 400.0),
    LabTest("wbc", "White Blood Cells", "K/uL", 4.0, 11.0),
    LabTest("neutrophils", "Neutrophils", "K/uL", 1.8, 7.7),
    LabTest("lymphocytes", "Lymphocytes", "K/uL", 1.0, 4.8),
    LabTest("monocytes", "Monocytes", "K/uL", 0.2, 1.0),
    LabTest("crp", "C-Reactive Protein", "mg/L", 0.0, 10.0),
    LabTest("ldh", "Lactate Dehydrogenase", "U/L", 140.0, 280.0),
    LabTest("sodium", "Sodium", "mmol/L", 135.0, 145.0),
)
LAB_TEST_IDS: tuple[str, ...] = tuple(t.id for t in LAB_TESTS)
LAB_BY_ID: dict[str, LabTest] = {t.id: t for t in LAB_TESTS}


class Modality(enum.IntEnum):
    LAB = 0
    GENE = 1
    MED = 2

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, value) -> "Modality":
        if isinstance(value, cls):
            return value
        if isinstance(value, int):
            return cls(value)
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown modality {value!r}") from None


MODALITIES = (Modality.LAB, Modality.GENE, Modality.MED)


@dataclass(frozen=True)
class LabObservation:
    test: str
    value: float
    observed_day: int


@dataclass(frozen=True)
class GeneMutationRecord:
    raw_symbol: str
    canonical_symbol: str
    detail: str | None = None


@dataclass(frozen=True)
class MedicationEventRecord:
    drug_id: str
    class_id: str
    prescribed_day: int


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    diagnosis_day: int
    followup_end_day: int
    labs: tuple[LabObservation, ...]
    mutations: tuple[GeneMutationRecord, ...]
    meds: tuple[MedicationEventRecord, ...]
    death_day: int | None = None

    @property
    def landmark_day(self) -> int:
        return self.diagnosis_day + LANDMARK_DAYS

    def labs_for(self, test: str) -> list[LabObservation]:
        return [o for o in self.labs if o.test == test]


class IneligibleReason(enum.Enum):
    DIED_BEFORE_LANDMARK = "DiedBeforeLandmark"
    MISSING_MODALITY = "MissingModality"
    INSUFFICIENT_FOLLOWUP = "InsufficientFollowup"


class IneligibleError(ValueError):
    def __init__(self, reason: IneligibleReason, patient_id: str, modality: str | None = None):
        detail = f" ({modality})" if modality else ""
        super().__init__(f"patient {patient_id}: {reason.value}{detail}")
        self.reason = reason
        self.patient_id = patient_id
        self.modality = modality


class CensoredError(ValueError):
    pass


class NoObservationError(ValueError):
    pass


class CohortFormatError(ValueError):
    pass


def _get(raw, name, default=None):
    if isinstance(raw, Mapping):
        return raw.get(name, default)
    return getattr(raw, name, default)


def _as_lab(o) -> LabObservation:
    if isinstance(o, LabObservation):
        return o
    return LabObservation(str(o["test"]), float(o["value"]), int(o["observed_day"]))


def _as_mut(m, kb) -> GeneMutationRecord:
    raw_symbol = _get(m, "raw_symbol")
    canonical = _get(m, "canonical_symbol")
    if kb is not None:
        from .knowledge import normalize_gene_symbol
        canonical = normalize_gene_symbol(raw_symbol, kb.aliases)
    elif not canonical:
        canonical = raw_symbol.strip().upper()
    return GeneMutationRecord(raw_symbol, canonical, _get(m, "detail"))


def _as_med(m, kb) -> MedicationEventRecord:
    drug_id = _get(m, "drug_id")
    class_id = _get(m, "class_id")
    if kb is not None:
        class_id = kb.drug_class(drug_id)
    if not class_id:
        raise CohortFormatError(f"medication {drug_id!r} has no class and no knowledge base given")
    return MedicationEventRecord(drug_id, class_id, int(_get(m, "prescribed_day")))


def apply_landmark_filter(raw, window_days: int = LANDMARK_DAYS, kb=None,
                          horizon_days: int = HORIZON_DAYS) -> PatientRecord:
    """Restrict a raw patient to the landmark window and check eligibility.

    ``raw`` may be a :class:`PatientRecord` or a mapping with the same field
    names.  Lab values outside the test's plausibility band are dropped.  When
    ``kb`` is given, gene symbols are normalized and drug classes resolved
    through it.

    Raises
    ------
    IneligibleError
        Death before the landmark, an empty modality inside the window, or
        neither a death nor a full horizon of follow-up.
    """
    pid = str(_get(raw, "patient_id"))
    diagnosis = int(_get(raw, "diagnosis_day"))
    landmark = diagnosis + window_days
    death = _get(raw, "death_day")
    death = None if death is None else int(death)
    followup = _get(raw, "followup_end_day")
    followup = landmark if followup is None else int(followup)

    if death is not None and death < landmark:
        raise IneligibleError(IneligibleReason.DIED_BEFORE_LANDMARK, pid)

    labs = []
    for o in map(_as_lab, _get(raw, "labs", ()) or ()):
        test = LAB_BY_ID.get(o.test)
        if test is None or not 0 <= o.observed_day <= window_days:
            continue
        if test.plausible(o.value):
            labs.append(o)
    present = {o.test for o in labs}
    for test_id in LAB_TEST_IDS:
        if test_id not in present:
            raise IneligibleError(IneligibleReason.MISSING_MODALITY, pid, f"lab:{test_id}")

    mutations = tuple(_as_mut(m, kb) for m in (_get(raw, "mutations", ()) or ()))
    if not mutations:
        raise IneligibleError(IneligibleReason.MISSING_MODALITY, pid, "gene")

    meds = tuple(
        m for m in (_as_med(x, kb) for x in (_get(raw, "meds", ()) or ()))
        if 0 <= m.prescribed_day <= window_days
    )
    if not meds:
        raise IneligibleError(IneligibleReason.MISSING_MODALITY, pid, "med")

    if death is None and followup < landmark + horizon_days:
        raise IneligibleError(IneligibleReason.INSUFFICIENT_FOLLOWUP, pid)

    return PatientRecord(
        patient_id=pid,
        diagnosis_day=diagnosis,
        followup_end_day=followup,
        labs=tuple(labs),
        mutations=mutations,
        meds=meds,
        death_day=death,
    )


def label_outcome(p: PatientRecord, horizon_days: int = HORIZON_DAYS) -> int:
    """1 iff death occurs within ``horizon_days`` of the landmark (inclusive)."""
    if p.death_day is not None:
        return int(p.death_day - p.landmark_day <= horizon_days)
    if p.followup_end_day >= p.landmark_day + horizon_days:
        return 0
    raise CensoredError(f"patient {p.patient_id} is censored before the horizon")


def labels(cohort: Sequence[PatientRecord], horizon_days: int = HORIZON_DAYS):
    import numpy as np
    return np.array([label_outcome(p, horizon_days) for p in cohort], dtype=np.int64)


def prepare_lab_series(obs: Iterable[LabObservation], test: str,
                       k: int = SERIES_LENGTH) -> list[float]:
    """Most recent ``k`` values of ``test`` in chronological order, LOCF-padded.

    Observations sharing a day keep their input order.  Short series are padded
    by repeating the newest value after it.
    """
    picked = [o for o in obs if o.test == test]
    if not picked:
        raise NoObservationError(f"no in-window observation for {test}")
    picked.sort(key=lambda o: o.observed_day)
    values = [o.value for o in picked[-k:]]
    values.extend([values[-1]] * (k - len(values)))
    return values


@dataclass(frozen=True)
class Violation:
    patient_id: str
    rule: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    def __bool__(self):
        return not self.violations

    def __len__(self):
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    @property
    def ok(self) -> bool:
        return not self.violations

    def rules(self) -> list[str]:
        return [v.rule for v in self.violations]


def validate_cohort(cohort: Iterable[PatientRecord], kb=None,
                    panel: Iterable[str] | None = None,
                    horizon_days: int = HORIZON_DAYS) -> ValidationReport:
    """Check every record invariant; report failures rather than raising."""
    if panel is None and kb is not None:
        panel = kb.panel
    panel = frozenset(panel) if panel is not None else None
    report = ValidationReport()

    def add(pid, rule, msg):
        report.violations.append(Violation(pid, rule, msg))

    seen = set()
    for p in cohort:
        pid = p.patient_id
        if pid in seen:
            add(pid, "UniquePatientId", "duplicate patient id")
        seen.add(pid)
        if p.death_day is not None and p.death_day < p.landmark_day:
            add(pid, "LandmarkEligibility", "death before landmark")
        if p.death_day is None and p.followup_end_day < p.landmark_day + horizon_days:
            add(pid, "CompleteFollowup", "censored before horizon")
        present = set()
        for o in p.labs:
            test = LAB_BY_ID.get(o.test)
            if test is None:
                add(pid, "KnownLabTest", f"unknown lab test {o.test!r}")
                continue
            present.add(o.test)
            if not 0 <= o.observed_day <= LANDMARK_DAYS:
                add(pid, "LabWindow", f"{o.test} observed on day {o.observed_day}")
            if not test.plausible(o.value):
                add(pid, "LabPlausibility", f"{o.test}={o.value} outside plausibility band")
        for test_id in LAB_TEST_IDS:
            if test_id not in present:
                add(pid, "LabCompleteness", f"no observation for {test_id}")
        if not p.mutations:
            add(pid, "GeneCompleteness", "no mutations")
        for m in p.mutations:
            if not m.canonical_symbol:
                add(pid, "CanonicalSymbol", f"{m.raw_symbol!r} not normalized")
            elif panel is not None and m.canonical_symbol not in panel:
                add(pid, "PanelMembership", f"{m.canonical_symbol} not in panel")
        if not p.meds:
            add(pid, "MedCompleteness", "no medications")
        for m in p.meds:
            if not 0 <= m.prescribed_day <= LANDMARK_DAYS:
                add(pid, "MedWindow", f"{m.drug_id} prescribed on day {m.prescribed_day}")
            if kb is not None:
                expected = kb.classes.drug_to_class.get(m.drug_id)
                if expected is None:
                    add(pid, "KnownDrug", f"unknown drug {m.drug_id!r}")
                elif expected != m.class_id:
                    add(pid, "DrugClass", f"{m.drug_id} class {m.class_id} != {expected}")
    return report


# -- cohort file (one JSON object per line) ---------------------------------

RECORD_FIELDS = ("patient_id", "diagnosis_day", "landmark_day", "death_day",
                 "followup_end_day", "labs", "mutations", "meds")
_LAB_FIELDS = {"test", "value", "observed_day"}
_MUT_FIELDS = {"raw_symbol", "canonical_symbol", "detail"}
_MED_FIELDS = {"drug_id", "class_id", "prescribed_day"}


def record_to_dict(p: PatientRecord) -> dict:
    return {
        "patient_id": p.patient_id,
        "diagnosis_day": p.diagnosis_day,
        "landmark_day": p.landmark_day,
        "death_day": p.death_day,
        "followup_end_day": p.followup_end_day,
        "labs": [{"test": o.test, "value": o.value, "observed_day": o.observed_day}
                 for o in p.labs],
        "mutations": [{"raw_symbol": m.raw_symbol, "canonical_symbol": m.canonical_symbol,
                       "detail": m.detail} for m in p.mutations],
        "meds": [{"drug_id": m.drug_id, "class_id": m.class_id,
                  "prescribed_day": m.prescribed_day} for m in p.meds],
    }


def _check_keys(obj, allowed, where, strict):
    if not isinstance(obj, Mapping):
        raise CohortFormatError(f"{where}: expected an object")
    extra = set(obj) - set(allowed)
    if extra and strict:
        raise CohortFormatError(f"{where}: unknown field(s) {sorted(extra)}")


def record_from_dict(obj: Mapping, strict: bool = True) -> PatientRecord:
    _check_keys(obj, RECORD_FIELDS, "record", strict)
    try:
        p = PatientRecord(
            patient_id=str(obj["patient_id"]),
            diagnosis_day=int(obj["diagnosis_day"]),
            followup_end_day=int(obj["followup_end_day"]),
            death_day=None if obj.get("death_day") is None else int(obj["death_day"]),
            labs=tuple(LabObservation(str(o["test"]), float(o["value"]), int(o["observed_day"]))
                       for o in obj["labs"] if _check_keys(o, _LAB_FIELDS, "lab", strict) is None),
            mutations=tuple(GeneMutationRecord(m["raw_symbol"], m["canonical_symbol"],
                                               m.get("detail"))
                            for m in obj["mutations"]
                            if _check_keys(m, _MUT_FIELDS, "mutation", strict) is None),
            meds=tuple(MedicationEventRecord(m["drug_id"], m["class_id"], int(m["prescribed_day"]))
                       for m in obj["meds"]
                       if _check_keys(m, _MED_FIELDS, "med", strict) is None),
        )
    except KeyError as exc:
        raise CohortFormatError(f"missing field {exc.args[0]!r}") from None
    if "landmark_day" in obj and int(obj["landmark_day"]) != p.landmark_day:
        raise CohortFormatError(f"{p.patient_id}: landmark_day inconsistent with diagnosis_day")
    return p


def dumps_cohort(cohort: Iterable[PatientRecord]) -> str:
    return "".join(json.dumps(record_to_dict(p), sort_keys=True) + "\n" for p in cohort)


def write_cohort(path: str | Path, cohort: Iterable[PatientRecord]) -> None:
    Path(path).write_text(dumps_cohort(cohort), encoding="utf-8")


def read_cohort(path: str | Path, strict: bool = True) -> list[PatientRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(record_from_dict(json.loads(line), strict=strict))
            except (json.JSONDecodeError, CohortFormatError) as exc:
                raise CohortFormatError(f"{path}:{lineno}: {exc}") from None
    return out
