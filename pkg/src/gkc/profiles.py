"""Long-form modality profiles built from patient records and annotations.

Profiles are the inputs of the contextual-embedding strategy and of the
curator.  They contain no patient identifiers, and their text depends only on
record content, never on record order.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .cohort import LAB_TESTS, MODALITIES, Modality, PatientRecord, prepare_lab_series
from .knowledge import KnowledgeBase, KnowledgeError

LAB_HEADER = "Laboratory Profile"
GENE_HEADER = "Genomic Profile"
MED_HEADER = "Medication Profile"

DRUG_FIELD_HEADERS = (
    ("description", "Description"),
    ("mechanism_of_action", "Mechanism of Action"),
    ("indication", "Indication"),
    ("pharmacodynamics", "Pharmacodynamics"),
    ("toxicity", "Toxicity"),
)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def fmt_value(v: float) -> str:
    return f"{v:.4g}"


@dataclass(frozen=True)
class ModalityProfile:
    patient_id: str
    modality: Modality
    text: str
    digest: str
    approx_tokens: int

    @classmethod
    def from_text(cls, patient_id: str, modality: Modality, text: str) -> "ModalityProfile":
        if not text:
            raise ValueError("profile text must be nonempty")
        return cls(patient_id, modality, text, sha256_hex(text), len(text.split()))


def _lab_text(p: PatientRecord) -> str:
    lines = [LAB_HEADER,
             "Five most recent values within the landmark window, oldest to newest."]
    for i, test in enumerate(LAB_TESTS, start=1):
        series = prepare_lab_series(p.labs, test.id)
        values = ", ".join(fmt_value(v) for v in series)
        lines.append(f"{i}. {test.display} ({test.unit}): {values}; reference range "
                     f"{test.reference_low:g}-{test.reference_high:g} {test.unit}")
    return "\n".join(lines)


def _gene_text(p: PatientRecord, kb: KnowledgeBase) -> str:
    muts = sorted(p.mutations, key=lambda m: (kb.gene(m.canonical_symbol).hgnc_symbol,
                                              m.detail or ""))
    lines = [GENE_HEADER]
    for i, m in enumerate(muts, start=1):
        ann = kb.gene(m.canonical_symbol)
        lines.append(f"{i}. Mutation Gene: {ann.hgnc_symbol}")
        if m.detail:
            lines.append(f" - Variant Detail: {m.detail}")
        lines.append(f" - Function: {ann.function_summary}")
        lines.append(f" - KEGG Pathways: {'; '.join(ann.kegg_pathways)}")
        lines.append(f" - Biological Processes: {'; '.join(ann.go_biological_processes)}")
        lines.append(f" - Molecular Functions: {'; '.join(ann.go_molecular_functions)}")
    return "\n".join(lines)


def _med_text(p: PatientRecord, kb: KnowledgeBase) -> str:
    drugs = sorted({(kb.drug_class(m.drug_id), m.drug_id) for m in p.meds})
    lines = [MED_HEADER]
    for i, (class_id, drug_id) in enumerate(drugs, start=1):
        ann = kb.drug(drug_id)
        lines.append(f"{i}. Medication: {ann.name} [{kb.classes.class_names[class_id]}]")
        for attr, header in DRUG_FIELD_HEADERS:
            lines.append(f" - {header}: {getattr(ann, attr)}")
    return "\n".join(lines)


def build_profile(p: PatientRecord, m: Modality, kb: KnowledgeBase) -> ModalityProfile:
    """Render one modality of one patient as a long-form text profile."""
    m = Modality.parse(m)
    if m is Modality.LAB:
        text = _lab_text(p)
    elif m is Modality.GENE:
        text = _gene_text(p, kb)
    else:
        text = _med_text(p, kb)
    return ModalityProfile.from_text(p.patient_id, m, text)


@dataclass(frozen=True)
class ProfileFailure:
    patient_id: str
    modality: Modality
    error: str


class CorpusError(Exception):
    def __init__(self, failures):
        super().__init__(f"{len(failures)} profile(s) failed: "
                         + "; ".join(f"{f.patient_id}/{f.modality.label}: {f.error}"
                                     for f in failures[:5]))
        self.failures = failures


@dataclass
class ProfileCorpus(Mapping):
    profiles: dict[tuple[str, Modality], ModalityProfile] = field(default_factory=dict)
    failures: list[ProfileFailure] = field(default_factory=list)

    def __getitem__(self, key):
        pid, m = key
        return self.profiles[(pid, Modality.parse(m))]

    def __iter__(self) -> Iterator:
        return iter(self.profiles)

    def __len__(self):
        return len(self.profiles)

    def text(self, patient_id: str, modality: Modality) -> str:
        return self[(patient_id, modality)].text


def profile_corpus(cohort: Iterable[PatientRecord], kb: KnowledgeBase,
                   strict: bool = True) -> ProfileCorpus:
    """Build all three profiles for every patient.

    Failures are collected per (patient, modality).  In strict mode any failure
    raises :class:`CorpusError` after the whole batch has been attempted.
    """
    corpus = ProfileCorpus()
    for p in cohort:
        for m in MODALITIES:
            try:
                corpus.profiles[(p.patient_id, m)] = build_profile(p, m, kb)
            except (KnowledgeError, KeyError, ValueError) as exc:
                corpus.failures.append(ProfileFailure(p.patient_id, m, str(exc)))
    if strict and corpus.failures:
        raise CorpusError(corpus.failures)
    return corpus


def dump_profiles(corpus: Mapping, directory: str | Path) -> Path:
    """Write ``<patient_id>.<modality>.txt`` files plus ``manifest.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = []
    for (pid, m), prof in sorted(corpus.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        name = f"{pid}.{m.name.lower()}.txt"
        (directory / name).write_text(prof.text, encoding="utf-8")
        manifest.append({"patient_id": pid, "modality": m.name.lower(), "file": name,
                         "digest": prof.digest, "approx_tokens": prof.approx_tokens})
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_profiles(directory: str | Path) -> ProfileCorpus:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    corpus = ProfileCorpus()
    for row in manifest:
        m = Modality.parse(row["modality"])
        text = (directory / row["file"]).read_text(encoding="utf-8")
        prof = ModalityProfile.from_text(row["patient_id"], m, text)
        if prof.digest != row["digest"]:
            raise ValueError(f"digest mismatch for {row['file']}")
        corpus.profiles[(row["patient_id"], m)] = prof
    return corpus
