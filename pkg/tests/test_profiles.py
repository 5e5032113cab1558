import dataclasses
import random

import pytest

from gkc.cohort import GeneMutationRecord, MedicationEventRecord, Modality, prepare_lab_series
from gkc.knowledge import UnknownDrugError
from gkc.profiles import (
    DRUG_FIELD_HEADERS,
    CorpusError,
    ModalityProfile,
    build_profile,
    dump_profiles,
    fmt_value,
    load_profiles,
    profile_corpus,
    sha256_hex,
)


def _with(p, **kw):
    return dataclasses.replace(p, **kw)


def test_gene_profile_sorted_by_symbol(kb, cohort):
    p = _with(cohort[0], mutations=(GeneMutationRecord("TP53", "TP53"),
                                    GeneMutationRecord("kras", "KRAS")))
    text = build_profile(p, Modality.GENE, kb).text
    assert "Mutation Gene: TP53" in text
    assert text.index("Mutation Gene: KRAS") < text.index("Mutation Gene: TP53")
    assert kb.genes["KRAS"].function_summary in text
    for header in ("Function:", "KEGG Pathways:", "Biological Processes:", "Molecular Functions:"):
        assert text.count(header) == 2


def test_med_profile_single_drug_headers(kb, cohort):
    drug = "cisplatin-fixture"
    p = _with(cohort[0], meds=(MedicationEventRecord(drug, "platinum_chemo", 3),
                               MedicationEventRecord(drug, "platinum_chemo", 30)))
    text = build_profile(p, Modality.MED, kb).text
    assert text.count("Medication:") == 1
    for _, header in DRUG_FIELD_HEADERS:
        assert text.count(f" - {header}: ") == 1
    assert [h for _, h in DRUG_FIELD_HEADERS] == [
        "Description", "Mechanism of Action", "Indication", "Pharmacodynamics", "Toxicity"]


def test_lab_profile_lines(kb, cohort):
    p = cohort[0]
    text = build_profile(p, Modality.LAB, kb).text
    series = prepare_lab_series(p.labs, "albumin")
    assert ", ".join(fmt_value(v) for v in series) in text
    assert sum(1 for line in text.splitlines() if line[:1].isdigit()) == 10


def test_profile_deterministic_and_hashed(kb, cohort):
    for m in Modality:
        a = build_profile(cohort[5], m, kb)
        b = build_profile(cohort[5], m, kb)
        assert a == b
        assert a.digest == sha256_hex(a.text)
        assert len(a.digest) == 64
        assert a.approx_tokens == len(a.text.split())
        assert cohort[5].patient_id not in a.text


def test_permutation_invariance(kb, cohort):
    p = cohort[7]
    rng = random.Random(1)
    shuffled = _with(p, labs=tuple(rng.sample(p.labs, len(p.labs))),
                     mutations=tuple(rng.sample(p.mutations, len(p.mutations))),
                     meds=tuple(rng.sample(p.meds, len(p.meds))))
    for m in Modality:
        assert build_profile(p, m, kb).digest == build_profile(shuffled, m, kb).digest


def test_adding_mutation_changes_only_gene(kb, cohort):
    p = cohort[3]
    extra = next(s for s in sorted(kb.panel) if s not in {x.canonical_symbol for x in p.mutations})
    q = _with(p, mutations=p.mutations + (GeneMutationRecord(extra, extra),))
    before = {m: build_profile(p, m, kb).digest for m in Modality}
    after = {m: build_profile(q, m, kb).digest for m in Modality}
    assert before[Modality.GENE] != after[Modality.GENE]
    assert before[Modality.LAB] == after[Modality.LAB]
    assert before[Modality.MED] == after[Modality.MED]


def test_no_truncation(kb, cohort):
    for p in cohort[:20]:
        gene = build_profile(p, Modality.GENE, kb).text
        med = build_profile(p, Modality.MED, kb).text
        for mut in p.mutations:
            assert f"Mutation Gene: {mut.canonical_symbol}" in gene
        for ev in p.meds:
            assert kb.drug(ev.drug_id).name in med


def test_corpus_sizes(kb, cohort):
    assert len(profile_corpus(cohort, kb)) == 552
    assert len(profile_corpus([], kb)) == 0


def test_corpus_lenient_failure(kb, cohort):
    bad = _with(cohort[0], meds=(MedicationEventRecord("mystery-drug", "x", 1),))
    batch = [bad] + list(cohort[1:])
    corpus = profile_corpus(batch, kb, strict=False)
    assert len(corpus) == 551
    assert len(corpus.failures) == 1
    assert corpus.failures[0].modality is Modality.MED
    with pytest.raises(CorpusError):
        profile_corpus(batch, kb)
    with pytest.raises(UnknownDrugError):
        build_profile(bad, Modality.MED, kb)


def test_dump_and_load(tmp_path, kb, small_cohort):
    corpus = profile_corpus(small_cohort, kb)
    dump_profiles(corpus, tmp_path)
    pid = small_cohort[0].patient_id
    assert (tmp_path / f"{pid}.gene.txt").exists()
    back = load_profiles(tmp_path)
    assert back.profiles == corpus.profiles


def test_empty_profile_rejected():
    with pytest.raises(ValueError):
        ModalityProfile.from_text("P", Modality.LAB, "")
