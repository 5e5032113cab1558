"""
Curated reports and embeddings
==============================

Run the rule-based stand-in curator over one patient's profiles, validate
the structured output, and embed both the raw profile and the report.
The second pass over the corpus is served entirely from the caches.
"""
import numpy as np

from gkc.cohort import Modality
from gkc.curation import (ReportCache, build_prompt, curate, curate_corpus, load_templates,
                          render_report_text)
from gkc.embedding import EmbeddingCache, MockEmbedder, TaskHint, embed_text
from gkc.knowledge import load_knowledge_base
from gkc.mock_curator import MockCurator
from gkc.profiles import build_profile, profile_corpus
from gkc.synthetic import SyntheticConfig, generate_synthetic_cohort

kb = load_knowledge_base()
synth = generate_synthetic_cohort(SyntheticConfig(), kb)
templates = load_templates()
curator = MockCurator()

# pick a patient that carries the planted gene pattern
idx = int(np.flatnonzero(synth.planted[Modality.GENE])[0])
patient = synth.patients[idx]

for m in Modality:
    prof = build_profile(patient, m, kb)
    prompt = build_prompt(prof, templates[m])
    report = curate(curator, prof, templates[m])
    print(f"[{m.label}] prompt {len(prompt)} chars")
    print("   negative factors:", list(report.key_negative_factors))

print("\nrendered gene report:\n")
print(render_report_text(curate(curator, build_profile(patient, Modality.GENE, kb),
                                templates[Modality.GENE])))

# %% the whole corpus, twice
corpus = profile_corpus(synth.patients, kb)
cache = ReportCache()
before = curator.calls
store = curate_corpus(curator, corpus, templates, cache=cache)
print(f"first pass: {len(store)} reports, {curator.calls - before} provider calls")
before = curator.calls
curate_corpus(curator, corpus, templates, cache=cache)
print(f"second pass: {curator.calls - before} provider calls")

# %% embeddings: a profile and its report land in different places
emb = MockEmbedder()
vcache = EmbeddingCache()
key = (patient.patient_id, Modality.GENE)
a = embed_text(emb, corpus.text(*key), TaskHint.CLASSIFICATION, vcache).values
b = embed_text(emb, store.text(*key), TaskHint.CLASSIFICATION, vcache).values
print(f"\ncosine(profile, report) = {a @ b:.3f}; norms {np.linalg.norm(a):.3f}, "
      f"{np.linalg.norm(b):.3f}")
