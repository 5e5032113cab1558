"""
Cohort, knowledge base and modality profiles
============================================

Generate a synthetic cohort, look at one patient through the landmark
filter, and render the three text profiles the later stages consume.
"""
import numpy as np

from gkc.cohort import LAB_TESTS, Modality, labels, prepare_lab_series
from gkc.knowledge import load_knowledge_base, normalize_gene_symbol
from gkc.profiles import build_profile, profile_corpus
from gkc.synthetic import SyntheticConfig, generate_synthetic_cohort

kb = load_knowledge_base()
print(f"panel genes: {len(kb.panel)}, drugs: {len(kb.drugs)}, classes: {len(kb.classes.class_ids)}")

# aliases resolve to the canonical symbol; the lookup is case-insensitive
for raw in ("tp53", "P53", "kras"):
    print(f"  {raw!r:8} -> {normalize_gene_symbol(raw, kb.aliases)}")

synth = generate_synthetic_cohort(SyntheticConfig(), kb)
cohort = synth.patients
y = labels(cohort)
print(f"\n{len(cohort)} eligible patients, {int(y.sum())} died within a year "
      f"({y.mean():.1%})")

# each planted pattern is a boolean mask over patients
for m, mask in synth.planted.items():
    print(f"  planted {m.label:4}: {mask.sum():3d} patients, "
          f"death rate {y[mask].mean():.2f} vs {y[~mask].mean():.2f}")

# the last five values of each test, padded by carrying the newest one forward
p = cohort[0]
for t in LAB_TESTS[:3]:
    print(f"  {t.display:<14} {prepare_lab_series(p.labs, t.id)}")

# %% one patient, three profiles
for m in Modality:
    prof = build_profile(p, m, kb)
    head = "\n    ".join(prof.text.splitlines()[:6])
    print(f"\n[{m.label}] {prof.approx_tokens} tokens, sha256 {prof.digest[:12]}\n    {head}")

corpus = profile_corpus(cohort, kb)
sizes = np.array([corpus.profiles[k].approx_tokens for k in corpus.profiles])
print(f"\ncorpus: {len(corpus)} profiles, median {np.median(sizes):.0f} tokens")
