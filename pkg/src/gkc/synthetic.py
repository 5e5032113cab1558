"""Synthetic cohorts with a planted, curator-recoverable risk signal.

Each patient carries three binary risk patterns, one per modality:

* lab  - albumin declining across the landmark window,
* gene - concurrent KRAS and MDM2 alterations,
* med  - concurrent strong-opioid and systemic-corticosteroid use.

Outcome follows a logistic link on the weighted pattern sum.  The intercept is
solved so that the realized number of deaths equals
``round(prevalence_target * n_patients)`` exactly.  Gene variant details are
padded with filler tokens, which dilutes the patterns inside raw profiles
without affecting anything a curator reads.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cohort import (
    LAB_TESTS,
    HORIZON_DAYS,
    LANDMARK_DAYS,
    GeneMutationRecord,
    LabObservation,
    MedicationEventRecord,
    Modality,
    PatientRecord,
)
from .knowledge import KnowledgeBase, load_knowledge_base

GENE_PAIR = ("KRAS", "MDM2")
CLASS_PAIR = ("strong_opioid", "corticosteroid")
DECLINING_TEST = "albumin"

FIRST_DAY = 15126   # 2011-06-01
LAST_DAY = 19296    # 2022-10-31

# population mean and sd per test; the first three follow the cohort table
_LAB_POPULATION = {
    "albumin": (3.8, 0.6),
    "hemoglobin": (11.7, 2.3),
    "platelets": (241.7, 119.0),
    "wbc": (8.0, 3.0),
    "neutrophils": (5.5, 2.5),
    "lymphocytes": (1.5, 0.6),
    "monocytes": (0.6, 0.25),
    "crp": (12.0, 15.0),
    "ldh": (230.0, 80.0),
    "sodium": (138.0, 3.5),
}
_LAB_DECIMALS = {"platelets": 0, "ldh": 0, "sodium": 0}

_COMMON_GENES = {
    "TP53": 10.0, "EGFR": 3.0, "STK11": 3.0, "KEAP1": 3.0, "SMARCA4": 2.0,
    "CDKN2A": 3.0, "PIK3CA": 2.0, "NF1": 2.0, "ATM": 2.0, "ARID1A": 2.0,
    "RBM10": 2.0, "BRAF": 1.5, "ERBB2": 1.5, "MET": 1.5, "ALK": 1.0,
    "ROS1": 1.0, "RET": 1.0, "NKX2-1": 2.0, "KMT2D": 2.0, "SETD2": 1.5,
}
_PAIR_BACKGROUND = {"KRAS": 0.2, "MDM2": 0.15}

# albumin: baseline mean/sd and clip range, declining and stable slopes over the window
_ALBUMIN_BASE = (3.9, 0.7)
_ALBUMIN_CLIP = (2.3, 5.3)
_DECLINE_SLOPE = (0.55, 0.9)
_STABLE_SLOPE = (-0.25, 0.3)
_CLASS_PAIR_BACKGROUND = 0.5

_FILLER = (
    "variant reported by the sequencing laboratory with standard coverage "
    "metrics and allele fraction estimates reviewed against population databases "
    "for germline polymorphism status and annotated with transcript coordinates "
    "exon number consequence type read depth strand bias quality score panel "
    "version specimen type tumor cellularity assessment pathology review "
    "orthogonal confirmation interpretation tier evidence level curation note "
    "reference genome build alignment pipeline caller filter status batch "
    "accession report section clinical significance classification date"
).split()

_PROTEIN_CHANGES = ("missense", "nonsense", "frameshift", "splice-site",
                    "amplification", "in-frame deletion")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticConfig:
    n_patients: int = 184
    prevalence_target: float = 0.364
    planted_signal_strength: float = 3.0
    noise_profile_tokens: int = 100
    seed: int = 7
    modality_weights: tuple[float, float, float] = (1.0, 1.5, 1.0)
    pattern_rate: float = 0.4

    def validate(self) -> None:
        if self.n_patients < 1:
            raise ConfigError("n_patients must be positive")
        if not 0.0 < self.prevalence_target < 1.0:
            raise ConfigError("prevalence_target must lie in (0, 1)")
        if not self.planted_signal_strength >= 0.0:
            raise ConfigError("planted_signal_strength must be >= 0")
        if self.noise_profile_tokens < 0:
            raise ConfigError("noise_profile_tokens must be >= 0")
        if len(self.modality_weights) != 3 or any(w < 0 for w in self.modality_weights):
            raise ConfigError("modality_weights must be three nonnegative numbers")
        if not 0.0 < self.pattern_rate < 1.0:
            raise ConfigError("pattern_rate must lie in (0, 1)")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


@dataclass
class SyntheticCohort:
    patients: list[PatientRecord]
    latent_risk: np.ndarray
    planted: dict[Modality, np.ndarray] = field(default_factory=dict)
    intercept: float = 0.0
    config: SyntheticConfig | None = None

    def __len__(self):
        return len(self.patients)

    def __iter__(self):
        return iter(self.patients)

    def __getitem__(self, i):
        return self.patients[i]


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _solve_intercept(risk, u, k):
    """Smallest-bracket intercept with exactly ``k`` draws ``u < sigmoid(b + risk)``."""
    lo, hi = -60.0, 60.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        count = int(np.sum(u < _sigmoid(mid + risk)))
        if count == k:
            return mid
        if count < k:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _lab_observations(rng, declining: bool):
    labs = []
    for test in LAB_TESTS:
        mu, sd = _LAB_POPULATION[test.id]
        dec = _LAB_DECIMALS.get(test.id, 2)
        lo = max(test.plausible_low, 0.01)
        hi = test.plausible_high
        if test.id == DECLINING_TEST:
            n_obs = int(rng.integers(5, 8))
            days = np.sort(rng.choice(LANDMARK_DAYS + 1, size=n_obs, replace=False))
            base = float(np.clip(rng.normal(*_ALBUMIN_BASE), *_ALBUMIN_CLIP))
            slope = -rng.uniform(*_DECLINE_SLOPE) if declining else rng.uniform(*_STABLE_SLOPE)
            values = base + slope * days / LANDMARK_DAYS + rng.normal(0.0, 0.08, n_obs)
        else:
            n_obs = int(rng.integers(1, 8))
            days = np.sort(rng.choice(LANDMARK_DAYS + 1, size=n_obs, replace=False))
            base = rng.normal(mu, sd)
            values = base + rng.normal(0.0, 0.15 * sd, n_obs)
        values = np.clip(np.round(values, dec), lo, hi)
        labs.extend(LabObservation(test.id, float(v), int(d)) for v, d in zip(values, days))
    return labs


def _mutations(rng, planted: bool, panel_weights, noise_tokens):
    genes, weights = panel_weights
    n_total = int(np.clip(round(rng.normal(5.2, 1.8)), 2, 10))
    chosen = [g for g in GENE_PAIR if rng.random() < _PAIR_BACKGROUND[g]]
    if planted:
        chosen = list(GENE_PAIR)
    elif len(chosen) == 2:
        chosen = [GENE_PAIR[int(rng.integers(2))]]
    n_rest = max(n_total - len(chosen), 0)
    rest = rng.choice(len(genes), size=n_rest, replace=False, p=weights)
    symbols = chosen + [genes[i] for i in rest]
    per_gene = noise_tokens // max(len(symbols), 1)
    out = []
    for s in symbols:
        change = _PROTEIN_CHANGES[int(rng.integers(len(_PROTEIN_CHANGES)))]
        vaf = rng.uniform(0.05, 0.6)
        filler = " ".join(rng.choice(_FILLER, size=per_gene))
        detail = f"{change}, VAF {vaf:.2f}" + (f"; {filler}" if filler else "")
        raw = s.lower() if rng.random() < 0.1 else s
        out.append(GeneMutationRecord(raw_symbol=raw, canonical_symbol=s, detail=detail))
    return out


def _medications(rng, planted: bool, kb: KnowledgeBase):
    anti = sorted({kb.drug_class(d) for d, a in kb.drugs.items() if a.category == "anti_cancer"})
    support = sorted({kb.drug_class(d) for d, a in kb.drugs.items()
                      if a.category != "anti_cancer"} - set(CLASS_PAIR))
    n_anti = int(rng.integers(1, 5))
    classes = [anti[i] for i in rng.choice(len(anti), size=n_anti, replace=False)]
    classes += [c for c in support if rng.random() < 0.45]
    pair = [c for c in CLASS_PAIR if rng.random() < _CLASS_PAIR_BACKGROUND]
    if planted:
        pair = list(CLASS_PAIR)
    elif len(pair) == 2:
        pair = [CLASS_PAIR[int(rng.integers(2))]]
    classes += pair
    events = []
    for c in sorted(classes):
        members = kb.classes.members(c)
        n_drugs = 2 if (len(members) > 1 and rng.random() < 0.2) else 1
        for d in rng.choice(members, size=n_drugs, replace=False):
            for day in rng.integers(0, LANDMARK_DAYS + 1, size=int(rng.integers(1, 4))):
                events.append(MedicationEventRecord(str(d), c, int(day)))
    return events


def _panel_weights(kb: KnowledgeBase):
    genes = sorted(kb.panel - set(GENE_PAIR))
    w = np.array([_COMMON_GENES.get(g, 1.0) for g in genes])
    return genes, w / w.sum()


def generate_synthetic_cohort(cfg: SyntheticConfig, kb: KnowledgeBase | None = None
                              ) -> SyntheticCohort:
    """Generate an eligible cohort whose outcome depends on planted patterns.

    The result is a pure function of ``cfg`` (the seed is part of it).
    """
    cfg.validate()
    kb = kb or load_knowledge_base()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_patients

    planted = {m: rng.random(n) < cfg.pattern_rate for m in Modality}
    weights = np.asarray(cfg.modality_weights, dtype=float)
    risk = cfg.planted_signal_strength * sum(
        weights[m] * (planted[m].astype(float) - cfg.pattern_rate) for m in Modality)
    u = rng.random(n)
    k = int(round(cfg.prevalence_target * n))
    intercept = _solve_intercept(risk, u, k)
    y = (u < _sigmoid(intercept + risk)).astype(int)

    panel_weights = _panel_weights(kb)
    patients = []
    for i in range(n):
        diagnosis = int(rng.integers(FIRST_DAY, LAST_DAY + 1))
        landmark = diagnosis + LANDMARK_DAYS
        labs = _lab_observations(rng, bool(planted[Modality.LAB][i]))
        muts = _mutations(rng, bool(planted[Modality.GENE][i]), panel_weights,
                          cfg.noise_profile_tokens)
        meds = _medications(rng, bool(planted[Modality.MED][i]), kb)
        if y[i]:
            death = landmark + int(rng.integers(1, HORIZON_DAYS + 1))
            followup = death
        elif rng.random() < 0.5:
            death = landmark + int(rng.integers(HORIZON_DAYS + 1, 4 * HORIZON_DAYS))
            followup = death
        else:
            death = None
            followup = landmark + int(rng.integers(HORIZON_DAYS, 6 * HORIZON_DAYS))
        patients.append(PatientRecord(
            patient_id=f"P{i + 1:04d}",
            diagnosis_day=diagnosis,
            followup_end_day=followup,
            labs=tuple(labs),
            mutations=tuple(muts),
            meds=tuple(meds),
            death_day=death,
        ))
    return SyntheticCohort(patients, intercept + risk, planted, intercept, cfg)
