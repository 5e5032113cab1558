"""Transparent rule-table curator used in place of an LLM.

The mock reads only the profile embedded in the prompt.  Each rule maps a
pattern in the profile text to a fixed phrase in one report section, so every
report can be predicted by evaluating the rules directly.
"""
from __future__ import annotations

import json
import re

from .cohort import Modality
from .curation import PROFILE_END, PROFILE_START, DecodingParams

ALBUMIN_DECLINE = -0.45   # g/dL, newest minus oldest value in the series
NLR_HIGH = 5.0

GENE_PAIR_FACTOR = "Concurrent KRAS mutation and MDM2 amplification."
GENE_PAIR_SUMMARY = ("The co-occurrence of mutant KRAS with MDM2 amplification "
                     "suggests a double-hit phenotype with aggressive tumor biology.")
STK11_KEAP1_FACTOR = "Co-alteration of STK11 and KEAP1 suggests immunotherapy resistance."
ALBUMIN_FACTOR = "Declining albumin trend indicating progressive nutritional deterioration."
NLR_FACTOR = "Elevated neutrophil-to-lymphocyte ratio indicating systemic inflammation."
MED_PAIR_FACTOR = ("Concurrent strong opioid and systemic corticosteroid use "
                   "indicating high symptom burden.")
TARGETED_FACTOR = "Receipt of targeted therapy matched to a driver alteration."
IMMUNO_FACTOR = "Receipt of checkpoint immunotherapy."

ACTIONABLE = ("ALK", "BRAF", "EGFR", "ERBB2", "MET", "RET", "ROS1")
TARGETED_CLASSES = ("EGFR Tyrosine Kinase Inhibitors", "ALK/ROS1 Inhibitors",
                    "KRAS G12C Inhibitors", "BRAF/MEK Inhibitors", "MET/RET Inhibitors")
IMMUNO_CLASSES = ("PD-1/PD-L1 Checkpoint Inhibitors", "CTLA-4 Checkpoint Inhibitors")
SUPPORTIVE_CLASSES = (
    "Strong Opioids", "Weak Opioids", "Systemic Corticosteroids",
    "5-HT3 Antagonist Antiemetics", "NK1 Receptor Antagonists",
    "Dopamine-Antagonist Antiemetics", "Granulocyte Colony-Stimulating Factors",
    "Erythropoiesis-Stimulating Agents", "Bone-Modifying Agents", "Anticoagulants",
    "Proton Pump Inhibitors", "Benzodiazepines", "Stimulant Laxatives",
)
INFLAMMATION_TESTS = ("White Blood Cells", "Neutrophils", "Monocytes", "Platelets",
                      "C-Reactive Protein", "Lactate Dehydrogenase")

_LAB_LINE = re.compile(r"^\d+\. (?P<name>.+?) \((?P<unit>[^)]*)\): (?P<values>[-0-9., e+]+); "
                       r"reference range (?P<lo>[-0-9.e+]+)-(?P<hi>[-0-9.e+]+)")
_GENE_LINE = re.compile(r"^\d+\. Mutation Gene: (?P<symbol>\S+)")
_FIELD_LINE = re.compile(r"^ - (?P<field>[A-Za-z ]+): (?P<value>.*)$")
_MED_LINE = re.compile(r"^\d+\. Medication: (?P<name>.+) \[(?P<cls>.+)\]$")


def split_prompt(prompt: str) -> tuple[Modality, str]:
    """Recover the modality and the verbatim profile from a built prompt."""
    m = re.search(r"^MODALITY: (\w+)$", prompt, flags=re.M)
    start = prompt.find(PROFILE_START)
    end = prompt.rfind(PROFILE_END)
    if m is None or start == -1 or end == -1:
        raise ValueError("prompt lacks modality or profile markers")
    text = prompt[start + len(PROFILE_START):end].strip("\n")
    return Modality.parse(m.group(1)), text


def parse_lab_profile(text: str) -> dict[str, tuple[list[float], float, float]]:
    out = {}
    for line in text.splitlines():
        m = _LAB_LINE.match(line)
        if m:
            values = [float(v) for v in m.group("values").split(",")]
            out[m.group("name")] = (values, float(m.group("lo")), float(m.group("hi")))
    return out


def parse_gene_profile(text: str) -> list[dict]:
    entries: list[dict] = []
    for line in text.splitlines():
        g = _GENE_LINE.match(line)
        if g:
            entries.append({"symbol": g.group("symbol")})
            continue
        f = _FIELD_LINE.match(line)
        if f and entries:
            entries[-1][f.group("field")] = f.group("value")
    return entries


def parse_med_profile(text: str) -> list[tuple[str, str]]:
    return [(m.group("name"), m.group("cls"))
            for m in map(_MED_LINE.match, text.splitlines()) if m]


def _gene_role(entry) -> str:
    function = entry.get("Function", "").lower()
    if "tumor suppressor" in function:
        return "suppressor"
    if "oncogene" in function:
        return "oncogene"
    if "dna damage" in function or "repair" in function:
        return "repair"
    return "other"


def _first_pathway(entry) -> str:
    pathways = [p.strip() for p in entry.get("KEGG Pathways", "").split(";") if p.strip()]
    return pathways[0] if pathways else "signaling"


def curate_gene(text: str) -> dict:
    entries = parse_gene_profile(text)
    symbols = sorted({e["symbol"] for e in entries})
    activated, inactivated, implications, positives, negatives = [], [], [], [], []
    for e in sorted(entries, key=lambda e: e["symbol"]):
        role = _gene_role(e)
        item = f"{_first_pathway(e)} ({e['symbol']})"
        if role == "oncogene" and item not in activated:
            activated.append(item)
        elif role in ("suppressor", "repair") and item not in inactivated:
            inactivated.append(item)
    for s in symbols:
        if s in ACTIONABLE:
            implications.append(f"Potential sensitivity to targeted inhibitors ({s})")
            positives.append(f"Actionable driver alteration ({s}).")
    summary = [f"Genomic profile with {len(symbols)} altered genes "
               f"({', '.join(symbols)}) reviewed for oncogenic pathway dysregulation."]
    if {"KRAS", "MDM2"} <= set(symbols):
        negatives.append(GENE_PAIR_FACTOR)
        summary.append(GENE_PAIR_SUMMARY)
    if {"STK11", "KEAP1"} <= set(symbols):
        negatives.append(STK11_KEAP1_FACTOR)
    return {
        "prognostic_summary": " ".join(summary),
        "key_prognostic_domains": {
            "oncogenic_driver_pathways_activated": activated,
            "tumor_suppressor_pathways_inactivated": inactivated,
            "therapeutic_implications": implications,
        },
        "key_positive_factors": positives,
        "key_negative_factors": negatives,
    }


def curate_lab(text: str) -> dict:
    labs = parse_lab_profile(text)
    inflammation, nutrition, hematology = [], [], []
    positives, negatives = [], []
    for name, (values, lo, hi) in labs.items():
        last = values[-1]
        if last < lo:
            finding = f"Low {name.lower()}"
        elif last > hi:
            finding = f"Elevated {name.lower()}"
        else:
            continue
        if name in INFLAMMATION_TESTS:
            inflammation.append(finding)
        elif name in ("Albumin", "Lymphocytes", "Sodium"):
            nutrition.append(finding)
        else:
            hematology.append(finding)
    summary = ["Laboratory profile reviewed for systemic inflammation and nutritional status."]
    if "Albumin" in labs:
        values, lo, _ = labs["Albumin"]
        if values[-1] - values[0] <= ALBUMIN_DECLINE:
            negatives.append(ALBUMIN_FACTOR)
            summary.append("Serial albumin values show a sustained decline across the window.")
        elif values[-1] >= lo:
            positives.append("Albumin maintained within the reference range.")
    if "Neutrophils" in labs and "Lymphocytes" in labs:
        nlr = labs["Neutrophils"][0][-1] / max(labs["Lymphocytes"][0][-1], 1e-6)
        if nlr > NLR_HIGH:
            negatives.append(NLR_FACTOR)
    return {
        "summary": " ".join(summary),
        "key_domains": {
            "inflammation_markers": inflammation,
            "nutritional_status": nutrition,
            "hematologic_status": hematology,
        },
        "therapeutic_implications": [],
        "key_positive_factors": positives,
        "key_negative_factors": negatives,
    }


def curate_med(text: str) -> dict:
    drugs = parse_med_profile(text)
    classes = sorted({c for _, c in drugs})
    intent = [c for c in classes if c not in SUPPORTIVE_CLASSES]
    support = [c for c in classes if c in SUPPORTIVE_CLASSES]
    positives, negatives, implications = [], [], []
    if any(c in TARGETED_CLASSES for c in classes):
        positives.append(TARGETED_FACTOR)
    if any(c in IMMUNO_CLASSES for c in classes):
        positives.append(IMMUNO_FACTOR)
        implications.append("Monitor for immune-related adverse events.")
    summary = [f"Medication history with {len(drugs)} agents across {len(classes)} "
               f"classes reviewed for treatment intent and disease burden."]
    if {"Strong Opioids", "Systemic Corticosteroids"} <= set(classes):
        negatives.append(MED_PAIR_FACTOR)
        summary.append("Concurrent opioid and corticosteroid therapy points to a "
                       "palliative trajectory with heavy symptom burden.")
    return {
        "summary": " ".join(summary),
        "key_domains": {"treatment_intent": intent, "supportive_care_burden": support},
        "therapeutic_implications": implications,
        "key_positive_factors": positives,
        "key_negative_factors": negatives,
    }


RULES = {Modality.LAB: curate_lab, Modality.GENE: curate_gene, Modality.MED: curate_med}


class MockCurator:
    """Deterministic curator; ``calls`` counts provider invocations."""

    deterministic = True

    def __init__(self, name: str = "mock-curator-v1", fenced: bool = False):
        self.name = name
        self.fenced = fenced
        self.calls = 0

    def complete(self, prompt: str, params: DecodingParams) -> str:
        self.calls += 1
        modality, text = split_prompt(prompt)
        body = json.dumps(RULES[modality](text), indent=2, ensure_ascii=False)
        if self.fenced:
            return f"Here is the report:\n```json\n{body}\n```\n"
        return body
