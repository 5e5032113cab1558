"""Regenerate the bundled annotation fixtures under src/gkc/data/.

The fixtures stand in for licensed annotation databases. Gene symbols and drug
names are real; narrative text is templated so that every record carries the
same fields as the upstream sources without redistributing their content.

Run from the repository root::

    python scripts/build_fixtures.py
"""
import hashlib
import json
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "gkc" / "data"

CANDIDATE_GENES = """
ABL1 ACVR1B AKT1 AKT2 AKT3 ALK ALOX12B AMER1 APC AR ARAF ARFRP1 ARID1A ASXL1 ATM
ATR ATRX AURKA AURKB AXIN1 AXL BAP1 BARD1 BCL2 BCL2L1 BCL2L2 BCL6 BCOR BCORL1
BRAF BRCA1 BRCA2 BRD4 BRIP1 BTG1 BTG2 BTK CALR CARD11 CASP8 CBFB CBL CCND1 CCND2
CCND3 CCNE1 CD22 CD274 CD70 CD79A CD79B CDC73 CDH1 CDK12 CDK4 CDK6 CDK8 CDKN1A
CDKN1B CDKN2A CDKN2B CDKN2C CEBPA CHEK1 CHEK2 CIC CREBBP CRKL CSF1R CSF3R CTCF
CTNNA1 CTNNB1 CUL3 CUL4A CXCR4 CYP17A1 DAXX DDR1 DDR2 DIS3 DNMT3A DOT1L EED EGFR
EP300 EPHA3 EPHB1 EPHB4 ERBB2 ERBB3 ERBB4 ERCC4 ERG ERRFI1 ESR1 ETV4 ETV5 ETV6
EZH2 FANCA FANCC FANCG FANCL FAS FBXW7 FGF10 FGF12 FGF14 FGF19 FGF23 FGF3 FGF4
FGF6 FGFR1 FGFR2 FGFR3 FGFR4 FH FLCN FLT1 FLT3 FOXL2 FUBP1 GATA3 GATA4 GATA6
GID4 GNA11 GNA13 GNAQ GNAS GRM3 GSK3B H3-3A HDAC1 HGF HNF1A HRAS HSD3B1 ID3 IDH1
IDH2 IGF1R IKBKE IKZF1 INPP4B IRF2 IRF4 IRS2 JAK1 JAK2 JAK3 JUN KDM5A KDM5C
KDM6A KDR KEAP1 KEL KIT KLHL6 KMT2A KMT2D KRAS LTK LYN MAF MAP2K1 MAP2K2 MAP2K4
MAP3K1 MAP3K13 MAPK1 MCL1 MDM2 MDM4 MED12 MEF2B MEN1 MERTK MET MITF MKNK1 MLH1
MPL MRE11 MSH2 MSH3 MSH6 MST1R MTAP MTOR MUTYH MYC MYCL MYCN MYD88 NBN NF1 NF2
NFE2L2 NFKBIA NKX2-1 NOTCH1 NOTCH2 NOTCH3 NPM1 NRAS NSD2 NSD3 NT5C2 NTRK1 NTRK2
NTRK3 P2RY8 PALB2 PARP1 PARP2 PARP3 PAX5 PBRM1 PDCD1 PDCD1LG2 PDGFRA PDGFRB PDK1
PIK3C2B PIK3C2G PIK3CA PIK3CB PIK3R1 PIM1 PMS2 POLD1 POLE PPARG PPP2R1A PPP2R2A
PRDM1 PRKAR1A PRKCI PTCH1 PTEN PTPN11 PTPRO QKI RAC1 RAD21 RAD51 RAD51B RAD51C
RAD51D RAD52 RAD54L RAF1 RARA RB1 RBM10 REL RET RICTOR RNF43 ROS1 RPTOR SDHA
SDHB SDHC SDHD SETD2 SF3B1 SGK1 SMAD2 SMAD4 SMARCA4 SMARCB1 SMO SNCAIP SOCS1
SOX2 SOX9 SPEN SPOP SRC STAG2 STAT3 STK11 SUFU SYK TBX3 TEK TERC TERT TET2
TGFBR2 TIPARP TNFAIP3 TNFRSF14 TP53 TSC1 TSC2 TYRO3 U2AF1 VEGFA VHL WT1 XPO1
XRCC2 ZNF217 ZNF703
""".split()

PANEL_SIZE = 271

ONCOGENES = set("""
ABL1 AKT1 AKT2 AKT3 ALK ARAF AURKA AURKB AXL BCL2 BCL2L1 BCL6 BRAF BRD4 BTK CCND1
CCND2 CCND3 CCNE1 CDK4 CDK6 CDK8 CRKL CSF1R CTNNB1 DDR1 DDR2 EGFR ERBB2 ERBB3
ERBB4 ERG ETV4 ETV5 EZH2 FGF19 FGF3 FGF4 FGFR1 FGFR2 FGFR3 FGFR4 FLT1 FLT3 GNA11
GNAQ GNAS HRAS IDH1 IDH2 IGF1R JAK1 JAK2 JAK3 KIT KRAS MAP2K1 MAP2K2 MAPK1 MCL1
MDM2 MDM4 MET MTOR MYC MYCL MYCN NRAS NTRK1 NTRK2 NTRK3 PDGFRA PDGFRB PIK3CA
PIK3CB RAC1 RAF1 REL RET RICTOR ROS1 SOX2 SRC TERT
""".split())

TUMOR_SUPPRESSORS = set("""
APC ARID1A BAP1 CDH1 CDKN1A CDKN1B CDKN2A CDKN2B CDKN2C CIC CREBBP CTNNA1 FBXW7
FH FLCN KEAP1 KMT2D NF1 NF2 PBRM1 PIK3R1 PTCH1 PTEN RB1 RBM10 SETD2 SMAD2 SMAD4
SMARCA4 SMARCB1 STK11 SUFU TP53 TSC1 TSC2 VHL WT1
""".split())

DNA_REPAIR = set("""
ATM ATR BARD1 BRCA1 BRCA2 BRIP1 CHEK1 CHEK2 ERCC4 FANCA FANCC FANCG FANCL MLH1
MRE11 MSH2 MSH3 MSH6 MUTYH NBN PALB2 PARP1 PARP2 PARP3 PMS2 POLD1 POLE RAD51
RAD51B RAD51C RAD51D RAD52 RAD54L XRCC2
""".split())

REQUIRED = {"TP53", "KRAS", "MDM2", "EGFR", "ALK", "ROS1", "RET", "MET", "BRAF",
            "STK11", "KEAP1", "REL", "RICTOR", "CDK4", "ATR", "SMARCA4"}

ROLE_TEXT = {
    "oncogene": dict(
        kind="protein kinase or signaling effector",
        phrase="acts as a proto-oncogene that transmits proliferative signals "
               "from cell-surface receptors to the nucleus",
        mechanism="is activated by point mutation, amplification or fusion, "
                  "which produces constitutive downstream signaling",
        clinical="are recurrent oncogene drivers in solid tumors and can "
                 "indicate sensitivity or resistance to targeted inhibitors",
    ),
    "tumor_suppressor": dict(
        kind="regulatory protein",
        phrase="functions as a tumor suppressor that restrains cell growth and "
               "preserves genome integrity",
        mechanism="is inactivated by truncating or missense mutation, deletion "
                  "or promoter silencing",
        clinical="lead to loss of tumor suppressor function and are associated "
                 "with aggressive disease in several cancers",
    ),
    "dna_repair": dict(
        kind="DNA damage response protein",
        phrase="participates in the detection and repair of DNA damage and in "
               "cell cycle checkpoint control",
        mechanism="is disrupted by loss-of-function alterations that impair "
                  "homologous recombination or mismatch repair",
        clinical="cause genomic instability and may confer sensitivity to "
                 "PARP inhibition or platinum agents",
    ),
    "chromatin": dict(
        kind="chromatin-associated regulator",
        phrase="modulates chromatin structure and transcriptional programs",
        mechanism="is altered by mutations that change histone modification or "
                  "nucleosome remodeling",
        clinical="are frequent passenger or modifier events whose prognostic "
                 "relevance depends on tumor context",
    ),
    "signaling": dict(
        kind="signaling or transcription regulator",
        phrase="participates in developmental and growth factor signaling "
               "networks",
        mechanism="is affected by mutations of uncertain functional impact in "
                  "many tumor types",
        clinical="have variable prognostic significance and are reported in "
                 "targeted sequencing panels",
    ),
}

KEGG_POOLS = {
    "oncogene": ["MAPK signaling pathway", "PI3K-Akt signaling pathway",
                 "Ras signaling pathway", "Rap1 signaling pathway",
                 "ErbB signaling pathway", "Non-small cell lung cancer",
                 "Pathways in cancer", "Focal adhesion",
                 "mTOR signaling pathway", "JAK-STAT signaling pathway",
                 "EGFR tyrosine kinase inhibitor resistance"],
    "tumor_suppressor": ["p53 signaling pathway", "Cell cycle", "Apoptosis",
                         "Cellular senescence", "Hippo signaling pathway",
                         "TGF-beta signaling pathway", "Wnt signaling pathway",
                         "Pathways in cancer", "Non-small cell lung cancer"],
    "dna_repair": ["Homologous recombination", "Fanconi anemia pathway",
                   "Mismatch repair", "Base excision repair",
                   "Nucleotide excision repair", "Cell cycle",
                   "p53 signaling pathway"],
    "chromatin": ["Lysine degradation", "Transcriptional misregulation in cancer",
                  "Thermogenesis", "Hepatocellular carcinoma",
                  "Pathways in cancer"],
    "signaling": ["Notch signaling pathway", "Hedgehog signaling pathway",
                  "Cytokine-cytokine receptor interaction",
                  "NF-kappa B signaling pathway", "Chemokine signaling pathway",
                  "Pathways in cancer"],
}

GO_BP_POOLS = {
    "oncogene": ["positive regulation of cell population proliferation",
                 "protein phosphorylation", "signal transduction",
                 "positive regulation of MAPK cascade",
                 "peptidyl-tyrosine phosphorylation",
                 "positive regulation of protein kinase B signaling",
                 "cell migration"],
    "tumor_suppressor": ["negative regulation of cell population proliferation",
                         "negative regulation of transcription by RNA polymerase II",
                         "intrinsic apoptotic signaling pathway",
                         "cell cycle arrest", "regulation of cell growth",
                         "negative regulation of G1/S transition of mitotic cell cycle"],
    "dna_repair": ["double-strand break repair via homologous recombination",
                   "DNA damage checkpoint signaling", "mismatch repair",
                   "response to ionizing radiation", "DNA replication",
                   "interstrand cross-link repair"],
    "chromatin": ["chromatin remodeling", "histone methylation",
                  "regulation of transcription by RNA polymerase II",
                  "nucleosome positioning"],
    "signaling": ["regulation of gene expression", "cell differentiation",
                  "immune response", "inflammatory response",
                  "regulation of signal transduction"],
}

GO_MF_POOLS = {
    "oncogene": ["ATP binding", "protein tyrosine kinase activity",
                 "protein serine/threonine kinase activity", "GTPase activity",
                 "protein kinase binding", "transmembrane receptor protein "
                 "tyrosine kinase activity"],
    "tumor_suppressor": ["DNA-binding transcription factor activity",
                         "transcription cis-regulatory region binding",
                         "protein domain specific binding",
                         "ubiquitin protein ligase binding",
                         "cyclin-dependent protein kinase inhibitor activity"],
    "dna_repair": ["damaged DNA binding", "single-stranded DNA binding",
                   "ATP-dependent DNA helicase activity", "nuclease activity",
                   "NAD+ ADP-ribosyltransferase activity"],
    "chromatin": ["histone methyltransferase activity", "chromatin binding",
                  "histone acetyltransferase activity", "nucleosome binding"],
    "signaling": ["protein binding", "signaling receptor binding",
                  "transcription coactivator activity", "metal ion binding"],
}

OVERRIDES = {
    "TP53": dict(
        function_summary="This gene encodes a tumor suppressor protein containing "
        "transcriptional activation, DNA binding, and oligomerization domains. The "
        "encoded protein responds to diverse cellular stresses to regulate expression "
        "of target genes, thereby inducing cell cycle arrest, apoptosis, senescence, "
        "DNA repair, or changes in metabolism. Mutations in this gene are associated "
        "with a variety of human cancers and loss of tumor suppressor function.",
        kegg_pathways=["MAPK signaling pathway", "Cell cycle", "p53 signaling pathway",
                       "PI3K-Akt signaling pathway", "Apoptosis",
                       "Cellular senescence", "Non-small cell lung cancer"],
        go_biological_processes=[
            "negative regulation of transcription by RNA polymerase II",
            "intrinsic apoptotic signaling pathway in response to DNA damage",
            "cell cycle arrest", "DNA damage response"],
        go_molecular_functions=["transcription cis-regulatory region binding",
                                "DNA-binding transcription factor activity",
                                "p53 binding"],
    ),
    "KRAS": dict(
        function_summary="This gene, a Kirsten ras oncogene homolog from the "
        "mammalian ras gene family, encodes a small GTPase that functions as a "
        "proto-oncogene. A single amino acid substitution is responsible for an "
        "activating mutation, and the transforming protein is implicated in various "
        "malignancies, including lung adenocarcinoma, mucinous adenoma, ductal "
        "carcinoma of the pancreas and colorectal carcinoma.",
        kegg_pathways=["MAPK signaling pathway", "Ras signaling pathway",
                       "Rap1 signaling pathway", "PI3K-Akt signaling pathway",
                       "ErbB signaling pathway", "Non-small cell lung cancer"],
        go_biological_processes=["Ras protein signal transduction",
                                 "positive regulation of MAPK cascade",
                                 "positive regulation of cell population proliferation"],
        go_molecular_functions=["GTPase activity", "GTP binding",
                                "protein-containing complex binding"],
    ),
    "MDM2": dict(
        function_summary="This gene encodes a nuclear-localized E3 ubiquitin ligase "
        "and proto-oncogene. The encoded protein can promote tumor formation by "
        "targeting tumor suppressor proteins, such as p53, for proteasomal "
        "degradation. This gene is itself transcriptionally regulated by p53, and "
        "amplification of this gene is observed in a variety of cancers.",
        kegg_pathways=["p53 signaling pathway", "Cell cycle", "PI3K-Akt signaling pathway",
                       "Ubiquitin mediated proteolysis", "Pathways in cancer"],
        go_biological_processes=["negative regulation of apoptotic process",
                                 "protein ubiquitination",
                                 "negative regulation of DNA damage response"],
        go_molecular_functions=["ubiquitin-protein transferase activity", "p53 binding",
                                "zinc ion binding"],
    ),
}

BOILER = ("Alterations are catalogued in public variant resources and are "
          "interpreted according to standard somatic variant classification "
          "guidelines.")


def _role(symbol):
    if symbol in ONCOGENES:
        return "oncogene"
    if symbol in TUMOR_SUPPRESSORS:
        return "tumor_suppressor"
    if symbol in DNA_REPAIR:
        return "dna_repair"
    h = int(hashlib.sha256(symbol.encode()).hexdigest(), 16)
    return ("chromatin", "signaling")[h % 2]


def _rng(key):
    seed = int(hashlib.sha256(key.encode()).hexdigest()[:16], 16)
    return np.random.default_rng(seed)


def _pick(pool, rng, lo, hi):
    k = int(rng.integers(lo, min(hi, len(pool)) + 1))
    idx = sorted(rng.choice(len(pool), size=k, replace=False))
    return [pool[i] for i in idx]


def build_panel():
    rest = [g for g in sorted(CANDIDATE_GENES) if g not in REQUIRED]
    panel = sorted(REQUIRED | set(rest[: PANEL_SIZE - len(REQUIRED)]))
    assert len(panel) == PANEL_SIZE, len(panel)
    return panel


def gene_records(panel):
    for symbol in panel:
        if symbol in OVERRIDES:
            yield {"hgnc_symbol": symbol, **OVERRIDES[symbol]}
            continue
        role = _role(symbol)
        t = ROLE_TEXT[role]
        rng = _rng(symbol)
        summary = (f"This gene encodes a {t['kind']} that {t['phrase']}. "
                   f"The {symbol} protein {t['mechanism']}. "
                   f"Alterations in {symbol} {t['clinical']}. {BOILER}")
        yield {
            "hgnc_symbol": symbol,
            "function_summary": summary,
            "kegg_pathways": _pick(KEGG_POOLS[role], rng, 2, 6),
            "go_biological_processes": _pick(GO_BP_POOLS[role], rng, 2, 4),
            "go_molecular_functions": _pick(GO_MF_POOLS[role], rng, 1, 3),
        }


ALIASES = [
    ("P53-LIKE-ALIAS", "TP53"), ("P53", "TP53"), ("LFS1", "TP53"),
    ("KRAS2", "KRAS"), ("KI-RAS", "KRAS"), ("HDM2", "MDM2"),
    ("ERBB1", "EGFR"), ("HER1", "EGFR"), ("HER2", "ERBB2"), ("NEU", "ERBB2"),
    ("HER3", "ERBB3"), ("HGFR", "MET"), ("C-MET", "MET"), ("LKB1", "STK11"),
    ("BRG1", "SMARCA4"), ("TTF1", "NKX2-1"), ("TITF1", "NKX2-1"),
    ("P16", "CDKN2A"), ("INK4A", "CDKN2A"), ("MTS1", "CDKN2A"),
    ("PD-L1", "CD274"), ("B7-H1", "CD274"), ("PD1", "PDCD1"), ("PD-L2", "PDCD1LG2"),
    ("MLL", "KMT2A"), ("MLL2", "KMT2D"), ("MYCL1", "MYCL"), ("FAM123B", "AMER1"),
    ("MRE11A", "MRE11"), ("WHSC1", "NSD2"), ("H3F3A", "H3-3A"), ("NRF2", "NFE2L2"),
    ("PIK3CA-ALPHA", "PIK3CA"), ("C-KIT", "KIT"), ("FLK1", "KDR"), ("VEGFR2", "KDR"),
    ("BAF250A", "ARID1A"), ("CCND1-PRAD1", "CCND1"), ("MMAC1", "PTEN"),
    ("RAPTOR", "RPTOR"), ("C-REL", "REL"), ("RIC", "RICTOR"), ("PSK-J3", "CDK4"),
    ("FRP1", "ATR"),
]

CLASSES = [
    # (class_id, display name, category, drugs)
    ("platinum_chemo", "Platinum-Based Chemotherapy", "anti_cancer",
     ["Cisplatin", "Carboplatin"]),
    ("taxane", "Taxanes", "anti_cancer", ["Paclitaxel", "Docetaxel", "Nab-Paclitaxel"]),
    ("antifolate", "Antifolates", "anti_cancer", ["Pemetrexed"]),
    ("nucleoside_analog", "Nucleoside Analogs", "anti_cancer", ["Gemcitabine"]),
    ("vinca_alkaloid", "Vinca Alkaloids", "anti_cancer", ["Vinorelbine"]),
    ("topoisomerase_inhibitor", "Topoisomerase Inhibitors", "anti_cancer",
     ["Etoposide", "Irinotecan", "Topotecan"]),
    ("pd1_pdl1_inhibitor", "PD-1/PD-L1 Checkpoint Inhibitors", "anti_cancer",
     ["Pembrolizumab", "Nivolumab", "Atezolizumab", "Durvalumab", "Cemiplimab"]),
    ("ctla4_inhibitor", "CTLA-4 Checkpoint Inhibitors", "anti_cancer",
     ["Ipilimumab", "Tremelimumab"]),
    ("egfr_tki", "EGFR Tyrosine Kinase Inhibitors", "anti_cancer",
     ["Osimertinib", "Erlotinib", "Gefitinib", "Afatinib", "Dacomitinib"]),
    ("alk_ros1_inhibitor", "ALK/ROS1 Inhibitors", "anti_cancer",
     ["Alectinib", "Crizotinib", "Lorlatinib", "Brigatinib", "Ceritinib"]),
    ("vegf_inhibitor", "VEGF/VEGFR Inhibitors", "anti_cancer",
     ["Bevacizumab", "Ramucirumab"]),
    ("kras_g12c_inhibitor", "KRAS G12C Inhibitors", "anti_cancer",
     ["Sotorasib", "Adagrasib"]),
    ("braf_mek_inhibitor", "BRAF/MEK Inhibitors", "anti_cancer",
     ["Dabrafenib", "Trametinib"]),
    ("met_ret_inhibitor", "MET/RET Inhibitors", "anti_cancer",
     ["Capmatinib", "Tepotinib", "Selpercatinib", "Pralsetinib"]),
    ("strong_opioid", "Strong Opioids", "supportive",
     ["Morphine", "Oxycodone", "Fentanyl"]),
    ("weak_opioid", "Weak Opioids", "supportive", ["Tramadol"]),
    ("corticosteroid", "Systemic Corticosteroids", "supportive",
     ["Dexamethasone", "Prednisone", "Methylprednisolone"]),
    ("antiemetic_5ht3", "5-HT3 Antagonist Antiemetics", "supportive",
     ["Ondansetron", "Granisetron", "Palonosetron"]),
    ("nk1_antagonist", "NK1 Receptor Antagonists", "supportive",
     ["Aprepitant", "Fosaprepitant"]),
    ("dopamine_antiemetic", "Dopamine-Antagonist Antiemetics", "supportive",
     ["Prochlorperazine", "Metoclopramide"]),
    ("g_csf", "Granulocyte Colony-Stimulating Factors", "supportive",
     ["Filgrastim", "Pegfilgrastim"]),
    ("esa", "Erythropoiesis-Stimulating Agents", "supportive",
     ["Epoetin Alfa", "Darbepoetin Alfa"]),
    ("bone_modifying", "Bone-Modifying Agents", "supportive",
     ["Zoledronic Acid", "Denosumab"]),
    ("anticoagulant", "Anticoagulants", "supportive", ["Enoxaparin", "Apixaban"]),
    ("proton_pump_inhibitor", "Proton Pump Inhibitors", "supportive",
     ["Pantoprazole", "Omeprazole"]),
    ("benzodiazepine", "Benzodiazepines", "supportive", ["Lorazepam"]),
    ("laxative", "Stimulant Laxatives", "supportive", ["Senna"]),
]

CLASS_TEXT = {
    "platinum_chemo": ("forms covalent platinum-DNA adducts and intra-strand "
                       "cross-links that block replication and transcription",
                       "first-line combination chemotherapy of non-small cell and "
                       "small cell lung cancer",
                       "nephrotoxicity, ototoxicity, myelosuppression and severe "
                       "nausea and vomiting"),
    "taxane": ("stabilizes microtubule polymers and prevents their disassembly, "
               "arresting cells in mitosis",
               "treatment of advanced non-small cell lung cancer in combination "
               "regimens", "neutropenia, peripheral neuropathy, alopecia and "
               "hypersensitivity reactions"),
    "antifolate": ("inhibits thymidylate synthase and other folate-dependent "
                   "enzymes required for nucleotide synthesis",
                   "maintenance and first-line therapy of non-squamous non-small "
                   "cell lung cancer", "myelosuppression, mucositis, rash and "
                   "renal toxicity"),
    "nucleoside_analog": ("is incorporated into DNA as a fraudulent nucleotide and "
                          "inhibits ribonucleotide reductase",
                          "combination chemotherapy of advanced lung cancer",
                          "myelosuppression, flu-like symptoms and hepatic enzyme "
                          "elevation"),
    "vinca_alkaloid": ("binds tubulin and inhibits microtubule assembly during "
                       "mitosis", "adjuvant and palliative chemotherapy of "
                       "non-small cell lung cancer", "neutropenia, constipation "
                       "and peripheral neuropathy"),
    "topoisomerase_inhibitor": ("stabilizes the topoisomerase-DNA cleavage complex "
                                "and produces lethal DNA strand breaks",
                                "treatment of small cell lung cancer and "
                                "refractory disease", "myelosuppression, diarrhea "
                                "and mucositis"),
    "pd1_pdl1_inhibitor": ("blocks the programmed death receptor 1 pathway and "
                           "restores T-cell mediated antitumor immunity",
                           "immunotherapy of advanced or metastatic non-small cell "
                           "lung cancer", "immune-related adverse events including "
                           "pneumonitis, colitis, hepatitis and endocrinopathies"),
    "ctla4_inhibitor": ("blocks cytotoxic T-lymphocyte antigen 4 and enhances "
                        "T-cell priming and activation",
                        "combination immunotherapy of metastatic non-small cell "
                        "lung cancer", "immune-related colitis, dermatitis and "
                        "hypophysitis"),
    "egfr_tki": ("competitively inhibits the epidermal growth factor receptor "
                 "tyrosine kinase domain", "targeted therapy of EGFR mutated "
                 "non-small cell lung cancer", "rash, diarrhea, paronychia and "
                 "interstitial lung disease"),
    "alk_ros1_inhibitor": ("inhibits anaplastic lymphoma kinase and ROS1 fusion "
                           "kinases", "targeted therapy of ALK or ROS1 rearranged "
                           "non-small cell lung cancer", "edema, visual "
                           "disturbance, hyperlipidemia and hepatotoxicity"),
    "vegf_inhibitor": ("neutralizes vascular endothelial growth factor signaling "
                       "and inhibits tumor angiogenesis", "combination therapy of "
                       "advanced non-squamous non-small cell lung cancer",
                       "hypertension, hemorrhage, proteinuria and impaired wound "
                       "healing"),
    "kras_g12c_inhibitor": ("covalently locks KRAS G12C in its inactive "
                            "GDP-bound state", "targeted therapy of KRAS G12C "
                            "mutated non-small cell lung cancer", "diarrhea, "
                            "nausea and hepatotoxicity"),
    "braf_mek_inhibitor": ("inhibits BRAF V600E kinase or MEK1/2 in the MAPK "
                           "pathway", "targeted therapy of BRAF V600E mutated "
                           "non-small cell lung cancer", "pyrexia, rash and "
                           "cardiomyopathy"),
    "met_ret_inhibitor": ("selectively inhibits MET or RET receptor tyrosine "
                          "kinases", "targeted therapy of MET exon 14 skipping or "
                          "RET fusion positive lung cancer", "edema, hypertension "
                          "and hepatotoxicity"),
    "strong_opioid": ("acts as a full agonist at mu-opioid receptors in the "
                      "central nervous system", "management of severe cancer "
                      "related pain", "respiratory depression, sedation, "
                      "constipation and dependence"),
    "weak_opioid": ("acts as a weak mu-opioid agonist and inhibits serotonin and "
                    "norepinephrine reuptake", "management of moderate pain",
                    "dizziness, nausea, seizures and serotonin syndrome"),
    "corticosteroid": ("binds the glucocorticoid receptor and suppresses "
                       "inflammatory gene expression", "management of cerebral "
                       "edema, anorexia, dyspnea and chemotherapy induced nausea",
                       "hyperglycemia, infection, myopathy and insomnia"),
    "antiemetic_5ht3": ("selectively antagonizes serotonin 5-HT3 receptors in the "
                        "chemoreceptor trigger zone", "prevention of "
                        "chemotherapy induced nausea and vomiting",
                        "headache, constipation and QT prolongation"),
    "nk1_antagonist": ("blocks substance P at neurokinin 1 receptors",
                       "prevention of delayed chemotherapy induced nausea",
                       "fatigue, hiccups and drug interactions"),
    "dopamine_antiemetic": ("antagonizes dopamine D2 receptors in the "
                            "chemoreceptor trigger zone", "treatment of nausea "
                            "and vomiting", "extrapyramidal symptoms and "
                            "sedation"),
    "g_csf": ("stimulates proliferation and differentiation of neutrophil "
              "precursors", "prevention of febrile neutropenia during "
              "myelosuppressive chemotherapy", "bone pain, splenic rupture and "
              "leukocytosis"),
    "esa": ("stimulates erythropoiesis through the erythropoietin receptor",
            "treatment of chemotherapy induced anemia", "thromboembolism, "
            "hypertension and possible tumor progression"),
    "bone_modifying": ("inhibits osteoclast mediated bone resorption",
                       "prevention of skeletal related events from bone "
                       "metastases", "hypocalcemia, osteonecrosis of the jaw and "
                       "renal toxicity"),
    "anticoagulant": ("inhibits factor Xa and thrombin generation",
                      "treatment and prevention of cancer associated venous "
                      "thromboembolism", "bleeding and thrombocytopenia"),
    "proton_pump_inhibitor": ("irreversibly inhibits the gastric H+/K+ ATPase",
                              "gastroprotection and treatment of reflux",
                              "headache, hypomagnesemia and enteric infection"),
    "benzodiazepine": ("potentiates GABA-A receptor mediated inhibition",
                       "management of anxiety, insomnia and anticipatory nausea",
                       "sedation, respiratory depression and delirium"),
    "laxative": ("stimulates colonic motility through enteric nerve activation",
                 "prevention of opioid induced constipation",
                 "abdominal cramping and electrolyte disturbance"),
}


def drug_id(name):
    return name.lower().replace(" ", "-") + "-fixture"


def drug_records():
    for class_id, display, category, drugs in CLASSES:
        moa, indication, toxicity = CLASS_TEXT[class_id]
        for name in drugs:
            yield {
                "drug_id": drug_id(name),
                "name": name,
                "category": category,
                "description": (f"{name} is a {display.lower()} agent used in "
                                f"oncology practice. It is administered according to "
                                f"weight or fixed dosing schedules."),
                "mechanism_of_action": f"{name} {moa}.",
                "indication": f"{name} is indicated for {indication}.",
                "pharmacodynamics": (f"{name} produces dose dependent effects "
                                     f"consistent with its mechanism; exposure "
                                     f"response relationships are described in "
                                     f"product labeling."),
                "toxicity": f"Adverse effects of {name} include {toxicity}.",
            }


def write_jsonl(path, meta, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"_meta": meta}, sort_keys=True) + "\n")
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    panel = build_panel()
    write_jsonl(OUT / "genes.ann", {"kind": "genes", "version": 1,
                                    "panel_size": PANEL_SIZE},
                gene_records(panel))
    drugs = list(drug_records())
    n_anti = sum(d["category"] == "anti_cancer" for d in drugs)
    write_jsonl(OUT / "drugs.ann", {"kind": "drugs", "version": 1,
                                    "anti_cancer": n_anti,
                                    "supportive": len(drugs) - n_anti},
                drugs)
    panel_set = set(panel)
    aliases = [{"alias": a, "symbol": s} for a, s in ALIASES if s in panel_set]
    write_jsonl(OUT / "aliases.map", {"kind": "aliases", "version": 1}, aliases)
    write_jsonl(OUT / "classes.map", {"kind": "classes", "version": 1,
                                      "n_classes": len(CLASSES)},
                ({"class_id": c, "display_name": d,
                  "drugs": [drug_id(x) for x in drugs_]}
                 for c, d, _, drugs_ in CLASSES))
    print(f"panel={len(panel)} drugs={len(drugs)} ({n_anti} anti-cancer) "
          f"classes={len(CLASSES)} aliases={len(aliases)}")


if __name__ == "__main__":
    main()
