"""Annotation stores for genes and drugs, HGNC alias resolution and drug classes.

All four stores are line-delimited JSON files.  The first line of every file is
a metadata record ``{"_meta": {...}}``; each following line is one record.
Field layouts are documented in ``docs/formats.md``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

PANEL_SIZE = 271
N_DRUGS = 64
N_CLASSES = 27

DRUG_NARRATIVE_FIELDS = (
    "description",
    "mechanism_of_action",
    "indication",
    "pharmacodynamics",
    "toxicity",
)
_DRUG_FIELDS = {"drug_id", "name", "category", *DRUG_NARRATIVE_FIELDS}
_DRUG_REQUIRED = {"drug_id", "name", *DRUG_NARRATIVE_FIELDS}
_GENE_FIELDS = {
    "hgnc_symbol",
    "function_summary",
    "kegg_pathways",
    "go_biological_processes",
    "go_molecular_functions",
}
_ALIAS_FIELDS = {"alias", "symbol"}
_CLASS_FIELDS = {"class_id", "display_name", "drugs"}

FIXTURE_FILES = {
    "genes": "genes.ann",
    "drugs": "drugs.ann",
    "aliases": "aliases.map",
    "classes": "classes.map",
}


class KnowledgeError(Exception):
    pass


class ParseError(KnowledgeError):
    def __init__(self, file, line, message):
        super().__init__(f"{file}:{line}: {message}")
        self.file = str(file)
        self.line = line


class SchemaError(KnowledgeError):
    def __init__(self, file, line, message):
        super().__init__(f"{file}:{line}: {message}")
        self.file = str(file)
        self.line = line


class CardinalityError(KnowledgeError):
    pass


class AmbiguousAliasError(KnowledgeError):
    pass


class UnknownSymbolError(KnowledgeError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnknownDrugError(KnowledgeError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


@dataclass(frozen=True)
class DrugAnnotation:
    drug_id: str
    name: str
    description: str
    mechanism_of_action: str
    indication: str
    pharmacodynamics: str
    toxicity: str
    category: str = ""

    def narrative(self) -> dict[str, str]:
        return {f: getattr(self, f) for f in DRUG_NARRATIVE_FIELDS}


@dataclass(frozen=True)
class GeneAnnotation:
    hgnc_symbol: str
    function_summary: str
    kegg_pathways: tuple[str, ...] = ()
    go_biological_processes: tuple[str, ...] = ()
    go_molecular_functions: tuple[str, ...] = ()


class AliasTable:
    """Case-insensitive alias to canonical HGNC symbol map.

    Every canonical symbol resolves to itself.  An alias that would map to two
    different canonical symbols is rejected when the table is built.
    """

    def __init__(self, canonical: Iterable[str], pairs: Iterable[tuple[str, str]] = ()):
        self._canonical = frozenset(s.strip().upper() for s in canonical)
        table: dict[str, str] = {s: s for s in self._canonical}
        for alias, symbol in pairs:
            key = alias.strip().upper()
            target = symbol.strip().upper()
            if target not in self._canonical:
                raise UnknownSymbolError(f"alias {alias!r} targets unknown symbol {symbol!r}")
            prev = table.get(key)
            if prev is not None and prev != target:
                raise AmbiguousAliasError(
                    f"alias {alias!r} maps to both {prev!r} and {target!r}")
            table[key] = target
        self._table = table

    @property
    def canonical(self) -> frozenset[str]:
        return self._canonical

    def get(self, raw: str) -> str | None:
        return self._table.get(raw.strip().upper())

    def items(self):
        return sorted(self._table.items())

    def __len__(self):
        return len(self._table)

    def __contains__(self, raw):
        return self.get(raw) is not None


@dataclass(frozen=True)
class DrugClassMap:
    drug_to_class: Mapping[str, str]
    class_names: Mapping[str, str]

    @property
    def class_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.class_names))

    def members(self, class_id: str) -> tuple[str, ...]:
        return tuple(sorted(d for d, c in self.drug_to_class.items() if c == class_id))


@dataclass(frozen=True)
class KnowledgeBase:
    genes: Mapping[str, GeneAnnotation]
    drugs: Mapping[str, DrugAnnotation]
    aliases: AliasTable
    classes: DrugClassMap
    panel: frozenset[str]
    meta: Mapping[str, dict] = field(default_factory=dict)

    def gene(self, raw_symbol: str) -> GeneAnnotation:
        return self.genes[normalize_gene_symbol(raw_symbol, self.aliases)]

    def drug(self, drug_id: str) -> DrugAnnotation:
        try:
            return self.drugs[drug_id]
        except KeyError:
            raise UnknownDrugError(f"unknown drug id {drug_id!r}") from None

    def drug_class(self, drug_id: str) -> str:
        return resolve_drug_class(drug_id, self.classes)

    def canonical_dump(self) -> str:
        """Order-independent serialization, used to compare loaded stores."""
        doc = {
            "genes": {s: _gene_dict(g) for s, g in sorted(self.genes.items())},
            "drugs": {d: vars(a) for d, a in sorted(self.drugs.items())},
            "aliases": self.aliases.items(),
            "classes": {
                "names": dict(sorted(self.classes.class_names.items())),
                "map": dict(sorted(self.classes.drug_to_class.items())),
            },
            "panel": sorted(self.panel),
        }
        return json.dumps(doc, sort_keys=True)


def _gene_dict(g: GeneAnnotation) -> dict:
    return {
        "hgnc_symbol": g.hgnc_symbol,
        "function_summary": g.function_summary,
        "kegg_pathways": list(g.kegg_pathways),
        "go_biological_processes": list(g.go_biological_processes),
        "go_molecular_functions": list(g.go_molecular_functions),
    }


def normalize_gene_symbol(raw: str, aliases: AliasTable) -> str:
    """Return the canonical HGNC symbol for ``raw``.

    Exact canonical matches (after trimming and upper-casing) win; otherwise the
    alias table is consulted.
    """
    if not raw or not raw.strip():
        raise UnknownSymbolError("empty gene symbol")
    key = raw.strip().upper()
    if key in aliases.canonical:
        return key
    hit = aliases.get(key)
    if hit is None:
        raise UnknownSymbolError(f"unknown gene symbol {raw!r}")
    return hit


def resolve_drug_class(drug_id: str, classes: DrugClassMap) -> str:
    try:
        return classes.drug_to_class[drug_id]
    except KeyError:
        raise UnknownDrugError(f"unknown drug id {drug_id!r}") from None


def _read_records(path: Path):
    """Yield (line_number, record) pairs and return the metadata record."""
    meta = None
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise ParseError(path, lineno, "record is not an object")
            if "_meta" in obj:
                if meta is not None or records:
                    raise ParseError(path, lineno, "metadata record must come first")
                meta = obj["_meta"]
                continue
            records.append((lineno, obj))
    return meta or {}, records


def _check_fields(path, lineno, obj, allowed, required, strict):
    missing = required - obj.keys()
    if missing:
        raise SchemaError(path, lineno, f"missing field(s) {sorted(missing)}")
    extra = obj.keys() - allowed
    if extra and strict:
        raise SchemaError(path, lineno, f"unknown field(s) {sorted(extra)}")


def _text(path, lineno, obj, name):
    value = obj[name]
    if not isinstance(value, str):
        raise SchemaError(path, lineno, f"field {name!r} must be a string")
    return value


def _str_list(path, lineno, obj, name):
    value = obj.get(name, [])
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SchemaError(path, lineno, f"field {name!r} must be a list of strings")
    return tuple(dict.fromkeys(value))


def _load_genes(path, strict):
    meta, rows = _read_records(path)
    genes: dict[str, GeneAnnotation] = {}
    for lineno, obj in rows:
        _check_fields(path, lineno, obj, _GENE_FIELDS,
                      {"hgnc_symbol", "function_summary"}, strict)
        symbol = _text(path, lineno, obj, "hgnc_symbol").strip().upper()
        if symbol in genes:
            raise SchemaError(path, lineno, f"duplicate gene {symbol}")
        genes[symbol] = GeneAnnotation(
            hgnc_symbol=symbol,
            function_summary=_text(path, lineno, obj, "function_summary"),
            kegg_pathways=_str_list(path, lineno, obj, "kegg_pathways"),
            go_biological_processes=_str_list(path, lineno, obj, "go_biological_processes"),
            go_molecular_functions=_str_list(path, lineno, obj, "go_molecular_functions"),
        )
    return meta, genes


def _load_drugs(path, strict):
    meta, rows = _read_records(path)
    drugs: dict[str, DrugAnnotation] = {}
    for lineno, obj in rows:
        _check_fields(path, lineno, obj, _DRUG_FIELDS, _DRUG_REQUIRED, strict)
        did = _text(path, lineno, obj, "drug_id")
        if did in drugs:
            raise SchemaError(path, lineno, f"duplicate drug {did}")
        drugs[did] = DrugAnnotation(
            drug_id=did,
            name=_text(path, lineno, obj, "name"),
            category=obj.get("category", ""),
            **{f: _text(path, lineno, obj, f) for f in DRUG_NARRATIVE_FIELDS},
        )
    return meta, drugs


def _load_aliases(path, strict):
    meta, rows = _read_records(path)
    pairs = []
    for lineno, obj in rows:
        _check_fields(path, lineno, obj, _ALIAS_FIELDS, _ALIAS_FIELDS, strict)
        pairs.append((lineno, _text(path, lineno, obj, "alias"),
                      _text(path, lineno, obj, "symbol")))
    return meta, pairs


def _load_classes(path, strict):
    meta, rows = _read_records(path)
    names: dict[str, str] = {}
    drug_to_class: dict[str, str] = {}
    for lineno, obj in rows:
        _check_fields(path, lineno, obj, _CLASS_FIELDS, _CLASS_FIELDS, strict)
        cid = _text(path, lineno, obj, "class_id")
        if cid in names:
            raise SchemaError(path, lineno, f"duplicate class {cid}")
        names[cid] = _text(path, lineno, obj, "display_name")
        for did in _str_list(path, lineno, obj, "drugs"):
            if did in drug_to_class:
                raise SchemaError(path, lineno,
                                  f"drug {did} assigned to {drug_to_class[did]} and {cid}")
            drug_to_class[did] = cid
    return meta, names, drug_to_class


def default_paths() -> dict[str, Path]:
    root = resources.files("gkc") / "data"
    return {k: Path(str(root / v)) for k, v in FIXTURE_FILES.items()}


def load_knowledge_base(paths: Mapping[str, str | Path] | str | Path | None = None,
                        strict: bool = True) -> KnowledgeBase:
    """Load and validate the four annotation stores.

    Parameters
    ----------
    paths : mapping or directory, optional
        Either a mapping with keys ``genes``, ``drugs``, ``aliases`` and
        ``classes``, or a directory holding files with the default names.
        Defaults to the bundled fixtures.
    strict : bool
        Reject unknown fields and enforce the 271 / 64 / 27 cardinalities.
    """
    if paths is None:
        paths = default_paths()
    elif isinstance(paths, (str, Path)):
        paths = {k: Path(paths) / v for k, v in FIXTURE_FILES.items()}
    paths = {k: Path(v) for k, v in paths.items()}

    gene_meta, genes = _load_genes(paths["genes"], strict)
    drug_meta, drugs = _load_drugs(paths["drugs"], strict)
    alias_meta, alias_rows = _load_aliases(paths["aliases"], strict)
    class_meta, class_names, drug_to_class = _load_classes(paths["classes"], strict)

    panel = frozenset(genes)
    try:
        aliases = AliasTable(panel, [(a, s) for _, a, s in alias_rows])
    except UnknownSymbolError as exc:
        raise SchemaError(paths["aliases"], 0, str(exc)) from None

    unmapped = sorted(set(drugs) - set(drug_to_class))
    if unmapped:
        raise SchemaError(paths["classes"], 0, f"drugs without a class: {unmapped}")
    unknown = sorted(set(drug_to_class) - set(drugs))
    if unknown:
        raise SchemaError(paths["classes"], 0, f"class map names unknown drugs: {unknown}")

    if strict:
        if len(panel) != PANEL_SIZE:
            raise CardinalityError(f"gene panel has {len(panel)} symbols, expected {PANEL_SIZE}")
        if len(drugs) != N_DRUGS:
            raise CardinalityError(f"drug registry has {len(drugs)} drugs, expected {N_DRUGS}")
        if len(class_names) != N_CLASSES:
            raise CardinalityError(f"{len(class_names)} drug classes, expected {N_CLASSES}")
        declared = drug_meta.get("anti_cancer"), drug_meta.get("supportive")
        if None not in declared and sum(declared) != len(drugs):
            raise CardinalityError(f"drug metadata declares {declared}, file has {len(drugs)}")
    elif len(panel) != PANEL_SIZE:
        warnings.warn(f"gene panel has {len(panel)} symbols", stacklevel=2)

    return KnowledgeBase(
        genes=MappingProxyType(genes),
        drugs=MappingProxyType(drugs),
        aliases=aliases,
        classes=DrugClassMap(MappingProxyType(drug_to_class), MappingProxyType(class_names)),
        panel=panel,
        meta=MappingProxyType({"genes": gene_meta, "drugs": drug_meta,
                               "aliases": alias_meta, "classes": class_meta}),
    )
