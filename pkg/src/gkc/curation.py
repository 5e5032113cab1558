"""Curator stage: prompts, provider calls, report validation and caching."""
from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
import urllib.error
import urllib.request
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Protocol

from .cohort import Modality
from .profiles import ModalityProfile, sha256_hex

REQUIRED_KEYS = (
    "summary",
    "key_domains",
    "therapeutic_implications",
    "key_positive_factors",
    "key_negative_factors",
)
# gene reports may use the tumor-board spelling instead of the skeleton
GENE_KEYS = ("prognostic_summary", "key_prognostic_domains",
             "key_positive_factors", "key_negative_factors")
GENE_DOMAIN_KEYS = ("oncogenic_driver_pathways_activated",
                    "tumor_suppressor_pathways_inactivated",
                    "therapeutic_implications")

PROFILE_START = "=== PROFILE START ==="
PROFILE_END = "=== PROFILE END ==="

ENV_ENDPOINT = "GKC_CURATOR_ENDPOINT"
ENV_API_KEY = "GKC_CURATOR_API_KEY"
ENV_MODEL = "GKC_CURATOR_MODEL"


class CurationError(Exception):
    pass


class TemplateError(CurationError):
    pass


class ModalityMismatchError(CurationError):
    pass


class ProviderError(CurationError):
    pass


class ProviderTransportError(ProviderError):
    """Retryable failure talking to a provider."""


class SchemaViolation(CurationError):
    def __init__(self, paths):
        self.paths = list(paths)
        super().__init__("report schema violation: " + "; ".join(self.paths))


class NonDeterminismWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    modality: Modality
    persona: str
    task_guidance: str
    output_schema_description: str
    version: str

    def __post_init__(self):
        if not self.persona.strip():
            raise TemplateError(f"{self.modality.name} template has an empty persona")
        if not self.version.strip():
            raise TemplateError(f"{self.modality.name} template has no version")
        missing = [k for k in REQUIRED_KEYS if k not in self.output_schema_description]
        if missing:
            raise TemplateError(f"schema description does not name {missing}")


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.0
    top_k: int = 1
    max_output_tokens: int = 1024

    def canonical(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def load_templates(path: str | Path | None = None) -> dict[Modality, PromptTemplate]:
    if path is None:
        text = (resources.files("gkc") / "data" / "templates.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    doc = json.loads(text)
    return {Modality.parse(k): PromptTemplate(modality=Modality.parse(k), **v)
            for k, v in doc.items()}


def build_prompt(profile: ModalityProfile, tpl: PromptTemplate) -> str:
    """Assemble persona, task guidance, schema instructions and the profile."""
    if tpl.modality != profile.modality:
        raise ModalityMismatchError(
            f"template for {tpl.modality.name} used with a {profile.modality.name} profile")
    return "\n".join([
        tpl.persona,
        tpl.task_guidance,
        "Summarize only the profile provided below. Do not add facts from outside "
        "knowledge or external sources; every statement must be grounded in the "
        "profile text.",
        "Respond with a single JSON object and no other text.",
        tpl.output_schema_description,
        f"MODALITY: {tpl.modality.name}",
        PROFILE_START,
        profile.text,
        PROFILE_END,
    ])


@dataclass(frozen=True)
class CuratorReport:
    modality: Modality
    summary: str
    key_domains: Mapping[str, tuple[str, ...]]
    therapeutic_implications: tuple[str, ...]
    key_positive_factors: tuple[str, ...]
    key_negative_factors: tuple[str, ...]
    raw_json: str = ""

    def to_dict(self) -> dict:
        return {
            "modality": self.modality.name.lower(),
            "summary": self.summary,
            "key_domains": {k: list(v) for k, v in self.key_domains.items()},
            "therapeutic_implications": list(self.therapeutic_implications),
            "key_positive_factors": list(self.key_positive_factors),
            "key_negative_factors": list(self.key_negative_factors),
            "raw_json": self.raw_json,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CuratorReport":
        return cls(
            modality=Modality.parse(d["modality"]),
            summary=d["summary"],
            key_domains={k: tuple(v) for k, v in d["key_domains"].items()},
            therapeutic_implications=tuple(d["therapeutic_implications"]),
            key_positive_factors=tuple(d["key_positive_factors"]),
            key_negative_factors=tuple(d["key_negative_factors"]),
            raw_json=d.get("raw_json", ""),
        )


def _str_list(doc, key, path, problems):
    if key not in doc:
        problems.append(f"{path}.{key}: missing")
        return ()
    value = doc[key]
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        problems.append(f"{path}.{key}: expected list of strings")
        return ()
    return tuple(value)


def _summary(doc, key, problems):
    if key not in doc:
        problems.append(f"$.{key}: missing")
        return ""
    value = doc[key]
    if not isinstance(value, str):
        problems.append(f"$.{key}: expected string")
        return ""
    if not value.strip():
        problems.append(f"$.{key}: must be nonempty")
    return value


def _extra(doc, allowed, path, problems, strict):
    if strict:
        for k in sorted(set(doc) - set(allowed)):
            problems.append(f"{path}.{k}: unexpected field")


def _validate_skeleton(doc, strict, problems):
    summary = _summary(doc, "summary", problems)
    domains = {}
    if "key_domains" not in doc:
        problems.append("$.key_domains: missing")
    elif not isinstance(doc["key_domains"], dict):
        problems.append("$.key_domains: expected object")
    else:
        for name in doc["key_domains"]:
            domains[name] = _str_list(doc["key_domains"], name, "$.key_domains", problems)
    lists = {k: _str_list(doc, k, "$", problems) for k in REQUIRED_KEYS[2:]}
    _extra(doc, REQUIRED_KEYS, "$", problems, strict)
    return summary, domains, lists


def _validate_gene_variant(doc, strict, problems):
    summary = _summary(doc, "prognostic_summary", problems)
    domains, implications = {}, ()
    if "key_prognostic_domains" not in doc:
        problems.append("$.key_prognostic_domains: missing")
    elif not isinstance(doc["key_prognostic_domains"], dict):
        problems.append("$.key_prognostic_domains: expected object")
    else:
        kpd = doc["key_prognostic_domains"]
        for name in GENE_DOMAIN_KEYS:
            values = _str_list(kpd, name, "$.key_prognostic_domains", problems)
            if name == "therapeutic_implications":
                implications = values
            else:
                domains[name] = values
        _extra(kpd, GENE_DOMAIN_KEYS, "$.key_prognostic_domains", problems, strict)
        if not strict:
            for name in kpd:
                if name not in GENE_DOMAIN_KEYS:
                    domains[name] = _str_list(kpd, name, "$.key_prognostic_domains", problems)
    lists = {
        "therapeutic_implications": implications,
        "key_positive_factors": _str_list(doc, "key_positive_factors", "$", problems),
        "key_negative_factors": _str_list(doc, "key_negative_factors", "$", problems),
    }
    _extra(doc, GENE_KEYS, "$", problems, strict)
    return summary, domains, lists


def validate_report(raw: str, modality, strict: bool = False) -> CuratorReport:
    """Parse and check a curator response.

    Accepts the five-field skeleton for every modality.  Gene responses may
    instead use the ``prognostic_summary`` / ``key_prognostic_domains`` layout,
    which is mapped onto the skeleton.  In strict mode unknown fields are
    violations; otherwise they are ignored.

    Raises
    ------
    SchemaViolation
        Carries one ``$.path: problem`` string per defect.
    """
    modality = Modality.parse(modality)
    try:
        doc = json.loads(raw)
    except (json.JSONDecodeError, TypeError) as exc:
        raise SchemaViolation([f"$: invalid JSON ({exc})"]) from None
    if not isinstance(doc, dict):
        raise SchemaViolation(["$: expected object"])
    problems: list[str] = []
    gene_variant = modality is Modality.GENE and (
        "prognostic_summary" in doc or "key_prognostic_domains" in doc)
    if gene_variant:
        summary, domains, lists = _validate_gene_variant(doc, strict, problems)
    else:
        summary, domains, lists = _validate_skeleton(doc, strict, problems)
    if problems:
        raise SchemaViolation(problems)
    return CuratorReport(modality=modality, summary=summary, key_domains=domains,
                         raw_json=raw, **lists)


def _join(items) -> str:
    return "; ".join(items) if items else "none"


def render_report_text(r: CuratorReport) -> str:
    """Canonical flat text of a report; this is what gets embedded."""
    lines = [f"SUMMARY: {r.summary.strip()}"]
    if r.key_domains:
        lines.append("KEY DOMAINS:")
        for name in sorted(r.key_domains):
            lines.append(f"- {name.replace('_', ' ')}: {_join(r.key_domains[name])}")
    else:
        lines.append("KEY DOMAINS: none")
    lines.append(f"THERAPEUTIC IMPLICATIONS: {_join(r.therapeutic_implications)}")
    lines.append(f"KEY POSITIVE FACTORS: {_join(r.key_positive_factors)}")
    lines.append(f"KEY NEGATIVE FACTORS: {_join(r.key_negative_factors)}")
    return "\n".join(lines)


_FENCE = re.compile(r"^\s*```[A-Za-z0-9_-]*\s*\n?|\n?\s*```\s*$")


def repair_output(raw: str) -> str:
    """Strip code fences and any prose around the outermost JSON object."""
    text = _FENCE.sub("", raw.strip())
    start, end = text.find("{"), text.rfind("}")
    if start == -1 or end < start:
        return text
    return text[start:end + 1]


# -- providers ---------------------------------------------------------------

class CuratorProvider(Protocol):
    name: str
    deterministic: bool

    def complete(self, prompt: str, params: DecodingParams) -> str: ...


class ExternalCurator:
    """HTTP JSON provider configured through environment variables.

    ``GKC_CURATOR_ENDPOINT`` receives a POST of
    ``{"model", "prompt", "temperature", "top_k", "max_output_tokens"}`` and
    must answer ``{"text": "..."}``.  ``GKC_CURATOR_API_KEY`` is sent as a
    bearer token when set.
    """

    deterministic = False

    def __init__(self, endpoint: str | None = None, api_key: str | None = None,
                 model: str | None = None, timeout: float = 60.0):
        self.endpoint = endpoint or os.environ.get(ENV_ENDPOINT)
        if not self.endpoint:
            raise ProviderError(f"set {ENV_ENDPOINT} to use the external curator")
        self.api_key = api_key or os.environ.get(ENV_API_KEY)
        self.model = model or os.environ.get(ENV_MODEL, "default")
        self.timeout = timeout
        self.name = f"external:{self.model}"
        self.calls = 0

    def complete(self, prompt: str, params: DecodingParams) -> str:
        self.calls += 1
        body = json.dumps({"model": self.model, "prompt": prompt, **asdict(params)}).encode()
        req = urllib.request.Request(self.endpoint, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        if self.api_key:
            req.add_header("Authorization", f"Bearer {self.api_key}")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
            raise ProviderTransportError(str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise ProviderError(f"provider returned non-JSON envelope: {exc}") from exc
        if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
            raise ProviderError("provider envelope lacks a 'text' field")
        return payload["text"]


# -- cache -------------------------------------------------------------------

def cache_key(prompt: str, provider_name: str, params: DecodingParams, version: str) -> str:
    h = hashlib.sha256()
    for part in (prompt, provider_name, params.canonical(), version):
        h.update(part.encode("utf-8"))
        h.update(b"\x1f")
    return h.hexdigest()


class ReportCache:
    """Content-addressed report store, optionally persisted to a directory.

    Concurrent requests for one key collapse into a single computation; the
    first caller computes and the rest wait for its result.
    """

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._mem: dict[str, dict] = {}
        self._lock = threading.Lock()
        self._inflight: dict[str, threading.Event] = {}

    def _path(self, key):
        return self.directory / f"{key}.json"

    def get(self, key: str) -> dict | None:
        with self._lock:
            entry = self._mem.get(key)
        if entry is None and self.directory is not None and self._path(key).exists():
            entry = json.loads(self._path(key).read_text(encoding="utf-8"))
            with self._lock:
                self._mem[key] = entry
        return entry

    def put(self, key: str, entry: dict) -> None:
        with self._lock:
            self._mem[key] = entry
        if self.directory is not None:
            tmp = self._path(key).with_suffix(".tmp")
            tmp.write_text(json.dumps(entry, sort_keys=True, indent=1) + "\n", encoding="utf-8")
            os.replace(tmp, self._path(key))

    def get_or_compute(self, key: str, compute: Callable[[], dict]) -> tuple[dict, bool]:
        """Return ``(entry, hit)``; ``compute`` runs at most once per key."""
        while True:
            entry = self.get(key)
            if entry is not None:
                return entry, True
            with self._lock:
                event = self._inflight.get(key)
                if event is None:
                    event = threading.Event()
                    self._inflight[key] = event
                    owner = True
                else:
                    owner = False
            if not owner:
                event.wait()
                continue
            try:
                entry = compute()
                self.put(key, entry)
                return entry, False
            finally:
                with self._lock:
                    del self._inflight[key]
                event.set()

    def __len__(self):
        n = len(self._mem)
        if self.directory is not None:
            n = max(n, sum(1 for _ in self.directory.glob("*.json")))
        return n


def _call_with_retry(provider, prompt, params, attempts, backoff, sleep):
    delay = backoff
    for attempt in range(1, attempts + 1):
        try:
            return provider.complete(prompt, params)
        except ProviderTransportError as exc:
            if attempt == attempts:
                raise ProviderError(f"{provider.name}: gave up after {attempts} attempts: "
                                    f"{exc}") from exc
            sleep(delay)
            delay *= 2


def _parse_with_repair(raw, modality, strict):
    try:
        return validate_report(raw, modality, strict=strict)
    except SchemaViolation:
        repaired = repair_output(raw)
        if repaired == raw:
            raise
        return validate_report(repaired, modality, strict=strict)


def curate(provider: CuratorProvider, profile: ModalityProfile, tpl: PromptTemplate,
           params: DecodingParams | None = None, cache: ReportCache | None = None,
           strict: bool = False, attempts: int = 3, backoff: float = 1.0,
           sleep: Callable[[float], None] = time.sleep, verify: bool = False
           ) -> CuratorReport:
    """Summarize one profile into a validated report, using the cache.

    With ``verify=True`` a cached entry is re-requested from a provider that
    declares itself deterministic, and a differing response raises a
    :class:`NonDeterminismWarning`.
    """
    params = params or DecodingParams()
    prompt = build_prompt(profile, tpl)
    key = cache_key(prompt, provider.name, params, tpl.version)
    cache = cache if cache is not None else ReportCache()

    def compute():
        raw = _call_with_retry(provider, prompt, params, attempts, backoff, sleep)
        report = _parse_with_repair(raw, profile.modality, strict)
        return {"key": key, "prompt_digest": sha256_hex(prompt), "raw_output": raw,
                "report": report.to_dict()}

    entry, hit = cache.get_or_compute(key, compute)
    if hit and verify and getattr(provider, "deterministic", False):
        raw = _call_with_retry(provider, prompt, params, attempts, backoff, sleep)
        if sha256_hex(raw) != sha256_hex(entry["raw_output"]):
            warnings.warn(f"{provider.name} returned a different response for cached key "
                          f"{key[:12]}", NonDeterminismWarning, stacklevel=2)
    return CuratorReport.from_dict(entry["report"])


@dataclass
class ReportStore:
    reports: dict[tuple[str, Modality], CuratorReport] = field(default_factory=dict)

    def __getitem__(self, key):
        pid, m = key
        return self.reports[(pid, Modality.parse(m))]

    def __contains__(self, key):
        pid, m = key
        return (pid, Modality.parse(m)) in self.reports

    def __len__(self):
        return len(self.reports)

    def text(self, patient_id: str, modality: Modality) -> str:
        return render_report_text(self[(patient_id, modality)])


def curate_corpus(provider: CuratorProvider, corpus: Mapping,
                  templates: Mapping[Modality, PromptTemplate] | None = None,
                  params: DecodingParams | None = None, cache: ReportCache | None = None,
                  strict: bool = False, max_in_flight: int = 4) -> ReportStore:
    """Curate every profile in ``corpus`` with at most ``max_in_flight`` calls."""
    templates = templates or load_templates()
    cache = cache if cache is not None else ReportCache()
    items = sorted(corpus.items(), key=lambda kv: (kv[0][0], kv[0][1]))

    def one(item):
        (pid, m), prof = item
        return (pid, m), curate(provider, prof, templates[m], params, cache, strict)

    store = ReportStore()
    if max_in_flight <= 1:
        results = map(one, items)
    else:
        pool = ThreadPoolExecutor(max_workers=max_in_flight)
        results = pool.map(one, items)
    for key, report in results:
        store.reports[key] = report
    if max_in_flight > 1:
        pool.shutdown()
    return store
