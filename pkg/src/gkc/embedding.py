"""Text embedding providers, a content-addressed vector cache, and concatenation."""
from __future__ import annotations

import enum
import hashlib
import json
import os
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Protocol

import numpy as np

from .cohort import MODALITIES, Modality
from .curation import ProviderError, ProviderTransportError
from .profiles import sha256_hex

ENV_ENDPOINT = "GKC_EMBEDDER_ENDPOINT"
ENV_API_KEY = "GKC_EMBEDDER_API_KEY"
ENV_MODEL = "GKC_EMBEDDER_MODEL"

_PUNCT = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~"


class TaskHint(str, enum.Enum):
    CLASSIFICATION = "classification"
    GENERIC = "generic"


class EmptyTextError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class EmbedderConfig:
    provider: str = "mock"
    dim: int = 256
    normalize: bool = True

    def __post_init__(self):
        if self.dim < 8:
            raise ValueError("embedding dimension must be at least 8")


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    values: np.ndarray
    source_digest: str
    provider: str
    task_hint: TaskHint = TaskHint.CLASSIFICATION

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def tokenize(text: str) -> list[str]:
    """Whitespace split, strip surrounding punctuation, case-fold, drop empties."""
    out = []
    for raw in text.split():
        tok = raw.strip(_PUNCT).casefold()
        if tok:
            out.append(tok)
    return out


def token_hash(token: str) -> int:
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(),
                          "little")


def hashed_counts(text: str, dim: int) -> np.ndarray:
    """Signed bag-of-tokens projection before normalization."""
    v = np.zeros(dim, dtype=np.float64)
    for tok in tokenize(text):
        h = token_hash(tok)
        v[h % dim] += 1.0 if (h >> 32) & 1 else -1.0
    return v


class Embedder(Protocol):
    name: str
    deterministic: bool

    def embed(self, text: str, task_hint: TaskHint) -> np.ndarray: ...


class MockEmbedder:
    """Feature-hashing embedder: 64-bit BLAKE2b per token, index and sign bits."""

    deterministic = True

    def __init__(self, dim: int = 256, normalize: bool = True):
        EmbedderConfig(dim=dim)
        self.dim = dim
        self.normalize = normalize
        self.name = f"mock-hash-{dim}{'' if normalize else '-raw'}"
        self.calls = 0

    def embed(self, text: str, task_hint: TaskHint = TaskHint.CLASSIFICATION) -> np.ndarray:
        self.calls += 1
        v = hashed_counts(text, self.dim)
        if self.normalize:
            norm = np.linalg.norm(v)
            if norm > 0:
                v = v / norm
        return v


class ExternalEmbedder:
    """HTTP JSON embedder.

    POSTs ``{"model", "text", "task_type"}`` to ``GKC_EMBEDDER_ENDPOINT`` and
    expects ``{"embedding": [floats]}``.  The first response fixes the
    dimension for the lifetime of the object.
    """

    deterministic = False

    def __init__(self, endpoint=None, api_key=None, model=None, timeout=60.0):
        self.endpoint = endpoint or os.environ.get(ENV_ENDPOINT)
        if not self.endpoint:
            raise ProviderError(f"set {ENV_ENDPOINT} to use the external embedder")
        self.api_key = api_key or os.environ.get(ENV_API_KEY)
        self.model = model or os.environ.get(ENV_MODEL, "default")
        self.timeout = timeout
        self.name = f"external:{self.model}"
        self.dim = None
        self.calls = 0

    def embed(self, text, task_hint=TaskHint.CLASSIFICATION):
        self.calls += 1
        body = json.dumps({"model": self.model, "text": text,
                           "task_type": TaskHint(task_hint).value.upper()}).encode()
        req = urllib.request.Request(self.endpoint, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        if self.api_key:
            req.add_header("Authorization", f"Bearer {self.api_key}")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
            raise ProviderTransportError(str(exc)) from exc
        v = np.asarray(payload.get("embedding"), dtype=np.float64)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ProviderError("embedding response is not a finite vector")
        if self.dim is None:
            self.dim = v.shape[0]
        elif v.shape[0] != self.dim:
            raise DimensionMismatchError(f"provider returned dim {v.shape[0]}, run uses {self.dim}")
        return v


class EmbeddingCache:
    """Vectors keyed by (text digest, provider, task hint).

    With a directory, each vector is stored as ``<key>.npy`` and listed in
    ``manifest.json``; reloading yields bitwise-identical arrays.
    """

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory is not None else None
        self._mem: dict[str, EmbeddingVector] = {}
        self._lock = threading.Lock()
        self._inflight: dict[str, threading.Event] = {}
        self._manifest: dict[str, dict] = {}
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            mpath = self.directory / "manifest.json"
            if mpath.exists():
                self._manifest = json.loads(mpath.read_text(encoding="utf-8"))

    @staticmethod
    def key(digest: str, provider: str, task_hint: TaskHint) -> str:
        return sha256_hex(f"{digest}\x1f{provider}\x1f{TaskHint(task_hint).value}")

    def get(self, key: str) -> EmbeddingVector | None:
        with self._lock:
            hit = self._mem.get(key)
            meta = self._manifest.get(key)
        if hit is None and meta is not None:
            values = np.load(self.directory / f"{key}.npy")
            hit = EmbeddingVector(values, meta["source_digest"], meta["provider"],
                                  TaskHint(meta["task_hint"]))
            with self._lock:
                self._mem[key] = hit
        return hit

    def put(self, key: str, vec: EmbeddingVector) -> None:
        with self._lock:
            self._mem[key] = vec
            if self.directory is None:
                return
            np.save(self.directory / f"{key}.npy", vec.values, allow_pickle=False)
            self._manifest[key] = {"source_digest": vec.source_digest,
                                   "provider": vec.provider,
                                   "task_hint": vec.task_hint.value,
                                   "dim": vec.dim}

    def flush(self) -> None:
        if self.directory is None:
            return
        with self._lock:
            text = json.dumps(self._manifest, sort_keys=True, indent=1) + "\n"
        (self.directory / "manifest.json").write_text(text, encoding="utf-8")

    def get_or_compute(self, key, compute):
        while True:
            hit = self.get(key)
            if hit is not None:
                return hit, True
            with self._lock:
                event = self._inflight.get(key)
                owner = event is None
                if owner:
                    event = self._inflight[key] = threading.Event()
            if not owner:
                event.wait()
                continue
            try:
                vec = compute()
                self.put(key, vec)
                return vec, False
            finally:
                with self._lock:
                    del self._inflight[key]
                event.set()

    def __len__(self):
        return len(set(self._mem) | set(self._manifest))


def embed_text(provider: Embedder, text: str,
               task_hint: TaskHint = TaskHint.CLASSIFICATION,
               cache: EmbeddingCache | None = None, attempts: int = 3,
               backoff: float = 1.0, sleep: Callable[[float], None] = time.sleep
               ) -> EmbeddingVector:
    if not text or not text.strip():
        raise EmptyTextError("cannot embed empty text")
    task_hint = TaskHint(task_hint)
    digest = sha256_hex(text)

    def compute():
        delay = backoff
        for attempt in range(1, attempts + 1):
            try:
                values = np.asarray(provider.embed(text, task_hint), dtype=np.float64)
                break
            except ProviderTransportError as exc:
                if attempt == attempts:
                    raise ProviderError(f"{provider.name}: gave up after {attempts} "
                                        f"attempts: {exc}") from exc
                sleep(delay)
                delay *= 2
        if not np.all(np.isfinite(values)):
            raise ProviderError(f"{provider.name} returned non-finite values")
        return EmbeddingVector(values, digest, provider.name, task_hint)

    if cache is None:
        return compute()
    vec, _ = cache.get_or_compute(EmbeddingCache.key(digest, provider.name, task_hint),
                                  compute)
    return vec


@dataclass(frozen=True)
class GroupSpan:
    modality: Modality
    start: int
    stop: int

    @property
    def width(self) -> int:
        return self.stop - self.start

    def slice(self) -> slice:
        return slice(self.start, self.stop)


def concat_modalities(vectors: Mapping[Modality, EmbeddingVector | None] | None = None, *,
                      lab: EmbeddingVector | None = None,
                      gene: EmbeddingVector | None = None,
                      med: EmbeddingVector | None = None
                      ) -> tuple[np.ndarray, list[GroupSpan]]:
    """Concatenate per-modality vectors in Lab, Gene, Med order.

    Absent modalities are skipped, which gives the ablation layouts.  Returns
    the joined array and the column span of each modality.
    """
    given = dict(vectors or {})
    for m, v in ((Modality.LAB, lab), (Modality.GENE, gene), (Modality.MED, med)):
        if v is not None:
            given[m] = v
    present = [(m, given[m]) for m in MODALITIES if given.get(m) is not None]
    if not present:
        raise ValueError("at least one modality vector is required")
    dims = {v.dim for _, v in present}
    providers = {v.provider for _, v in present}
    if len(dims) != 1:
        raise DimensionMismatchError(f"mixed embedding dimensions {sorted(dims)}")
    if len(providers) != 1:
        raise DimensionMismatchError(f"mixed providers {sorted(providers)}")
    spans, parts, start = [], [], 0
    for m, v in present:
        spans.append(GroupSpan(m, start, start + v.dim))
        parts.append(v.values)
        start += v.dim
    return np.concatenate(parts), spans
