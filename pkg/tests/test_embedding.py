import hashlib
import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gkc.cohort import Modality
from gkc.curation import ProviderError, ProviderTransportError
from gkc.embedding import (
    DimensionMismatchError,
    EmbedderConfig,
    EmbeddingCache,
    EmbeddingVector,
    EmptyTextError,
    ExternalEmbedder,
    MockEmbedder,
    TaskHint,
    concat_modalities,
    embed_text,
    hashed_counts,
    tokenize,
)
from gkc.mock_curator import GENE_PAIR_FACTOR

words = st.text(alphabet="abcdefghij .,;:!", min_size=1, max_size=60)


def oracle_counts(text, dim):
    """Independent restatement of the hashing rule."""
    v = np.zeros(dim)
    for raw in text.split():
        tok = raw.strip(".,;:!?()[]{}\"'").casefold()
        if not tok:
            continue
        h = int.from_bytes(hashlib.blake2b(tok.encode(), digest_size=8).digest(), "little")
        v[h % dim] += 1 if (h >> 32) & 1 else -1
    return v


def test_tokenize():
    assert tokenize("KRAS, mutation. (MDM2) amplification!") == [
        "kras", "mutation", "mdm2", "amplification"]
    assert tokenize(" ... ") == []


@given(words)
def test_hashing_matches_oracle(text):
    np.testing.assert_array_equal(hashed_counts(text, 64), oracle_counts(text, 64))


def test_one_token_difference_touches_at_most_two_coordinates():
    base = "Declining albumin trend noted in the laboratory profile."
    a = hashed_counts(base + " " + "KRAS", 256)
    b = hashed_counts(base + " " + "MDM2", 256)
    assert np.count_nonzero(a != b) <= 2
    np.testing.assert_array_equal(a - b, oracle_counts("KRAS", 256) - oracle_counts("MDM2", 256))


def test_mock_deterministic_and_normalized():
    e = MockEmbedder()
    v1, v2 = e.embed(GENE_PAIR_FACTOR), e.embed(GENE_PAIR_FACTOR)
    np.testing.assert_array_equal(v1, v2)
    assert v1.shape == (256,)
    assert abs(np.linalg.norm(v1) - 1.0) <= 1e-9


@given(words.filter(lambda t: tokenize(t)))
def test_norm_property(text):
    assert abs(np.linalg.norm(MockEmbedder(32).embed(text)) - 1.0) <= 1e-9 or \
        not np.any(hashed_counts(text, 32))


def test_unnormalized_counts():
    e = MockEmbedder(64, normalize=False)
    np.testing.assert_array_equal(e.embed("a a b"), oracle_counts("a a b", 64))
    assert e.name != MockEmbedder(64).name


def test_dim_floor():
    with pytest.raises(ValueError):
        EmbedderConfig(dim=4)
    with pytest.raises(ValueError):
        MockEmbedder(7)


def test_empty_text():
    with pytest.raises(EmptyTextError):
        embed_text(MockEmbedder(), "   ")


def test_embed_text_cache_keys():
    e = MockEmbedder()
    cache = EmbeddingCache()
    a = embed_text(e, "alpha beta", TaskHint.CLASSIFICATION, cache)
    b = embed_text(e, "alpha beta", TaskHint.CLASSIFICATION, cache)
    c = embed_text(e, "alpha beta", TaskHint.GENERIC, cache)
    assert e.calls == 2 and len(cache) == 2
    assert a is b and c is not a
    assert a.provider == e.name and a.task_hint is TaskHint.CLASSIFICATION


def test_cache_roundtrip_bitwise(tmp_path):
    e = MockEmbedder()
    cache = EmbeddingCache(tmp_path)
    texts = [f"text number {i} with albumin" for i in range(5)]
    first = [embed_text(e, t, cache=cache) for t in texts]
    cache.flush()
    assert (tmp_path / "manifest.json").exists()
    again = EmbeddingCache(tmp_path)
    fresh = MockEmbedder()
    second = [embed_text(fresh, t, cache=again) for t in texts]
    assert fresh.calls == 0
    for x, y in zip(first, second):
        assert x.values.tobytes() == y.values.tobytes()
        assert x.source_digest == y.source_digest


def test_cache_concurrent_single_call():
    class Slow(MockEmbedder):
        def embed(self, text, task_hint=TaskHint.CLASSIFICATION):
            threading.Event().wait(0.05)
            return super().embed(text, task_hint)

    e = Slow()
    cache = EmbeddingCache()
    threads = [threading.Thread(target=embed_text, args=(e, "same text"),
                                kwargs={"cache": cache}) for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert e.calls == 1


def test_retry_then_give_up():
    class Flaky(MockEmbedder):
        fail = 2

        def embed(self, text, task_hint=TaskHint.CLASSIFICATION):
            self.calls += 1
            if self.calls <= self.fail:
                raise ProviderTransportError("timeout")
            return hashed_counts(text, self.dim)

    waits = []
    e = Flaky()
    embed_text(e, "x y", sleep=waits.append)
    assert waits == [1.0, 2.0]
    e = Flaky()
    e.fail = 9
    with pytest.raises(ProviderError):
        embed_text(e, "x y", sleep=waits.append)


def _vec(values, provider="p"):
    return EmbeddingVector(np.asarray(values, dtype=float), "d", provider)


def test_concat_full_and_spans():
    e = MockEmbedder()
    vs = {m: _vec(e.embed(m.name)) for m in Modality}
    x, spans = concat_modalities(vs)
    assert x.shape == (768,)
    assert [(s.modality, s.start, s.stop) for s in spans] == [
        (Modality.LAB, 0, 256), (Modality.GENE, 256, 512), (Modality.MED, 512, 768)]
    np.testing.assert_array_equal(x[spans[1].slice()], vs[Modality.GENE].values)


def test_concat_zero_gene_and_subset():
    x, spans = concat_modalities(lab=_vec(np.ones(8)), gene=_vec(np.zeros(8)), med=_vec(np.ones(8)))
    assert not x[8:16].any()
    x, spans = concat_modalities(gene=_vec(np.ones(8)))
    assert x.shape == (8,) and len(spans) == 1 and spans[0].modality is Modality.GENE


def test_concat_mismatch():
    with pytest.raises(DimensionMismatchError):
        concat_modalities(lab=_vec(np.ones(8)), gene=_vec(np.ones(16)))
    with pytest.raises(DimensionMismatchError):
        concat_modalities(lab=_vec(np.ones(8), "a"), gene=_vec(np.ones(8), "b"))


def test_external_embedder_fixes_dimension(monkeypatch):
    import io
    import json
    import urllib.request

    dims = iter([4, 4, 5])

    class Resp(io.BytesIO):
        def __enter__(self):
            return self

        def __exit__(self, *a):
            return False

    def fake(req, timeout):
        body = json.loads(req.data)
        assert body["task_type"] == "CLASSIFICATION"
        return Resp(json.dumps({"embedding": [0.5] * next(dims)}).encode())

    monkeypatch.setattr(urllib.request, "urlopen", fake)
    e = ExternalEmbedder("http://x", model="m")
    assert e.embed("a").shape == (4,)
    e.embed("b")
    assert e.dim == 4
    with pytest.raises(DimensionMismatchError):
        e.embed("c")
