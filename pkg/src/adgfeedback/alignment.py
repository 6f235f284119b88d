"""Aligning justification cues to graph nodes by text similarity.

The default provider needs no trained model or service: character n-gram
profiles with cosine similarity, which is robust for Japanese (no word
boundaries required) and for short English cues alike. A remote embedding
service can be swapped in through the same provider protocol.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol

from .graph import Adg, AdgNode, NodeKind


class AlignmentError(Exception):
    def __init__(self, code: str, message: str, *, subject: str = ""):
        super().__init__(message)
        self.code = code
        self.subject = subject


class NoCandidatesError(AlignmentError):
    def __init__(self, message: str, *, subject: str = ""):
        super().__init__("no-candidates", message, subject=subject)


class ProviderUnavailableError(AlignmentError):
    def __init__(self, message: str, *, subject: str = ""):
        super().__init__("provider-unavailable", message, subject=subject)


def normalize_text(text: str) -> str:
    """NFKC fold, lowercase, collapse whitespace runs to single spaces."""
    folded = unicodedata.normalize("NFKC", text).lower()
    return re.sub(r"\s+", " ", folded).strip()


def ngram_profile(text: str, n: int = 3) -> dict[str, int]:
    """Character n-gram counts over the normalized text.

    Texts shorter than n characters contribute their whole normalized form
    as a single gram so that short cues still produce a nonzero profile.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    norm = normalize_text(text)
    if not norm:
        return {}
    if len(norm) < n:
        return {norm: 1}
    counts: Counter[str] = Counter(norm[i:i + n] for i in range(len(norm) - n + 1))
    return dict(counts)


def cosine(a: dict[str, int | float], b: dict[str, int | float]) -> float:
    """Cosine similarity of two sparse count vectors; 0.0 if either is empty."""
    if not a or not b:
        return 0.0
    if a == b:
        return 1.0
    if len(b) < len(a):
        a, b = b, a
    dot = sum(v * b[k] for k, v in a.items() if k in b)
    if dot == 0.0:
        return 0.0
    # One square root of the product, not a product of square roots: integer
    # count vectors then divide exactly, and rounding cannot push an exact
    # match past 1 (the clamp keeps the contract for float weights).
    norm_sq = sum(v * v for v in a.values()) * sum(v * v for v in b.values())
    return min(dot / math.sqrt(norm_sq), 1.0)


class SimilarityProvider(Protocol):
    """Scores a cue against a batch of candidate texts.

    Returns one score per candidate, each a float in [0, 1] for the bundled
    providers (remote embeddings may return [-1, 1]; ranking is what matters).
    """

    def score(self, cue: str, candidates: list[str]) -> list[float]: ...


@dataclass
class CharNgramProvider:
    n: int = 3
    kind = "char_ngram"

    def score(self, cue: str, candidates: list[str]) -> list[float]:
        cue_profile = ngram_profile(cue, self.n)
        return [cosine(cue_profile, ngram_profile(c, self.n)) for c in candidates]


def _tokenize(text: str) -> list[str]:
    norm = normalize_text(text)
    # Words for scripts with spaces; single CJK characters otherwise.
    return re.findall(r"[a-z0-9]+|[぀-ヿ一-鿿]", norm)


@dataclass
class TokenTfidfProvider:
    """Token-level tf-idf cosine; idf fitted on the candidate batch itself.

    Candidate-local idf keeps the provider stateless across calls: every
    score() call is self-contained, so results never depend on earlier cues.
    """

    kind = "token_tfidf"

    def score(self, cue: str, candidates: list[str]) -> list[float]:
        docs = [_tokenize(c) for c in candidates]
        cue_tokens = _tokenize(cue)
        n_docs = len(docs) + 1
        df: Counter[str] = Counter()
        for tokens in docs:
            df.update(set(tokens))
        df.update(set(cue_tokens))

        def weigh(tokens: list[str]) -> dict[str, float]:
            tf = Counter(tokens)
            return {t: c * (1.0 + math.log(n_docs / df[t])) for t, c in tf.items()}

        cue_vec = weigh(cue_tokens)
        return [cosine(cue_vec, weigh(tokens)) for tokens in docs]


Transport = Callable[[str, dict], dict]


def _default_transport(url: str, payload: dict) -> dict:
    import urllib.error
    import urllib.request

    body = json.dumps(payload).encode("utf-8")
    request = urllib.request.Request(url, data=body,
                                     headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(request, timeout=30.0) as response:
            return json.loads(response.read().decode("utf-8"))
    except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
        raise ProviderUnavailableError(f"embedding service at {url} failed: {exc}") from exc


def _unit(vector: list[float]) -> list[float]:
    norm = math.sqrt(sum(v * v for v in vector))
    if norm == 0.0:
        return list(vector)
    return [v / norm for v in vector]


@dataclass
class RemoteEmbeddingProvider:
    """Similarity via an external embedding service with a local JSONL cache.

    The request is POST {"model": ..., "texts": [...]} and the reply
    {"vectors": [[...], ...]}, one vector per text, in order. Vectors are
    unit-normalized on receipt so scores are plain dot products. The cache
    is append-only JSONL keyed by (model, sha256 of text); cached texts are
    never re-sent, so a fully cached batch makes no network calls at all.
    """

    url: str
    model: str
    cache_path: str | Path | None = None
    transport: Transport = field(default=_default_transport)
    calls: int = 0
    texts_sent: int = 0
    _cache: dict[str, list[float]] = field(default_factory=dict)
    kind = "remote_embedding"

    def __post_init__(self) -> None:
        if self.cache_path is not None:
            path = Path(self.cache_path)
            if path.exists():
                with path.open(encoding="utf-8") as handle:
                    for line in handle:
                        line = line.strip()
                        if not line:
                            continue
                        entry = json.loads(line)
                        self._cache[entry["key"]] = entry["vector"]

    def _key(self, text: str) -> str:
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return f"{self.model}:{digest}"

    def embed(self, texts: list[str]) -> list[list[float]]:
        missing = [t for t in dict.fromkeys(texts) if self._key(t) not in self._cache]
        if missing:
            reply = self.transport(self.url, {"model": self.model, "texts": missing})
            vectors = reply.get("vectors")
            if not isinstance(vectors, list) or len(vectors) != len(missing):
                raise ProviderUnavailableError(
                    f"embedding service returned {0 if vectors is None else len(vectors)} "
                    f"vectors for {len(missing)} texts")
            self.calls += 1
            self.texts_sent += len(missing)
            new_entries = []
            for text, vector in zip(missing, vectors):
                key = self._key(text)
                self._cache[key] = _unit([float(v) for v in vector])
                new_entries.append({"key": key, "vector": self._cache[key]})
            if self.cache_path is not None:
                with Path(self.cache_path).open("a", encoding="utf-8") as handle:
                    for entry in new_entries:
                        handle.write(json.dumps(entry) + "\n")
        return [self._cache[self._key(t)] for t in texts]

    def score(self, cue: str, candidates: list[str]) -> list[float]:
        vectors = self.embed([cue] + candidates)
        cue_vec = vectors[0]
        return [sum(a * b for a, b in zip(cue_vec, cand)) for cand in vectors[1:]]


def embed_remote(provider: RemoteEmbeddingProvider, texts: list[str]) -> list[list[float]]:
    return provider.embed(texts)


DEFAULT_THRESHOLD = 0.15
DEFAULT_CANDIDATE_KINDS = frozenset({NodeKind.SENTENCE, NodeKind.CHUNK})


@dataclass(frozen=True)
class AlignConfig:
    threshold: float = DEFAULT_THRESHOLD
    candidate_kinds: frozenset[NodeKind] = DEFAULT_CANDIDATE_KINDS


@dataclass(frozen=True)
class AlignmentResult:
    """Best-matching node for a cue plus how decisive the match was.

    margin is best minus runner-up similarity (0.0 with a single candidate)
    and aligned is False when the best similarity fell below the config
    threshold; node_id is still reported so callers can inspect near misses.
    response_id and criterion_id are echo fields the caller may stamp.
    """

    node_id: str
    similarity: float
    margin: float
    aligned: bool
    runner_up_node_id: str | None = None
    provider_kind: str = ""
    response_id: str = ""
    criterion_id: str = ""
    scores: tuple[tuple[str, float], ...] = ()


def candidate_nodes(adg: Adg, config: AlignConfig = AlignConfig()) -> list[AdgNode]:
    return [n for n in adg.nodes if n.kind in config.candidate_kinds]


def align_cue(cue: str, adg: Adg, provider: SimilarityProvider | None = None,
              config: AlignConfig = AlignConfig(), *, response_id: str = "",
              criterion_id: str = "") -> AlignmentResult:
    """Pick the graph node the cue most resembles.

    Ties on similarity go to the smallest node id so results are stable
    across node orderings. Raises NoCandidatesError when the graph has no
    nodes of any eligible kind.
    """
    if provider is None:
        provider = CharNgramProvider()
    candidates = candidate_nodes(adg, config)
    if not candidates:
        kinds = ", ".join(sorted(k.value for k in config.candidate_kinds))
        raise NoCandidatesError(f"graph {adg.id!r} has no nodes of kind {kinds}", subject=adg.id)
    scores = provider.score(cue, [n.text for n in candidates])
    if len(scores) != len(candidates):
        raise AlignmentError("provider-contract",
                             f"provider returned {len(scores)} scores for {len(candidates)} candidates")
    ranked = sorted(zip(candidates, scores), key=lambda pair: (-pair[1], pair[0].id))
    best_node, best_score = ranked[0]
    margin = best_score - ranked[1][1] if len(ranked) > 1 else 0.0
    return AlignmentResult(
        node_id=best_node.id,
        similarity=best_score,
        margin=margin,
        aligned=best_score >= config.threshold,
        runner_up_node_id=ranked[1][0].id if len(ranked) > 1 else None,
        provider_kind=getattr(provider, "kind", type(provider).__name__),
        response_id=response_id,
        criterion_id=criterion_id,
        scores=tuple((n.id, s) for n, s in ranked),
    )
