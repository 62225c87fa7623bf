"""Sparse-first passage retrieval.

An inverted index with Okapi BM25 picks a broad candidate set, then a
deterministic signed feature-hashing embedding reranks a much smaller one by
cosine similarity. The embedding uses a fixed 64-bit FNV-1a hash and IDF
weights from the same index, so results are reproducible bit-for-bit across
runs and platforms.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import Passage

EMBEDDING_DIM = 1024

# Bundled stopword list. Negation cues (not, no, nor, never, ...) and the
# comparison markers (than, more, less) are deliberately absent: downstream
# scoring needs to see them.
STOPWORDS = frozenset(
    """
    a about above after again all am an and any are as at be because been
    before being below between both but by can could d did do does doing down
    during each few for from further had has have having he her here hers
    herself him himself his how i if in into is it its itself just ll m me my
    myself now o of off on once only or other our ours ourselves out over own
    re s same she should so some such t that the their theirs them themselves
    then there these they this those through to too under until up ve very was
    we were what when where which while who whom why will with y you your
    yours yourself yourselves
    """.split()
)

_WORD = re.compile(r"[a-z0-9]+")
_APOSTROPHE_T = re.compile(r"['’]t\b")


def tokenize(text: str, strip_plurals: bool = True) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop stopwords.

    "n't" contractions become the token "nt" so negation survives the split.
    With strip_plurals, a trailing "es" (else "s") is removed from tokens
    longer than 3 characters.
    """
    lowered = _APOSTROPHE_T.sub(" nt", text.lower())
    tokens = [t for t in _WORD.findall(lowered) if t not in STOPWORDS]
    if not strip_plurals:
        return tokens
    out = []
    for t in tokens:
        if len(t) > 3:
            if t.endswith("es"):
                t = t[:-2]
            elif t.endswith("s"):
                t = t[:-1]
        out.append(t)
    return out


@dataclass(frozen=True)
class RankedPassage:
    passage: Passage
    sparse_score: float
    rerank_score: float | None = None


class InvertedIndex:
    """BM25 inverted index over a fixed passage collection."""

    def __init__(self, passages: Sequence[Passage] | None, k1: float = 1.2, b: float = 0.75):
        if k1 <= 0:
            raise ValueError("k1 must be positive")
        if not 0 <= b <= 1:
            raise ValueError("b must be in [0, 1]")
        self.k1 = k1
        self.b = b
        self.passages: tuple[Passage, ...] | None = tuple(passages) if passages is not None else None
        self.postings: dict[str, list[tuple[int, int]]] = {}
        self.doc_lengths: dict[int, int] = {}
        self.avgdl = 0.0
        self._vectors: dict[int, np.ndarray] = {}
        if self.passages is not None:
            if not self.passages:
                raise ValueError("cannot index an empty passage collection")
            for pid, passage in enumerate(self.passages):
                counts = Counter(tokenize(passage.text))
                self.doc_lengths[pid] = sum(counts.values())
                for term, tf in counts.items():
                    self.postings.setdefault(term, []).append((pid, tf))
            self.avgdl = sum(self.doc_lengths.values()) / len(self.doc_lengths)

    @property
    def doc_count(self) -> int:
        return len(self.doc_lengths)

    def idf(self, term: str) -> float:
        n_t = len(self.postings.get(term, ()))
        n = self.doc_count
        return math.log(1.0 + (n - n_t + 0.5) / (n_t + 0.5))

    def passage_vector(self, pid: int) -> np.ndarray:
        if pid not in self._vectors:
            assert self.passages is not None
            self._vectors[pid] = embed(self.passages[pid].text, self)
        return self._vectors[pid]

    def to_json(self) -> dict:
        return {
            "version": 1,
            "params": {"k1": self.k1, "b": self.b},
            "doc_lengths": {str(pid): n for pid, n in self.doc_lengths.items()},
            "postings": {t: [[pid, tf] for pid, tf in plist] for t, plist in self.postings.items()},
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "InvertedIndex":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("version") != 1:
            raise ValueError(f"unsupported index version {doc.get('version')!r}")
        index = cls(None, k1=float(doc["params"]["k1"]), b=float(doc["params"]["b"]))
        index.doc_lengths = {int(pid): int(n) for pid, n in doc["doc_lengths"].items()}
        if not index.doc_lengths:
            raise ValueError("index has no documents")
        index.postings = {
            t: [(int(pid), int(tf)) for pid, tf in plist] for t, plist in doc["postings"].items()
        }
        for t, plist in index.postings.items():
            for pid, tf in plist:
                if pid not in index.doc_lengths:
                    raise ValueError(f"posting for {t!r} references unknown passage {pid}")
                if tf <= 0:
                    raise ValueError(f"posting for {t!r} has non-positive frequency")
        index.avgdl = sum(index.doc_lengths.values()) / len(index.doc_lengths)
        return index


def build_index(passages: Sequence[Passage], k1: float = 1.2, b: float = 0.75) -> InvertedIndex:
    return InvertedIndex(passages, k1=k1, b=b)


def bm25_score(index: InvertedIndex, query: Sequence[str], passage_id: int) -> float:
    """Okapi BM25 score of a passage for the query's distinct terms."""
    if passage_id not in index.doc_lengths:
        raise KeyError(f"unknown passage id {passage_id}")
    dl = index.doc_lengths[passage_id]
    norm = index.k1 * (1.0 - index.b + index.b * dl / index.avgdl)
    score = 0.0
    for term in set(query):
        plist = index.postings.get(term)
        if not plist:
            continue
        tf = next((f for pid, f in plist if pid == passage_id), 0)
        if tf == 0:
            continue
        score += index.idf(term) * tf * (index.k1 + 1.0) / (tf + norm)
    return score


def _topk_ids(index: InvertedIndex, query: Sequence[str], k: int) -> list[tuple[int, float]]:
    if k <= 0:
        raise ValueError("k must be positive")
    scores: dict[int, float] = {}
    for term in set(query):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for pid, tf in plist:
            dl = index.doc_lengths[pid]
            norm = index.k1 * (1.0 - index.b + index.b * dl / index.avgdl)
            scores[pid] = scores.get(pid, 0.0) + idf * tf * (index.k1 + 1.0) / (tf + norm)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return [(pid, score) for pid, score in ranked if score > 0.0][:k]


def retrieve_topk(index: InvertedIndex, query: Sequence[str], k: int) -> list[RankedPassage]:
    """Top-k passages by BM25, ties broken by ascending passage id.

    Only passages with a positive score are returned, so the result can be
    shorter than k.
    """
    if index.passages is None:
        raise ValueError("index was loaded without passages; cannot retrieve")
    return [RankedPassage(index.passages[pid], score) for pid, score in _topk_ids(index, query, k)]


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def embed(text: str, corpus_stats: InvertedIndex) -> np.ndarray:
    """Signed feature-hashing embedding weighted by IDF, L2-normalized.

    Each token lands in bucket (FNV-1a-64 mod 1024) with sign taken from the
    hash's top bit; unseen tokens get the maximal IDF.
    """
    vec = np.zeros(EMBEDDING_DIM, dtype=np.float64)
    for token in tokenize(text):
        h = fnv1a_64(token.encode("utf-8"))
        bucket = h % EMBEDDING_DIM
        sign = -1.0 if h >> 63 else 1.0
        vec[bucket] += sign * corpus_stats.idf(token)
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


EmbeddingProvider = Callable[[str], np.ndarray]


def hybrid_retrieve(
    index: InvertedIndex,
    query_text: str,
    n1: int = 100,
    n2: int = 5,
    reranker: EmbeddingProvider | None = None,
) -> list[RankedPassage]:
    """BM25 top-n1 candidates reranked by embedding cosine down to n2.

    The result is always a subset of the BM25 candidates; ties are broken by
    sparse score, then passage id.
    """
    if n2 > n1:
        raise ValueError("n2 must not exceed n1")
    if index.passages is None:
        raise ValueError("index was loaded without passages; cannot retrieve")
    candidates = _topk_ids(index, tokenize(query_text), n1)
    if not candidates:
        return []
    if reranker is None:
        query_vec = embed(query_text, index)
        vec_of = index.passage_vector
    else:
        query_vec = np.asarray(reranker(query_text), dtype=np.float64)
        vec_of = lambda pid: np.asarray(reranker(index.passages[pid].text), dtype=np.float64)
    scored = [
        (pid, sparse, cosine(query_vec, vec_of(pid)))
        for pid, sparse in candidates
    ]
    scored.sort(key=lambda item: (-item[2], -item[1], item[0]))
    return [
        RankedPassage(index.passages[pid], sparse, rerank)
        for pid, sparse, rerank in scored[:n2]
    ]
