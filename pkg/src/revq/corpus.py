"""Corpus ingestion: entity records, article segmentation, and the taxonomy.

Articles are plain UTF-8 text files with blank-line paragraph breaks. The
manifest is a CSV that maps each entity to its category, its feature vector,
and its article files (a full article plus an optional "simple" variant).
Everything built here is immutable after ingestion.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

CATEGORIES = (
    "amphibians",
    "birds",
    "carnivores",
    "domestic",
    "fish",
    "herbivores",
    "invertibrates",
    "mammals",
    "primates",
    "reptiles",
)

FEATURE_COUNT = 16
MAX_LEGS = 8

# Words that end with '.' but do not end a sentence.
ABBREVIATIONS = frozenset(
    {
        "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "jr.", "sr.",
        "e.g.", "i.e.", "vs.", "etc.", "fig.", "no.", "al.", "approx.", "mt.",
    }
)


class IngestError(ValueError):
    """Raised when the manifest or an article file cannot be ingested."""


class ArticleKind(str, Enum):
    FULL = "full"
    SIMPLE = "simple"


@dataclass(frozen=True)
class Passage:
    entity: str
    kind: ArticleKind
    paragraph_index: int
    text: str
    sentence_index: int | None = None


@dataclass(frozen=True)
class EntityRecord:
    name: str
    category: str
    features: tuple[bool, ...]
    legs: int
    full_article: Path
    simple_article: Path | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("entity name must be non-empty")
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if len(self.features) != FEATURE_COUNT:
            raise ValueError(f"expected {FEATURE_COUNT} features, got {len(self.features)}")

    def vector(self) -> tuple[float, ...]:
        """Feature vector used for similarity: 16 traits as 0/1 plus legs/8."""
        return tuple(float(f) for f in self.features) + (self.legs / MAX_LEGS,)


@dataclass(frozen=True)
class Taxonomy:
    records: dict[str, EntityRecord]
    categories: tuple[str, ...] = CATEGORIES

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, name: str) -> bool:
        return name in self.records

    def __getitem__(self, name: str) -> EntityRecord:
        return self.records[name]

    def names(self) -> list[str]:
        return sorted(self.records)

    def in_category(self, category: str) -> list[str]:
        return sorted(n for n, r in self.records.items() if r.category == category)


class PassageStore:
    """Immutable mapping of (entity, article kind) to its segmented passages."""

    def __init__(self, passages: Iterable[Passage]):
        by_key: dict[tuple[str, ArticleKind], list[Passage]] = {}
        for p in passages:
            by_key.setdefault((p.entity, p.kind), []).append(p)
        self._by_key = {k: tuple(v) for k, v in by_key.items()}

    def passages(self, entity: str, kind: ArticleKind) -> tuple[Passage, ...]:
        return self._by_key.get((entity, kind), ())

    def has(self, entity: str, kind: ArticleKind) -> bool:
        return (entity, kind) in self._by_key

    def all_passages(self) -> list[Passage]:
        out: list[Passage] = []
        for key in sorted(self._by_key, key=lambda k: (k[0], k[1].value)):
            out.extend(self._by_key[key])
        return out


def segment_paragraphs(article_text: str) -> list[str]:
    """Split text into paragraphs at runs of one or more blank lines."""
    parts = re.split(r"\n\s*\n", article_text)
    return [p.strip() for p in parts if p.strip()]


_SENTENCE_END = re.compile(r"[.?!]+(?=\s)")


def segment_sentences(paragraph: str) -> list[str]:
    """Split a paragraph into sentences.

    A sentence ends at '.', '?' or '!' followed by whitespace and an
    uppercase letter; a '.' that terminates a known abbreviation never
    splits.
    """
    sentences: list[str] = []
    start = 0
    for m in _SENTENCE_END.finditer(paragraph):
        rest = paragraph[m.end():].lstrip()
        if not rest or not rest[0].isupper():
            continue
        # token ending at the punctuation, e.g. "Dr." or "e.g."
        word = paragraph[start:m.end()].rsplit(None, 1)[-1].lower()
        if word in ABBREVIATIONS:
            continue
        sentence = paragraph[start:m.end()].strip()
        if sentence:
            sentences.append(sentence)
        start = m.end()
    tail = paragraph[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def entity_similarity(a: EntityRecord, b: EntityRecord) -> float:
    """Cosine similarity over the 17-dimensional feature vectors, in [0, 1]."""
    va, vb = a.vector(), b.vector()
    dot = sum(x * y for x, y in zip(va, vb))
    na = math.sqrt(sum(x * x for x in va))
    nb = math.sqrt(sum(y * y for y in vb))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return min(1.0, max(0.0, dot / (na * nb)))


_MANIFEST_FIELDS = ["name", "category", "full_article", "simple_article"] + [
    f"f{i}" for i in range(1, FEATURE_COUNT + 1)
] + ["legs"]


def _segment_article(entity: str, kind: ArticleKind, text: str, granularity: str) -> list[Passage]:
    passages: list[Passage] = []
    for pi, para in enumerate(segment_paragraphs(text)):
        if granularity == "sentence":
            for si, sent in enumerate(segment_sentences(para)):
                passages.append(Passage(entity, kind, pi, sent, sentence_index=si))
        else:
            passages.append(Passage(entity, kind, pi, para))
    return passages


def ingest_corpus(manifest_path: str | Path, granularity: str = "paragraph") -> tuple[Taxonomy, PassageStore]:
    """Load the manifest CSV and all referenced articles.

    Article paths are resolved relative to the manifest's directory. Raises
    IngestError naming the offending entity, file, or manifest line.
    """
    if granularity not in ("paragraph", "sentence"):
        raise ValueError(f"unknown granularity {granularity!r}")
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise IngestError(f"manifest not found: {manifest_path}")
    base = manifest_path.parent

    records: dict[str, EntityRecord] = {}
    passages: list[Passage] = []
    with manifest_path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _MANIFEST_FIELDS:
            raise IngestError(
                f"bad manifest header: expected {','.join(_MANIFEST_FIELDS)}"
            )
        for lineno, row in enumerate(reader, start=2):
            name = (row["name"] or "").strip().lower()
            if not name:
                raise IngestError(f"line {lineno}: empty entity name")
            if name in records:
                raise IngestError(f"line {lineno}: duplicate entity {name!r}")
            category = (row["category"] or "").strip()
            if category not in CATEGORIES:
                raise IngestError(f"line {lineno}: unknown category {category!r} for {name!r}")
            try:
                bits = [row[f"f{i}"].strip() for i in range(1, FEATURE_COUNT + 1)]
                if any(b not in ("0", "1") for b in bits):
                    raise ValueError
                features = tuple(b == "1" for b in bits)
                legs = int(row["legs"])
                if not 0 <= legs <= MAX_LEGS:
                    raise ValueError
            except (ValueError, AttributeError, KeyError):
                raise IngestError(f"line {lineno}: malformed feature row for {name!r}") from None

            full_path = base / row["full_article"].strip()
            simple_raw = (row["simple_article"] or "").strip()
            simple_path = base / simple_raw if simple_raw else None

            record = EntityRecord(name, category, features, legs, full_path, simple_path)
            records[name] = record

            for kind, path in ((ArticleKind.FULL, full_path), (ArticleKind.SIMPLE, simple_path)):
                if path is None:
                    continue
                if not path.is_file():
                    raise IngestError(f"article for entity {name!r} not found: {path}")
                segmented = _segment_article(name, kind, path.read_text(encoding="utf-8"), granularity)
                if kind is ArticleKind.FULL and not segmented:
                    raise IngestError(f"article for entity {name!r} is empty: {path}")
                passages.extend(segmented)

    if not records:
        raise IngestError(f"manifest lists no entities: {manifest_path}")
    return Taxonomy(records=records), PassageStore(passages)
