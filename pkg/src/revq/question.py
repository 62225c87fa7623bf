"""Question normalization and boolean entailment scoring.

Pronoun resolution is a fixed phrase-substitution table (full coreference is
deliberately out of scope), the comparison guard flags questions that need
real-world size knowledge, and the built-in entailment scorer is a
deterministic token-overlap heuristic with negation parity. An external
classifier can replace the heuristic through the scorer provider protocol;
on any failure the heuristic answers instead.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .corpus import segment_sentences
from .retrieval import tokenize

logger = logging.getLogger(__name__)


class AnswerLabel(str, Enum):
    YES = "yes"
    NO = "no"
    PROBABLY = "probably"
    PROBABLY_NOT = "probably_not"
    IDK = "idk"


COMPARISON_WORDS = frozenset(
    {
        "smaller", "bigger", "larger", "shorter", "taller", "longer",
        "heavier", "lighter", "faster", "slower", "than",
    }
)
_CONDITIONAL_COMPARISON = ("more", "less")

NEGATION_CUES = frozenset(
    {"not", "no", "never", "none", "neither", "nor", "without", "cannot", "nt"}
)

# Phrases replaced by the entity name, longest first so "its" wins over "it".
_PRONOUN_PATTERN = re.compile(
    r"\b(your animal|this animal|the animal|your character|its|it)\b",
    re.IGNORECASE,
)
_POSSESSIVE = {"its"}


class ScorerUnavailable(RuntimeError):
    """Raised by scorer providers when the external service cannot answer."""


@dataclass(frozen=True)
class BoolVerdict:
    label: AnswerLabel
    confidence: float

    def __post_init__(self) -> None:
        if self.label not in (AnswerLabel.YES, AnswerLabel.NO):
            raise ValueError(f"verdict label must be yes or no, got {self.label}")


@dataclass(frozen=True)
class ResolvedQuestion:
    original: str
    resolved: str
    entity: str
    has_comparison: bool


ScorerProvider = Callable[[str, str], BoolVerdict]


def detect_comparison(question: str) -> bool:
    """True when the question tokens contain a bundled comparison word."""
    tokens = tokenize(question, strip_plurals=False)
    for i, tok in enumerate(tokens):
        if tok in COMPARISON_WORDS:
            return True
        if tok in _CONDITIONAL_COMPARISON and i + 1 < len(tokens) and tokens[i + 1] == "than":
            return True
    return False


def resolve_pronouns(question: str, entity: str) -> ResolvedQuestion:
    """Replace target pronoun phrases with the entity name everywhere."""
    if not question:
        raise ValueError("question must be non-empty")
    if not entity:
        raise ValueError("entity must be non-empty")

    def substitute(m: re.Match) -> str:
        if m.group(0).lower() in _POSSESSIVE:
            return entity + "'s"
        return entity

    resolved = _PRONOUN_PATTERN.sub(substitute, question)
    return ResolvedQuestion(
        original=question,
        resolved=resolved,
        entity=entity,
        has_comparison=detect_comparison(question),
    )


def score_entailment(question: ResolvedQuestion, passage_text: str) -> BoolVerdict:
    """Token-overlap heuristic with negation parity.

    Overlap is the fraction of the question's distinct content tokens (entity
    tokens removed) found in the passage. Negation cues are counted in the
    question and in every passage sentence that shares a token with the
    question; an odd count flips the answer.
    """
    entity_tokens = set(tokenize(question.entity))
    q_tokens = [t for t in tokenize(question.resolved) if t not in entity_tokens]
    q_distinct = set(q_tokens)
    if not q_distinct:
        return BoolVerdict(AnswerLabel.NO, 0.0)

    p_distinct = set(tokenize(passage_text))
    overlap = len(q_distinct & p_distinct) / len(q_distinct)

    n_neg = sum(1 for t in q_tokens if t in NEGATION_CUES)
    for sentence in segment_sentences(passage_text):
        s_tokens = tokenize(sentence)
        if q_distinct & set(s_tokens):
            n_neg += sum(1 for t in s_tokens if t in NEGATION_CUES)

    label = AnswerLabel.YES if overlap >= 0.5 and n_neg % 2 == 0 else AnswerLabel.NO
    return BoolVerdict(label, overlap)


def classify(
    question: ResolvedQuestion,
    passage_text: str,
    scorer: ScorerProvider | None = None,
    on_fallback: Callable[[str], None] | None = None,
) -> BoolVerdict:
    """External scorer verdict when configured and reachable, else heuristic."""
    if scorer is not None:
        try:
            return scorer(question.resolved, passage_text)
        except ScorerUnavailable as exc:
            logger.warning("external scorer unavailable, falling back: %s", exc)
            if on_fallback is not None:
                on_fallback(str(exc))
    return score_entailment(question, passage_text)
