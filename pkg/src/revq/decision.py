"""Five-valued answer decisions from retrieval scores and boolean verdicts.

A fixed negative-sample set (one entity per taxonomy category) calibrates
whether the target's best passage actually answers the question. The ordered
rule table:

  R1  comparison question               -> idk
  R2  avg target score < mean - std     -> idk   (no mention in the corpus)
  R3  best target score >= best - std   -> the boolean verdict verbatim
  R4a otherwise, if score > mean        -> probably / probably_not
  R4b otherwise                         -> idk
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import Taxonomy, entity_similarity
from .question import AnswerLabel, BoolVerdict, ResolvedQuestion
from .retrieval import RankedPassage


class DecisionError(ValueError):
    pass


@dataclass(frozen=True)
class NegativeSampleSet:
    target: str
    by_category: dict[str, str]

    @property
    def entities(self) -> tuple[str, ...]:
        return tuple(self.by_category[c] for c in sorted(self.by_category))


@dataclass(frozen=True)
class ScoreStats:
    per_entity_top: dict[str, float]
    mean: float
    std: float
    best: float
    # top passage per entity, kept so the game can classify each negative
    top_hits: dict[str, RankedPassage | None]


@dataclass(frozen=True)
class TargetScores:
    full: float
    simple: float | None = None

    @property
    def best(self) -> float:
        return self.full if self.simple is None else max(self.full, self.simple)

    @property
    def average(self) -> float:
        return self.full if self.simple is None else (self.full + self.simple) / 2.0


@dataclass(frozen=True)
class Decision:
    label: AnswerLabel
    rule_fired: str
    evidence: tuple[RankedPassage, ...]
    verdict: BoolVerdict | None


def draw_negative_samples(
    taxonomy: Taxonomy, target: str, seed: int | random.Random | None
) -> NegativeSampleSet:
    """One random non-target entity per category, deterministic given seed.

    The target's own category is skipped when the target is its only member;
    any other category without an eligible entity is an error.
    """
    if target not in taxonomy:
        raise DecisionError(f"unknown target entity {target!r}")
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    target_category = taxonomy[target].category
    by_category: dict[str, str] = {}
    for category in taxonomy.categories:
        eligible = [n for n in taxonomy.in_category(category) if n != target]
        if not eligible:
            if category == target_category:
                continue
            raise DecisionError(f"category {category!r} has no eligible entity")
        by_category[category] = rng.choice(eligible)
    return NegativeSampleSet(target=target, by_category=by_category)


def compute_stats(
    question: ResolvedQuestion,
    samples: NegativeSampleSet,
    top_hit: Callable[[str], RankedPassage | None],
) -> ScoreStats:
    """Top rerank score per negative entity plus mean/std/best.

    ``top_hit`` retrieves the best passage for the question from one entity's
    full-article index; entities with no match contribute a score of 0. The
    standard deviation uses the population form (divisor n).
    """
    per_entity_top: dict[str, float] = {}
    top_hits: dict[str, RankedPassage | None] = {}
    for entity in samples.entities:
        hit = top_hit(entity)
        top_hits[entity] = hit
        score = hit.rerank_score if hit is not None and hit.rerank_score is not None else 0.0
        per_entity_top[entity] = score
    values = list(per_entity_top.values())
    mean = sum(values) / len(values)
    std = math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))
    return ScoreStats(per_entity_top, mean, std, max(values), top_hits)


def decide_answer(
    question: ResolvedQuestion,
    target_scores: TargetScores,
    stats: ScoreStats,
    verdict: BoolVerdict,
    evidence: Sequence[RankedPassage] = (),
    samples: NegativeSampleSet | None = None,
) -> Decision:
    """Apply the R1..R4b rule table in order."""
    if samples is not None and set(stats.per_entity_top) != set(samples.entities):
        raise DecisionError("stats were computed over a different negative sample set")
    evidence = tuple(evidence)

    if question.has_comparison:
        return Decision(AnswerLabel.IDK, "R1", evidence, verdict)
    if target_scores.average < stats.mean - stats.std:
        return Decision(AnswerLabel.IDK, "R2", evidence, verdict)
    s = target_scores.best
    if s >= stats.best - stats.std:
        return Decision(verdict.label, "R3", evidence, verdict)
    if s > stats.mean:
        label = AnswerLabel.PROBABLY if verdict.label is AnswerLabel.YES else AnswerLabel.PROBABLY_NOT
        return Decision(label, "R4a", evidence, verdict)
    return Decision(AnswerLabel.IDK, "R4b", evidence, verdict)


def positive_samples(taxonomy: Taxonomy, target: str, n_p: int) -> list[str]:
    """The n_p entities most similar to the target, ties by name."""
    if n_p <= 0:
        raise DecisionError("n_p must be positive")
    if n_p >= len(taxonomy):
        raise DecisionError(f"n_p={n_p} must be smaller than the taxonomy ({len(taxonomy)} entities)")
    target_record = taxonomy[target]
    others = [n for n in taxonomy.names() if n != target]
    others.sort(key=lambda n: (-entity_similarity(taxonomy[n], target_record), n))
    return others[:n_p]


def majority_vote(verdicts: Sequence[BoolVerdict]) -> BoolVerdict:
    """Majority label; an exact tie resolves to yes."""
    if not verdicts:
        raise DecisionError("cannot vote over an empty verdict list")
    yes = [v for v in verdicts if v.label is AnswerLabel.YES]
    no = [v for v in verdicts if v.label is AnswerLabel.NO]
    winners = yes if len(yes) >= len(no) else no
    confidence = sum(v.confidence for v in winners) / len(winners)
    return BoolVerdict(winners[0].label, confidence)
