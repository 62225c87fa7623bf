"""Reverse twenty questions: the machine holds a secret entity backed by
text corpora and answers free-form boolean questions."""

from .corpus import (
    ArticleKind,
    EntityRecord,
    Passage,
    PassageStore,
    Taxonomy,
    entity_similarity,
    ingest_corpus,
    segment_paragraphs,
    segment_sentences,
)
from .decision import (
    Decision,
    NegativeSampleSet,
    ScoreStats,
    TargetScores,
    compute_stats,
    decide_answer,
    draw_negative_samples,
    majority_vote,
    positive_samples,
)
from .game import GameConfig, GameEngine, GameSession, SessionState, TurnRecord
from .question import (
    AnswerLabel,
    BoolVerdict,
    ResolvedQuestion,
    classify,
    detect_comparison,
    resolve_pronouns,
    score_entailment,
)
from .retrieval import (
    InvertedIndex,
    RankedPassage,
    bm25_score,
    build_index,
    cosine,
    embed,
    hybrid_retrieve,
    retrieve_topk,
    tokenize,
)

__version__ = "0.1.0"
