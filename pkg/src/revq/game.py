"""Game sessions: the secret entity, the per-question pipeline, detour
detection over W-window answer histories, and positive-sample recovery.

A session is strictly sequential; the engine itself (taxonomy, passage
store, per-entity indexes) is immutable after construction and shared by
any number of concurrent sessions.
"""

from __future__ import annotations

import json
import math
import random
import secrets
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

from .corpus import ArticleKind, PassageStore, Taxonomy, entity_similarity, ingest_corpus
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
from .question import AnswerLabel, BoolVerdict, ResolvedQuestion, ScorerProvider, classify, resolve_pronouns
from .retrieval import InvertedIndex, RankedPassage, build_index, hybrid_retrieve


class GameError(RuntimeError):
    pass


class SessionState(str, Enum):
    OPEN = "open"
    WON = "won"
    LOST = "lost"
    EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class GameConfig:
    n1: int = 100
    n2: int = 5
    w: int = 5
    theta_a: float = 0.8
    theta_d: float = 0.5
    n_p: int = 3
    max_questions: int = 80
    seed: int | None = None
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.n2 > self.n1 or self.n1 < 1 or self.n2 < 1:
            raise ValueError("require 1 <= n2 <= n1")
        if not 0 < self.theta_a <= 1:
            raise ValueError("theta_a must be in (0, 1]")
        if not 0 <= self.theta_d <= 1:
            raise ValueError("theta_d must be in [0, 1]")
        if self.w < 1:
            raise ValueError("w must be >= 1")
        if self.n_p < 1:
            raise ValueError("n_p must be >= 1")
        if self.max_questions < 1:
            raise ValueError("max_questions must be >= 1")


CONFIG_FIELDS = {
    "n1": int, "n2": int, "w": int, "theta_a": float, "theta_d": float,
    "n_p": int, "max_questions": int, "seed": int, "k1": float, "b": float,
}


def load_game_config(path: str | Path, base: GameConfig | None = None) -> GameConfig:
    """Read ``key = value`` lines into a GameConfig; '#' starts a comment."""
    overrides = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_FIELDS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        overrides[key] = CONFIG_FIELDS[key](value)
    return replace(base or GameConfig(), **overrides)


@dataclass(frozen=True)
class TurnRecord:
    turn: int
    question: ResolvedQuestion
    answer: AnswerLabel
    rule_fired: str
    evidence: tuple[RankedPassage, ...]
    stats: ScoreStats
    target_scores: TargetScores
    verdict: BoolVerdict
    detour_reported: bool
    recovery_applied: bool
    scorer_fallback: bool = False


@dataclass
class GameSession:
    id: str
    target: str
    config: GameConfig
    negatives: NegativeSampleSet
    # per-entity history of (turn, definite label), newest last, capped at w
    history: dict[str, list[tuple[int, AnswerLabel]]]
    turn: int = 0
    transcript: list[TurnRecord] = field(default_factory=list)
    state: SessionState = SessionState.OPEN
    pending_recovery: bool = False
    last_clear_turn: int | None = None


class GameEngine:
    """Binds a corpus to the question-answering pipeline."""

    def __init__(
        self,
        taxonomy: Taxonomy,
        store: PassageStore,
        config: GameConfig | None = None,
        scorer: ScorerProvider | None = None,
    ):
        self.taxonomy = taxonomy
        self.store = store
        self.config = config or GameConfig()
        self.scorer = scorer
        self._indexes: dict[tuple[str, ArticleKind], InvertedIndex] = {}
        for name in taxonomy.names():
            for kind in (ArticleKind.FULL, ArticleKind.SIMPLE):
                passages = store.passages(name, kind)
                if passages:
                    self._indexes[(name, kind)] = build_index(
                        passages, k1=self.config.k1, b=self.config.b
                    )

    @classmethod
    def from_manifest(
        cls,
        manifest_path: str | Path,
        config: GameConfig | None = None,
        scorer: ScorerProvider | None = None,
        granularity: str = "paragraph",
    ) -> "GameEngine":
        taxonomy, store = ingest_corpus(manifest_path, granularity=granularity)
        return cls(taxonomy, store, config=config, scorer=scorer)

    def index_for(self, entity: str, kind: ArticleKind) -> InvertedIndex | None:
        return self._indexes.get((entity, kind))

    def retrieve(self, entity: str, kind: ArticleKind, text: str, n2: int | None = None) -> list[RankedPassage]:
        index = self.index_for(entity, kind)
        if index is None:
            return []
        return hybrid_retrieve(index, text, n1=self.config.n1, n2=n2 or self.config.n2)

    def top_hit(self, entity: str, kind: ArticleKind, text: str) -> RankedPassage | None:
        hits = self.retrieve(entity, kind, text, n2=1)
        return hits[0] if hits else None

    # -- session lifecycle ---------------------------------------------------

    def new_session(
        self,
        target: str = "random",
        config: GameConfig | None = None,
        seed: int | None = None,
    ) -> GameSession:
        config = config or self.config
        if seed is None:
            seed = config.seed
        rng = random.Random(seed) if seed is not None else random.Random()
        if target == "random":
            target = rng.choice(self.taxonomy.names())
        elif target not in self.taxonomy:
            raise GameError(f"unknown entity {target!r}")
        negatives = draw_negative_samples(self.taxonomy, target, rng)
        history = {name: [] for name in (target,) + negatives.entities}
        return GameSession(
            id=secrets.token_hex(16),
            target=target,
            config=config,
            negatives=negatives,
            history=history,
        )

    def answer_question(self, session: GameSession, question_text: str) -> TurnRecord:
        """Run the full pipeline for one question and update the session."""
        if session.state is not SessionState.OPEN:
            raise GameError(f"session is {session.state.value}; no more questions")
        if session.turn >= session.config.max_questions:
            raise GameError(
                f"question limit reached ({session.config.max_questions} questions)"
            )
        if not question_text or not question_text.strip():
            raise GameError("question must be non-empty")

        turn_no = session.turn + 1
        target = session.target
        rq = resolve_pronouns(question_text, target)

        full_hits = self.retrieve(target, ArticleKind.FULL, rq.resolved)
        has_simple = self.store.has(target, ArticleKind.SIMPLE)
        simple_hits = (
            self.retrieve(target, ArticleKind.SIMPLE, rq.resolved) if has_simple else []
        )
        s_full = full_hits[0].rerank_score if full_hits else 0.0
        s_simple = (simple_hits[0].rerank_score if simple_hits else 0.0) if has_simple else None
        target_scores = TargetScores(s_full or 0.0, s_simple)

        stats = compute_stats(
            rq,
            session.negatives,
            lambda entity: self.top_hit(entity, ArticleKind.FULL, rq.resolved),
        )

        fallback_seen = []
        combined = " ".join(
            hits[0].passage.text for hits in (full_hits, simple_hits) if hits
        )
        verdict = classify(rq, combined, self.scorer, on_fallback=fallback_seen.append)

        evidence = tuple(full_hits) + tuple(simple_hits)
        decision = decide_answer(
            rq, target_scores, stats, verdict, evidence=evidence, samples=session.negatives
        )

        recovery = session.pending_recovery
        if recovery:
            answer = self._recovery_answer(session, rq).label
            session.pending_recovery = False
            for buf in session.history.values():
                buf.clear()
            session.last_clear_turn = turn_no
        else:
            answer = decision.label

        self._append_history(session, turn_no, answer, rq, stats)
        detour = self.detect_detour(session, current_turn=turn_no)
        if detour:
            session.pending_recovery = True

        session.turn = turn_no
        record = TurnRecord(
            turn=turn_no,
            question=rq,
            answer=answer,
            rule_fired=decision.rule_fired,
            evidence=evidence,
            stats=stats,
            target_scores=target_scores,
            verdict=verdict,
            detour_reported=detour,
            recovery_applied=recovery,
            scorer_fallback=bool(fallback_seen),
        )
        session.transcript.append(record)
        return record

    def _recovery_answer(self, session: GameSession, rq: ResolvedQuestion) -> BoolVerdict:
        positives = positive_samples(self.taxonomy, session.target, session.config.n_p)
        verdicts = []
        for entity in positives:
            hit = self.top_hit(entity, ArticleKind.FULL, rq.resolved)
            text = hit.passage.text if hit is not None else ""
            verdicts.append(classify(rq, text, self.scorer))
        return majority_vote(verdicts)

    def _append_history(
        self,
        session: GameSession,
        turn_no: int,
        answer: AnswerLabel,
        rq: ResolvedQuestion,
        stats: ScoreStats,
    ) -> None:
        w = session.config.w
        if answer in (AnswerLabel.YES, AnswerLabel.NO):
            buf = session.history[session.target]
            buf.append((turn_no, answer))
            del buf[:-w]
        for entity in session.negatives.entities:
            hit = stats.top_hits.get(entity)
            text = hit.passage.text if hit is not None else ""
            verdict = classify(rq, text, self.scorer)
            buf = session.history[entity]
            buf.append((turn_no, verdict.label))
            del buf[:-w]

    def detect_detour(self, session: GameSession, current_turn: int | None = None) -> bool:
        """True when a dissimilar negative's recent answers track the target's.

        Requires the target's history to hold exactly w definite answers and
        a negative (similarity below theta_d) whose history covers the same
        turns and agrees on at least ceil(theta_a * w) of them. Never fires
        on the turn right after the buffers were cleared.
        """
        cfg = session.config
        if current_turn is None:
            current_turn = session.turn
        if session.last_clear_turn is not None and current_turn <= session.last_clear_turn + 1:
            return False
        target_buf = session.history[session.target]
        if len(target_buf) != cfg.w:
            return False
        target_record = self.taxonomy[session.target]
        needed = math.ceil(cfg.theta_a * cfg.w)
        for entity in session.negatives.entities:
            if entity_similarity(self.taxonomy[entity], target_record) >= cfg.theta_d:
                continue
            labels_by_turn = dict(session.history[entity])
            comparable = [t for t, _ in target_buf if t in labels_by_turn]
            if len(comparable) < cfg.w:
                continue
            agreement = sum(1 for t, label in target_buf if labels_by_turn.get(t) == label)
            if agreement >= needed:
                return True
        return False

    def end_session(self, session: GameSession, outcome: SessionState) -> tuple[TurnRecord, ...]:
        if session.state is not SessionState.OPEN:
            raise GameError(f"session already closed ({session.state.value})")
        if outcome not in (SessionState.WON, SessionState.LOST, SessionState.EXHAUSTED):
            raise GameError(f"invalid outcome {outcome!r}")
        session.state = outcome
        return tuple(session.transcript)

    def guess(self, session: GameSession, entity: str) -> bool:
        correct = entity.strip().lower() == session.target
        self.end_session(session, SessionState.WON if correct else SessionState.LOST)
        return correct


def turn_record_json(record: TurnRecord) -> dict:
    """Transcript line: one JSON object per turn."""
    doc = {
        "turn": record.turn,
        "question": record.question.original,
        "resolved": record.question.resolved,
        "answer": record.answer.value,
        "rule": record.rule_fired,
        "detour": record.detour_reported,
        "recovery": record.recovery_applied,
        "evidence": [
            {
                "entity": rp.passage.entity,
                "text": rp.passage.text,
                "sparse": rp.sparse_score,
                "rerank": rp.rerank_score,
            }
            for rp in record.evidence
        ],
    }
    if record.scorer_fallback:
        doc["scorer_fallback"] = True
    return doc


def write_transcript(session: GameSession, path: str | Path) -> None:
    lines = [json.dumps(turn_record_json(r), sort_keys=True) for r in session.transcript]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
