"""A simulated questioner, a random baseline answerer, self-play, and the
evaluation metrics.

The questioner is a Bayesian information-gain player over the taxonomy's
boolean feature table: it asks the unasked feature question with the highest
expected entropy reduction, updates its distribution with a fixed likelihood
table, and guesses once some entity exceeds 80% probability (or the question
budget runs out).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .corpus import Taxonomy
from .question import AnswerLabel

MAX_TURNS = 80
GUESS_THRESHOLD = 0.8
GUESS_LIST_SIZE = 10
GUESS_LIST_MIN_P = 0.01

# Question template per boolean feature, index-aligned with the manifest's
# f1..f16 columns.
FEATURE_PHRASES = (
    "covered in hair or fur",
    "covered in feathers",
    "known to lay eggs",
    "able to produce milk for its young",
    "able to fly",
    "mostly found in rivers, lakes, or the sea",
    "a hunter that preys on other creatures",
    "social and living in groups",
    "a vertebrate with a backbone",
    "breathing air with lungs",
    "venomous",
    "equipped with fins",
    "equipped with a tail",
    "commonly kept by people",
    "considered a large animal",
    "known for a spotted or striped coat",
)

# P(answer | feature holds for the entity), and its complement column.
DEFAULT_LIKELIHOODS: dict[AnswerLabel, tuple[float, float]] = {
    AnswerLabel.YES: (0.9, 0.1),
    AnswerLabel.NO: (0.1, 0.9),
    AnswerLabel.PROBABLY: (0.65, 0.35),
    AnswerLabel.PROBABLY_NOT: (0.35, 0.65),
    AnswerLabel.IDK: (0.5, 0.5),
}


@dataclass(frozen=True)
class GuessDistribution:
    probabilities: dict[str, float]

    @property
    def guess_list(self) -> list[tuple[str, float]]:
        """Top entities by probability, cut at 10 entries and p >= 0.01."""
        ranked = sorted(self.probabilities.items(), key=lambda kv: (-kv[1], kv[0]))
        return [(name, p) for name, p in ranked[:GUESS_LIST_SIZE] if p >= GUESS_LIST_MIN_P]

    def top(self) -> tuple[str, float]:
        return min(self.probabilities.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass(frozen=True)
class QuestionerState:
    distribution: GuessDistribution
    asked: frozenset[int] = frozenset()
    turn: int = 0
    likelihoods: dict[AnswerLabel, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_LIKELIHOODS)
    )
    lam: float = 0.02
    anomaly: bool = False


def initial_state(taxonomy: Taxonomy, lam: float = 0.02) -> QuestionerState:
    names = taxonomy.names()
    uniform = {n: 1.0 / len(names) for n in names}
    return QuestionerState(GuessDistribution(uniform), lam=lam)


def _entropy(probs: Sequence[float]) -> float:
    return -sum(p * math.log(p) for p in probs if p > 0.0)


def next_question(state: QuestionerState, taxonomy: Taxonomy) -> tuple[int, str]:
    """Unasked feature with maximal expected entropy reduction."""
    unasked = [i for i in range(len(FEATURE_PHRASES)) if i not in state.asked]
    if not unasked:
        raise ValueError("all features asked; the questioner must guess instead")
    probs = state.distribution.probabilities
    l_yes_true, l_yes_false = state.likelihoods[AnswerLabel.YES]
    prior_h = _entropy(list(probs.values()))

    best_gain, best_feature = -1.0, unasked[0]
    for fid in unasked:
        p_yes = sum(
            p * (l_yes_true if taxonomy[name].features[fid] else l_yes_false)
            for name, p in probs.items()
        )
        expected_h = 0.0
        for answer_mass, label in ((p_yes, AnswerLabel.YES), (1.0 - p_yes, AnswerLabel.NO)):
            if answer_mass <= 0.0:
                continue
            lt, lf = state.likelihoods[label]
            posterior = [
                p * (lt if taxonomy[name].features[fid] else lf) for name, p in probs.items()
            ]
            total = sum(posterior)
            if total > 0.0:
                expected_h += answer_mass * _entropy([q / total for q in posterior])
        gain = prior_h - expected_h
        if gain > best_gain + 1e-12:
            best_gain, best_feature = gain, fid
    return best_feature, f"Is your animal {FEATURE_PHRASES[best_feature]}?"


def update(
    state: QuestionerState, feature_id: int, answer: AnswerLabel, taxonomy: Taxonomy
) -> QuestionerState:
    """Bayes update with the likelihood table, then the recency mix."""
    lt, lf = state.likelihoods[answer]
    probs = state.distribution.probabilities
    posterior = {
        name: p * (lt if taxonomy[name].features[feature_id] else lf)
        for name, p in probs.items()
    }
    total = sum(posterior.values())
    anomaly = state.anomaly
    if total <= 0.0:
        posterior = {name: 1.0 / len(probs) for name in probs}
        anomaly = True
    else:
        posterior = {name: p / total for name, p in posterior.items()}
    if state.lam > 0.0:
        uniform = 1.0 / len(posterior)
        posterior = {
            name: (1.0 - state.lam) * p + state.lam * uniform for name, p in posterior.items()
        }
    return replace(
        state,
        distribution=GuessDistribution(posterior),
        asked=state.asked | {feature_id},
        turn=state.turn + 1,
        anomaly=anomaly,
    )


def should_guess(state: QuestionerState) -> str | None:
    name, p = state.distribution.top()
    if p > GUESS_THRESHOLD or state.turn >= MAX_TURNS:
        return name
    return None


def random_answerer(rng: random.Random) -> AnswerLabel:
    """The random baseline: definite answers at 0.425 each, the rest at 0.05."""
    return rng.choices(
        (AnswerLabel.YES, AnswerLabel.NO, AnswerLabel.PROBABLY,
         AnswerLabel.PROBABLY_NOT, AnswerLabel.IDK),
        weights=(0.425, 0.425, 0.05, 0.05, 0.05),
    )[0]


@dataclass(frozen=True)
class MetricsReport:
    best_guess_probability: float
    detour_recovery_times: tuple[int, ...]
    mean_recovery: float
    convergence_rate: float
    won: bool
    turns: int

    def to_dict(self) -> dict:
        return {
            "best_guess_probability": self.best_guess_probability,
            "detour_recovery_times": list(self.detour_recovery_times),
            "mean_recovery": self.mean_recovery,
            "convergence_rate": self.convergence_rate,
            "won": self.won,
            "turns": self.turns,
        }


@dataclass(frozen=True)
class SimTurn:
    turn: int
    feature_id: int
    question: str
    answer: AnswerLabel
    guess_list: list[tuple[str, float]]


# An answerer maps (feature id, question text) to one of the five labels.
Answerer = Callable[[int, str], AnswerLabel]


def oracle_answerer(taxonomy: Taxonomy, target: str) -> Answerer:
    record = taxonomy[target]
    return lambda fid, _text: AnswerLabel.YES if record.features[fid] else AnswerLabel.NO


def simulate_game(
    answerer: Answerer,
    target: str,
    taxonomy: Taxonomy,
    lam: float = 0.02,
) -> tuple[list[SimTurn], str, MetricsReport]:
    """Play one full game; returns the turn log, the guess, and metrics."""
    state = initial_state(taxonomy, lam=lam)
    trace: list[GuessDistribution] = []
    turns: list[SimTurn] = []
    guess: str | None = None
    while state.turn < MAX_TURNS:
        if len(state.asked) == len(FEATURE_PHRASES):
            break
        fid, text = next_question(state, taxonomy)
        answer = answerer(fid, text)
        state = update(state, fid, answer, taxonomy)
        trace.append(state.distribution)
        turns.append(SimTurn(state.turn, fid, text, answer, state.distribution.guess_list))
        guess = should_guess(state)
        if guess is not None:
            break
    if guess is None:
        guess = state.distribution.top()[0]
    metrics = compute_metrics(trace, target)
    return turns, guess, replace(metrics, won=guess == target, turns=state.turn)


def compute_metrics(trace: Sequence[GuessDistribution], target: str) -> MetricsReport:
    """Best guess probability, detour recovery times, and convergence rate."""
    present: list[bool] = []
    probs: list[float] = []
    for dist in trace:
        in_list = any(name == target for name, _ in dist.guess_list)
        present.append(in_list)
        probs.append(dist.probabilities.get(target, 0.0))

    best = max((p for p, here in zip(probs, present) if here), default=0.0)

    recoveries: list[int] = []
    gap = 0
    seen_presence = False
    for here in present:
        if here:
            if seen_presence and gap > 0:
                recoveries.append(gap)
            gap = 0
            seen_presence = True
        elif seen_presence:
            gap += 1
    mean_recovery = sum(recoveries) / len(recoveries) if recoveries else 0.0

    convergence = 0.0
    if present and present[-1]:
        start = len(present) - 1
        while start > 0 and present[start - 1]:
            start -= 1
        span = len(present) - 1 - start
        if span > 0:
            convergence = (probs[-1] - probs[start]) / span

    return MetricsReport(
        best_guess_probability=best,
        detour_recovery_times=tuple(recoveries),
        mean_recovery=mean_recovery,
        convergence_rate=convergence,
        won=False,
        turns=len(trace),
    )
