"""Turn-level and session-level reward functions.

The turn reward scores an utterance's length against a target band, but
only pays out when a quality gate passes. The gate fails when the turn is
BOTH highly repetitive (vs itself or the recent agent turns) AND close to
a canned script line, in which case a flat penalty is returned instead.

The session reward scores the whole episode: a conversion bonus minus a
violation penalty (each over-promising turn adds one unit of violation).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, sqrt

from .errors import (
    EmptyLibrary,
    EmptyUtterance,
    NonTerminalTrajectory,
    ValidationError,
)

VIOLATION_UNIT = 1.0
COMPLIANCE_BASE = 100.0
INTER_WINDOW = 3


@dataclass(frozen=True)
class TurnRewardParams:
    delta1: float = 0.4
    delta2: float = 0.85
    l_target: int = 30
    sigma_len: float = 10.0
    r_penalty: float = -2.0

    def __post_init__(self):
        if not 0.0 <= self.delta1 <= 1.0:
            raise ValidationError(f"delta1 must be in [0, 1], got {self.delta1}")
        if not 0.0 <= self.delta2 <= 1.0:
            raise ValidationError(f"delta2 must be in [0, 1], got {self.delta2}")
        if self.l_target < 1:
            raise ValidationError(f"l_target must be >= 1, got {self.l_target}")
        if not self.sigma_len > 0.0:
            raise ValidationError(f"sigma_len must be > 0, got {self.sigma_len}")


@dataclass(frozen=True)
class SessionRewardParams:
    alpha: float = 5.0
    beta: float = 1.0

    def __post_init__(self):
        if self.alpha < 0.0:
            raise ValidationError(f"alpha must be >= 0, got {self.alpha}")
        if self.beta < 0.0:
            raise ValidationError(f"beta must be >= 0, got {self.beta}")


@dataclass(frozen=True)
class TurnRewardBreakdown:
    rep_intra: float
    rep_inter: float
    repetition: float
    similarity: float
    r_len: float
    gate_valid: bool
    r_turn: float


def tokenize(text: str) -> tuple[str, ...]:
    """Lowercased whitespace tokens."""
    return tuple(text.lower().split())


def length_reward(n_tokens: int, params: TurnRewardParams) -> float:
    d = float(n_tokens - params.l_target)
    return exp(-(d * d) / (2.0 * params.sigma_len * params.sigma_len))


def intra_repetition(tokens) -> float:
    """1 - distinct/total over the utterance's own tokens."""
    if len(tokens) == 0:
        raise EmptyUtterance("cannot score an utterance with no tokens")
    return 1.0 - len(set(tokens)) / len(tokens)


def inter_repetition(tokens, previous_agent_turns) -> float:
    """Max Jaccard overlap of token sets vs the given previous agent turns.

    Callers pass at most the last INTER_WINDOW turns; an empty history
    scores 0.0.
    """
    if len(tokens) == 0:
        raise EmptyUtterance("cannot score an utterance with no tokens")
    cur = set(tokens)
    best = 0.0
    for prev in previous_agent_turns:
        prev_set = set(prev)
        union = cur | prev_set
        if not union:
            continue
        j = len(cur & prev_set) / len(union)
        if j > best:
            best = j
    return best


def _count_vector(tokens) -> dict[str, int]:
    counts: dict[str, int] = {}
    for tok in tokens:
        counts[tok] = counts.get(tok, 0) + 1
    return counts


def _cosine(counts_a: dict[str, int], counts_b: dict[str, int]) -> float:
    dot = 0
    for tok, ca in counts_a.items():
        cb = counts_b.get(tok)
        if cb is not None:
            dot += ca * cb
    if dot == 0:
        return 0.0
    na = sqrt(sum(c * c for c in counts_a.values()))
    nb = sqrt(sum(c * c for c in counts_b.values()))
    return dot / (na * nb)


def script_similarity(tokens, library) -> float:
    """Max cosine similarity of token-count vectors vs each library line."""
    if len(library) == 0:
        raise EmptyLibrary("script library has no lines")
    if len(tokens) == 0:
        raise EmptyUtterance("cannot score an utterance with no tokens")
    cur = _count_vector(tokens)
    best = 0.0
    for line in library:
        sim = _cosine(cur, _count_vector(line))
        if sim > best:
            best = sim
    return best


def turn_reward(tokens, previous_agent_turns, library,
                params: TurnRewardParams) -> TurnRewardBreakdown:
    """Score one agent turn.

    previous_agent_turns: agent token tuples from earlier turns of the same
    episode, oldest first; only the last INTER_WINDOW entries are compared.
    """
    window = list(previous_agent_turns)[-INTER_WINDOW:]
    intra = intra_repetition(tokens)
    inter = inter_repetition(tokens, window)
    rep = intra if intra > inter else inter
    sim = script_similarity(tokens, library)
    r_len = length_reward(len(tokens), params)
    gate_valid = (rep <= params.delta1) or (sim <= params.delta2)
    r = r_len if gate_valid else params.r_penalty
    return TurnRewardBreakdown(
        rep_intra=intra,
        rep_inter=inter,
        repetition=rep,
        similarity=sim,
        r_len=r_len,
        gate_valid=gate_valid,
        r_turn=r,
    )


def session_reward_values(converted: bool, violation_score: float,
                          params: SessionRewardParams) -> float:
    return params.alpha * (1.0 if converted else 0.0) - params.beta * violation_score


def session_reward(trajectory, params: SessionRewardParams) -> float:
    """Session reward of a finished episode; raises on unfinished ones."""
    if not trajectory.terminal:
        raise NonTerminalTrajectory(
            "session reward is only defined for terminal trajectories"
        )
    return session_reward_values(trajectory.converted,
                                 trajectory.violation_score, params)


def violation_score_of(action_kinds, over_promise_name: str = "over_promise") -> float:
    """Violation score for an episode: one unit per over-promising turn."""
    return VIOLATION_UNIT * sum(1 for kind in action_kinds
                                if kind == over_promise_name)


def compliance_score(violation_score: float) -> float:
    return COMPLIANCE_BASE - violation_score
