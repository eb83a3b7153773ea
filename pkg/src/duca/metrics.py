"""Evaluation metrics computed from trajectories alone."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EmptyInput
from .rewards import compliance_score

# attitude order from worst to best; terminal markers never appear as a
# turn's observed intent
ATTITUDE_RANK = {
    "annoyed": 0,
    "objecting": 1,
    "neutral": 2,
    "interested": 3,
    "ready_to_buy": 4,
}


@dataclass(frozen=True)
class MetricsReport:
    episodes: int
    cvr: float
    compliance: float
    avg_turns: float
    mean_turn_reward: float
    mean_session_reward: float
    intra_repetition: float
    inter_repetition: float
    repeat_action_rate: float
    filler_rate: float
    over_promise_rate: float
    positive_transfer_rate: float

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "cvr": self.cvr,
            "compliance": self.compliance,
            "avg_turns": self.avg_turns,
            "mean_turn_reward": self.mean_turn_reward,
            "mean_session_reward": self.mean_session_reward,
            "intra_repetition": self.intra_repetition,
            "inter_repetition": self.inter_repetition,
            "repeat_action_rate": self.repeat_action_rate,
            "filler_rate": self.filler_rate,
            "over_promise_rate": self.over_promise_rate,
            "positive_transfer_rate": self.positive_transfer_rate,
        }


def conversion_rate(trajectories) -> float:
    trajectories = _require(trajectories)
    return sum(1.0 for t in trajectories if t.converted) / len(trajectories)


def mean_compliance(trajectories) -> float:
    trajectories = _require(trajectories)
    mean_violation = sum(t.violation_score for t in trajectories) / len(trajectories)
    return compliance_score(mean_violation)


def repeat_action_rate(trajectories) -> float:
    """Fraction of adjacent turn pairs that repeat the same action kind.

    Episodes with a single turn contribute no pairs; with no pairs at all
    the rate is 0.0.
    """
    trajectories = _require(trajectories)
    pairs = 0
    repeats = 0
    for traj in trajectories:
        kinds = [tr.action for tr in traj.turns]
        for a, b in zip(kinds, kinds[1:]):
            pairs += 1
            if a == b:
                repeats += 1
    return repeats / pairs if pairs else 0.0


def positive_transfer_rate(trajectories) -> float:
    """Fraction of episodes whose last observed attitude outranks the first."""
    trajectories = _require(trajectories)
    hits = 0
    for traj in trajectories:
        first = ATTITUDE_RANK[traj.turns[0].intent]
        last = ATTITUDE_RANK[traj.turns[-1].intent]
        if last > first:
            hits += 1
    return hits / len(trajectories)


def _require(trajectories) -> list:
    trajectories = list(trajectories)
    if not trajectories:
        raise EmptyInput("metrics need at least one trajectory")
    return trajectories


def _turn_fraction(trajectories, action_name: str) -> float:
    turns = 0
    hits = 0
    for traj in trajectories:
        for tr in traj.turns:
            turns += 1
            if tr.action == action_name:
                hits += 1
    return hits / turns if turns else 0.0


def compute_report(trajectories) -> MetricsReport:
    trajectories = _require(trajectories)
    n = len(trajectories)
    total_turns = sum(t.turn_count for t in trajectories)
    turn_rewards = [tr.r_turn for t in trajectories for tr in t.turns]
    intra = [tr.rep_intra for t in trajectories for tr in t.turns]
    inter = [tr.rep_inter for t in trajectories for tr in t.turns]
    return MetricsReport(
        episodes=n,
        cvr=conversion_rate(trajectories),
        compliance=mean_compliance(trajectories),
        avg_turns=total_turns / n,
        mean_turn_reward=sum(turn_rewards) / len(turn_rewards),
        mean_session_reward=sum(t.session_reward for t in trajectories) / n,
        intra_repetition=sum(intra) / len(intra),
        inter_repetition=sum(inter) / len(inter),
        repeat_action_rate=repeat_action_rate(trajectories),
        filler_rate=_turn_fraction(trajectories, "filler"),
        over_promise_rate=_turn_fraction(trajectories, "over_promise"),
        positive_transfer_rate=positive_transfer_rate(trajectories),
    )
