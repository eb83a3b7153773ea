"""Episode records shared by the simulator, advantage pipeline, and metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TurnRecord:
    """One agent turn and the simulator's reaction to it.

    ``intent`` is the customer intent the agent observed when choosing the
    action (the initial intent for turn 0). ``features`` is the policy
    input built from that same observation.
    """

    t: int
    intent: str
    features: np.ndarray
    action: str
    agent_tokens: tuple[str, ...]
    log_prob: float
    rep_intra: float
    rep_inter: float
    repetition: float
    similarity: float
    r_len: float
    gate_valid: bool
    r_turn: float
    user_tokens: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "intent": self.intent,
            "features": [float(v) for v in self.features],
            "action": self.action,
            "agent_tokens": list(self.agent_tokens),
            "log_prob": self.log_prob,
            "rep_intra": self.rep_intra,
            "rep_inter": self.rep_inter,
            "repetition": self.repetition,
            "similarity": self.similarity,
            "r_len": self.r_len,
            "gate_valid": self.gate_valid,
            "r_turn": self.r_turn,
            "user_tokens": list(self.user_tokens),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TurnRecord":
        return cls(
            t=int(d["t"]),
            intent=str(d["intent"]),
            features=np.asarray(d["features"], dtype=np.float64),
            action=str(d["action"]),
            agent_tokens=tuple(d["agent_tokens"]),
            log_prob=float(d["log_prob"]),
            rep_intra=float(d["rep_intra"]),
            rep_inter=float(d["rep_inter"]),
            repetition=float(d["repetition"]),
            similarity=float(d["similarity"]),
            r_len=float(d["r_len"]),
            gate_valid=bool(d["gate_valid"]),
            r_turn=float(d["r_turn"]),
            user_tokens=tuple(d["user_tokens"]),
        )


@dataclass(frozen=True)
class Trajectory:
    """A complete episode: per-turn records plus session-level outcomes."""

    persona_id: int
    seed: int
    turns: tuple[TurnRecord, ...]
    converted: bool
    violation_score: float
    session_reward: float
    terminal: bool
    schema_version: int = field(default=SCHEMA_VERSION)

    def __post_init__(self):
        if len(self.turns) == 0:
            raise ValidationError("a trajectory needs at least one turn")

    @property
    def turn_count(self) -> int:
        return len(self.turns)

    def turn_rewards(self) -> np.ndarray:
        return np.array([tr.r_turn for tr in self.turns], dtype=np.float64)

    def session_stream(self) -> np.ndarray:
        """Session reward as a per-turn stream: zero everywhere except the
        final turn, which carries the whole session reward."""
        out = np.zeros(len(self.turns), dtype=np.float64)
        out[-1] = self.session_reward
        return out

    def feature_matrix(self) -> np.ndarray:
        return np.stack([tr.features for tr in self.turns]).astype(np.float64)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "persona_id": self.persona_id,
            "seed": self.seed,
            "converted": self.converted,
            "violation_score": self.violation_score,
            "session_reward": self.session_reward,
            "terminal": self.terminal,
            "turns": [tr.to_dict() for tr in self.turns],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(
            schema_version=int(d["schema_version"]),
            persona_id=int(d["persona_id"]),
            seed=int(d["seed"]),
            converted=bool(d["converted"]),
            violation_score=float(d["violation_score"]),
            session_reward=float(d["session_reward"]),
            terminal=bool(d["terminal"]),
            turns=tuple(TurnRecord.from_dict(td) for td in d["turns"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Trajectory":
        return cls.from_dict(json.loads(text))


def write_jsonl(path, trajectories) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for traj in trajectories:
            fh.write(traj.to_json())
            fh.write("\n")


def read_jsonl(path) -> list[Trajectory]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(Trajectory.from_json(line))
    return out
