"""Persona-conditioned scripted dialogue simulator.

One episode is a sequence of agent turns. Each turn the agent picks an
action kind, the kind is realized as a token utterance, and the simulated
customer reacts: a terminal check first (conversion attempt, or a hangup),
then an intent transition drawn from the bundled tables, then a scripted
reply. Episodes end by conversion, hangup, or the turn cap.

Randomness contract: every episode owns a numpy Generator seeded with the
episode seed (PCG64). Draws happen in a fixed order per turn: the action
sample (stochastic rollouts only), the utterance realization draws, the
terminal-check draw, the intent-transition draw (non-terminal steps), and
the reply realization draw. Identical (persona, seed, policy) triples give
identical trajectories; greedy rollouts skip the action-sample draw.

Structural rules the tables must respect:
- a sale happens only on a close attempt while the customer is ready, with
  acceptance = clamp(base_acceptance - discount_relief * price_sensitivity
  * (1 - discount_offered), 0, 1);
- closing on an annoyed customer usually ends the call;
- repeat-script and filler turns get extra annoyance for skeptical
  personas (their annoyed mass is scaled up);
- from annoyed, only address_objection may lead toward ready_to_buy;
- busy personas may hang up late in the call regardless of the action.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

try:
    import tomllib as _toml
except ImportError:
    import tomli as _toml

from . import utterances
from .config import ExperimentConfig
from .errors import (
    EmptyLibrary,
    ParseError,
    StepAfterTerminal,
    UnknownKey,
    ValidationError,
)
from .rewards import (
    SessionRewardParams,
    TurnRewardParams,
    session_reward_values,
    turn_reward,
    violation_score_of,
)
from .trajectory import Trajectory, TurnRecord


class ActionKind(IntEnum):
    GREET = 0
    PITCH_FEATURE = 1
    ADDRESS_OBJECTION = 2
    OFFER_DISCOUNT = 3
    ASK_CLOSE = 4
    REPEAT_SCRIPT = 5
    FILLER = 6
    OVER_PROMISE = 7


ACTION_NAMES = tuple(kind.name.lower() for kind in ActionKind)
ACTION_COUNT = len(ActionKind)


class Intent(IntEnum):
    NEUTRAL = 0
    INTERESTED = 1
    OBJECTING = 2
    ANNOYED = 3
    READY_TO_BUY = 4
    TERMINATED = 5


LIVE_INTENTS = (
    Intent.NEUTRAL,
    Intent.INTERESTED,
    Intent.OBJECTING,
    Intent.ANNOYED,
    Intent.READY_TO_BUY,
)
LIVE_INTENT_NAMES = tuple(i.name.lower() for i in LIVE_INTENTS)

# feature layout: action counts (8), last-action one-hot (8),
# persona scalars (4), progress (1)
FEATURE_DIM = 2 * ACTION_COUNT + 4 + 1

_IRRITATING = (ActionKind.REPEAT_SCRIPT, ActionKind.FILLER)


@dataclass(frozen=True)
class Persona:
    id: int
    name: str
    price_sensitivity: float
    skepticism: float
    busy: bool
    base_acceptance: float

    def __post_init__(self):
        for field_name in ("price_sensitivity", "skepticism", "base_acceptance"):
            v = getattr(self, field_name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(
                    f"persona {self.name!r}: {field_name} must be in [0, 1], got {v}"
                )


@dataclass(frozen=True)
class Dynamics:
    discount_relief: float = 0.5
    close_annoyed_hangup: float = 0.8
    annoyed_hangup: float = 0.25
    busy_hangup: float = 0.15
    busy_hangup_turn: int = 6
    irritation_gain: float = 1.5
    annoyed_cap: float = 0.9
    hangup_cap: float = 0.95
    # closing on a merely interested customer converts at this fraction of
    # the ready-to-buy acceptance
    interest_close_factor: float = 0.35

    def __post_init__(self):
        for field_name in ("close_annoyed_hangup", "annoyed_hangup",
                           "busy_hangup", "annoyed_cap", "hangup_cap",
                           "interest_close_factor"):
            v = getattr(self, field_name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(
                    f"dynamics.{field_name} must be in [0, 1], got {v}"
                )
        if self.discount_relief < 0.0 or self.irritation_gain < 0.0:
            raise ValidationError("dynamics gains must be >= 0")
        if self.busy_hangup_turn < 0:
            raise ValidationError("busy_hangup_turn must be >= 0")


@dataclass(frozen=True)
class EnvTables:
    personas: tuple[Persona, ...]
    dynamics: Dynamics
    # transitions[intent][action] is a tuple of probabilities over
    # LIVE_INTENTS, summing to 1
    transitions: dict[Intent, dict[ActionKind, tuple[float, ...]]]


@dataclass(frozen=True)
class DialogueState:
    turn_index: int
    user_intent: Intent
    counts: tuple[int, ...]
    last_action: int  # -1 before the first turn
    features: np.ndarray


@dataclass(frozen=True)
class StepOutcome:
    next_state: DialogueState
    user_tokens: tuple[str, ...]
    terminal: bool
    converted: bool
    hangup: bool


def build_features(counts, last_action: int, persona: Persona, t: int,
                   t_max: int) -> np.ndarray:
    x = np.zeros(FEATURE_DIM, dtype=np.float64)
    for k in range(ACTION_COUNT):
        x[k] = float(counts[k])
    if last_action >= 0:
        x[ACTION_COUNT + last_action] = 1.0
    base = 2 * ACTION_COUNT
    x[base] = persona.price_sensitivity
    x[base + 1] = persona.skepticism
    x[base + 2] = 1.0 if persona.busy else 0.0
    x[base + 3] = persona.base_acceptance
    x[base + 4] = t / t_max
    return x


_PERSONA_KEYS = {"id", "name", "price_sensitivity", "skepticism", "busy",
                 "base_acceptance"}
_DYNAMICS_KEYS = {"discount_relief", "close_annoyed_hangup", "annoyed_hangup",
                  "busy_hangup", "busy_hangup_turn", "irritation_gain",
                  "annoyed_cap", "hangup_cap", "interest_close_factor"}
_TABLE_KEYS = {"schema_version", "personas", "dynamics", "transitions"}


def load_tables(path) -> EnvTables:
    """Load and validate the persona/transition tables."""
    try:
        with open(path, "rb") as fh:
            data = _toml.load(fh)
    except FileNotFoundError as exc:
        raise ParseError(f"environment tables not found: {path}") from exc
    except _toml.TOMLDecodeError as exc:
        raise ParseError(f"environment tables are not valid TOML: {exc}") from exc

    for key in data:
        if key not in _TABLE_KEYS:
            raise UnknownKey(f"unknown environment table key: {key}")
    if data.get("schema_version") != 1:
        raise ValidationError("environment tables need schema_version = 1")

    personas = []
    for raw in data.get("personas", []):
        for key in raw:
            if key not in _PERSONA_KEYS:
                raise UnknownKey(f"unknown persona key: {key}")
        personas.append(Persona(
            id=int(raw["id"]),
            name=str(raw["name"]),
            price_sensitivity=float(raw["price_sensitivity"]),
            skepticism=float(raw["skepticism"]),
            busy=bool(raw["busy"]),
            base_acceptance=float(raw["base_acceptance"]),
        ))
    if not personas:
        raise ValidationError("at least one persona is required")
    for idx, persona in enumerate(personas):
        if persona.id != idx:
            raise ValidationError("persona ids must be 0..n-1 in order")

    raw_dyn = data.get("dynamics", {})
    for key in raw_dyn:
        if key not in _DYNAMICS_KEYS:
            raise UnknownKey(f"unknown dynamics key: {key}")
    dynamics = Dynamics(**raw_dyn)

    raw_tr = data.get("transitions", {})
    transitions: dict[Intent, dict[ActionKind, tuple[float, ...]]] = {}
    for intent_name in raw_tr:
        if intent_name not in LIVE_INTENT_NAMES:
            raise UnknownKey(f"unknown intent in transitions: {intent_name}")
    for intent in LIVE_INTENTS:
        intent_name = intent.name.lower()
        if intent_name not in raw_tr:
            raise ValidationError(f"missing transition table for {intent_name}")
        rows = raw_tr[intent_name]
        for action_name in rows:
            if action_name not in ACTION_NAMES:
                raise UnknownKey(f"unknown action in transitions: {action_name}")
        transitions[intent] = {}
        for action in ActionKind:
            action_name = action.name.lower()
            if action_name not in rows:
                raise ValidationError(
                    f"missing transition row {intent_name}.{action_name}"
                )
            row = rows[action_name]
            for target in row:
                if target not in LIVE_INTENT_NAMES:
                    raise UnknownKey(
                        f"unknown target intent {target} in "
                        f"{intent_name}.{action_name}"
                    )
            probs = []
            for target_intent in LIVE_INTENTS:
                p = float(row.get(target_intent.name.lower(), 0.0))
                if p < 0.0:
                    raise ValidationError(
                        f"negative probability in {intent_name}.{action_name}"
                    )
                probs.append(p)
            total = sum(probs)
            if abs(total - 1.0) > 1e-9:
                raise ValidationError(
                    f"row {intent_name}.{action_name} sums to {total}, not 1"
                )
            transitions[intent][action] = tuple(probs)
    return EnvTables(personas=tuple(personas), dynamics=dynamics,
                     transitions=transitions)


def load_scripts(path) -> tuple[tuple[str, ...], ...]:
    """Load the script library: one whitespace-tokenized line per script."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except FileNotFoundError as exc:
        raise ParseError(f"script library not found: {path}") from exc
    library = tuple(tuple(line.split()) for line in lines if line.split())
    if not library:
        raise EmptyLibrary(f"script library has no lines: {path}")
    return library


def _draw_index(probs, u: float) -> int:
    c = 0.0
    for i, p in enumerate(probs):
        c += p
        if u < c:
            return i
    return len(probs) - 1


class Environment:
    """Stateless stepper over loaded tables; rollouts own their RNG."""

    def __init__(self, tables: EnvTables, scripts, turn_params: TurnRewardParams,
                 session_params: SessionRewardParams, t_max: int):
        if t_max < 1:
            raise ValidationError(f"t_max must be >= 1, got {t_max}")
        self.tables = tables
        self.scripts = tuple(tuple(s) for s in scripts)
        if not self.scripts:
            raise EmptyLibrary("script library has no lines")
        self.turn_params = turn_params
        self.session_params = session_params
        self.t_max = t_max

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "Environment":
        if config.feature_dim != FEATURE_DIM:
            raise ValidationError(
                f"feature_dim must be {FEATURE_DIM} for this simulator, "
                f"got {config.feature_dim}"
            )
        tables = load_tables(config.persona_library_path)
        scripts = load_scripts(config.script_library_path)
        return cls(tables, scripts, config.turn_reward, config.session_reward,
                   config.t_max)

    def with_t_max(self, t_max: int) -> "Environment":
        return Environment(self.tables, self.scripts, self.turn_params,
                           self.session_params, t_max)

    @property
    def personas(self) -> tuple[Persona, ...]:
        return self.tables.personas

    def persona(self, persona_id: int) -> Persona:
        personas = self.tables.personas
        if not 0 <= persona_id < len(personas):
            raise ValidationError(f"persona id out of range: {persona_id}")
        return personas[persona_id]

    def reset(self, persona: Persona, seed: int) -> DialogueState:
        counts = (0,) * ACTION_COUNT
        return DialogueState(
            turn_index=0,
            user_intent=Intent.NEUTRAL,
            counts=counts,
            last_action=-1,
            features=build_features(counts, -1, persona, 0, self.t_max),
        )

    def acceptance(self, persona: Persona, discount_offered: bool) -> float:
        dyn = self.tables.dynamics
        relief = 0.0 if discount_offered else 1.0
        g = persona.base_acceptance - dyn.discount_relief * persona.price_sensitivity * relief
        return min(max(g, 0.0), 1.0)

    def _transition_row(self, intent: Intent, action: ActionKind,
                        persona: Persona) -> tuple[float, ...]:
        row = self.tables.transitions[intent][action]
        if action not in _IRRITATING:
            return row
        dyn = self.tables.dynamics
        p_ann = row[Intent.ANNOYED]
        scaled = p_ann * (1.0 + dyn.irritation_gain * persona.skepticism)
        if scaled > dyn.annoyed_cap:
            scaled = dyn.annoyed_cap
        if p_ann >= 1.0 or scaled == p_ann:
            return row
        rescale = (1.0 - scaled) / (1.0 - p_ann)
        return tuple(
            scaled if i == Intent.ANNOYED else row[i] * rescale
            for i in range(len(row))
        )

    def step(self, state: DialogueState, action: ActionKind, persona: Persona,
             rng) -> StepOutcome:
        if state.user_intent == Intent.TERMINATED:
            raise StepAfterTerminal("cannot step a terminal dialogue state")
        action = ActionKind(action)
        intent = state.user_intent
        dyn = self.tables.dynamics
        t = state.turn_index

        converted = False
        hangup = False
        terminal = False
        u_terminal = rng.random()
        if action == ActionKind.ASK_CLOSE and intent in (
                Intent.READY_TO_BUY, Intent.INTERESTED):
            discount_offered = state.counts[ActionKind.OFFER_DISCOUNT] > 0
            p_convert = self.acceptance(persona, discount_offered)
            if intent == Intent.INTERESTED:
                p_convert *= dyn.interest_close_factor
            if u_terminal < p_convert:
                converted = True
                terminal = True
        elif action == ActionKind.ASK_CLOSE and intent == Intent.ANNOYED:
            if u_terminal < dyn.close_annoyed_hangup:
                hangup = True
                terminal = True
        else:
            p_hang = 0.0
            if intent == Intent.ANNOYED:
                p_hang += dyn.annoyed_hangup
            if persona.busy and t >= dyn.busy_hangup_turn:
                p_hang += dyn.busy_hangup
            if p_hang > dyn.hangup_cap:
                p_hang = dyn.hangup_cap
            if p_hang > 0.0 and u_terminal < p_hang:
                hangup = True
                terminal = True

        if terminal:
            next_intent = intent
        else:
            u_next = rng.random()
            row = self._transition_row(intent, action, persona)
            next_intent = LIVE_INTENTS[_draw_index(row, u_next)]

        if converted:
            reply_category = "converted"
        elif hangup:
            reply_category = "hangup"
        else:
            reply_category = next_intent.name.lower()
        user_tokens = utterances.realize_user(reply_category, rng)

        t_next = t + 1
        if t_next >= self.t_max:
            terminal = True

        counts = list(state.counts)
        counts[action] += 1
        counts = tuple(counts)
        stored_intent = Intent.TERMINATED if terminal else next_intent
        next_state = DialogueState(
            turn_index=t_next,
            user_intent=stored_intent,
            counts=counts,
            last_action=int(action),
            features=build_features(counts, int(action), persona, t_next,
                                    self.t_max),
        )
        return StepOutcome(next_state=next_state, user_tokens=user_tokens,
                           terminal=terminal, converted=converted,
                           hangup=hangup)

    def realize_action(self, action: ActionKind, rng,
                       script_cursor: int = 0) -> tuple[str, ...]:
        """Token utterance for an action kind; repeat-script reads the next
        library line verbatim, cycling from the top of the script."""
        if action == ActionKind.REPEAT_SCRIPT:
            return self.scripts[script_cursor % len(self.scripts)]
        return utterances.realize_agent(ACTION_NAMES[action], rng)

    def rollout(self, policy, persona: Persona, seed: int,
                greedy: bool = False) -> Trajectory:
        """Play one full episode and score it."""
        rng = np.random.Generator(np.random.PCG64(seed))
        state = self.reset(persona, seed)
        prev_agent: list[tuple[str, ...]] = []
        turns: list[TurnRecord] = []
        converted = False
        while True:
            if greedy:
                action_idx = policy.greedy_action(state.features)
                logp = float(policy.log_probs(state.features)[action_idx])
            else:
                u = rng.random()
                action_idx, logp = policy.sample_action(state.features, u)
            action = ActionKind(action_idx)
            tokens = self.realize_action(
                action, rng, state.counts[ActionKind.REPEAT_SCRIPT])
            breakdown = turn_reward(tokens, prev_agent, self.scripts,
                                    self.turn_params)
            outcome = self.step(state, action, persona, rng)
            turns.append(TurnRecord(
                t=state.turn_index,
                intent=state.user_intent.name.lower(),
                features=state.features,
                action=ACTION_NAMES[action],
                agent_tokens=tokens,
                log_prob=logp,
                rep_intra=breakdown.rep_intra,
                rep_inter=breakdown.rep_inter,
                repetition=breakdown.repetition,
                similarity=breakdown.similarity,
                r_len=breakdown.r_len,
                gate_valid=breakdown.gate_valid,
                r_turn=breakdown.r_turn,
                user_tokens=outcome.user_tokens,
            ))
            prev_agent.append(tokens)
            if outcome.terminal:
                converted = outcome.converted
                break
            state = outcome.next_state
        violation = violation_score_of(tr.action for tr in turns)
        return Trajectory(
            persona_id=persona.id,
            seed=seed,
            turns=tuple(turns),
            converted=converted,
            violation_score=violation,
            session_reward=session_reward_values(converted, violation,
                                                 self.session_params),
            terminal=True,
        )


__all__ = [
    "ACTION_COUNT",
    "ACTION_NAMES",
    "ActionKind",
    "DialogueState",
    "Dynamics",
    "EnvTables",
    "Environment",
    "FEATURE_DIM",
    "Intent",
    "LIVE_INTENTS",
    "Persona",
    "StepOutcome",
    "build_features",
    "load_scripts",
    "load_tables",
]
