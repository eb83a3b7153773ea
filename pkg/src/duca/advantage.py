"""Credit assignment: per-horizon GAE, batch normalization, and fusion.

The dual pipeline keeps the dense turn-reward stream and the sparse
session-reward stream separate: each gets its own GAE pass against its own
value head, each is whitened across the mini-batch with its own statistics,
and only then are the two standardized advantages combined with fixed
weights. Normalizing per horizon first is what stops the large-magnitude
session signal from drowning the turn signal (see dominance_ratio).

Baselines for ablations live here too: a single GAE over the summed stream
(naive) and a critic-free per-persona-group standardization (group).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from . import _kernels
from .errors import EmptyInput, LengthMismatch, ValidationError


@dataclass(frozen=True)
class GaeParams:
    gamma_turn: float = 0.99
    lambda_turn: float = 0.95
    gamma_session: float = 1.0
    lambda_session: float = 1.0

    def __post_init__(self):
        for name in ("gamma_turn", "lambda_turn", "gamma_session", "lambda_session"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class HianParams:
    epsilon_norm: float = 1e-8
    w_turn: float = 1.0
    w_session: float = 1.0

    def __post_init__(self):
        if not self.epsilon_norm > 0.0:
            raise ValidationError(
                f"epsilon_norm must be > 0, got {self.epsilon_norm}"
            )
        if self.w_turn < 0.0 or self.w_session < 0.0:
            raise ValidationError("fusion weights must be >= 0")


@dataclass(frozen=True)
class AdvantageSet:
    """Flat per-turn vectors over a batch, episode order then turn order."""

    a_turn: np.ndarray
    a_session: np.ndarray
    a_turn_hat: np.ndarray
    a_session_hat: np.ndarray
    a_total: np.ndarray


def gae(rewards, values, gamma: float, lam: float) -> np.ndarray:
    """GAE over one trajectory with a zero terminal bootstrap."""
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if r.ndim != 1 or v.ndim != 1:
        raise ValidationError("gae expects 1-d reward and value arrays")
    if r.shape[0] != v.shape[0]:
        raise LengthMismatch(
            f"rewards have length {r.shape[0]} but values have {v.shape[0]}"
        )
    if r.shape[0] == 0:
        raise EmptyInput("gae needs at least one step")
    return _kernels.gae(r, v, gamma, lam)


def normalize(advantages, epsilon_norm: float) -> np.ndarray:
    """Whiten across the batch: (a - mean) / (population std + epsilon)."""
    a = np.asarray(advantages, dtype=np.float64)
    if a.ndim != 1:
        raise ValidationError("normalize expects a 1-d array")
    if a.shape[0] == 0:
        raise EmptyInput("normalize needs at least one element")
    return _kernels.whiten(a, epsilon_norm)


def _require_batch(batch) -> list:
    batch = list(batch)
    if not batch:
        raise EmptyInput("advantage computation needs at least one trajectory")
    return batch


def duca_advantages(batch, value_heads, gae_params: GaeParams,
                    hian_params: HianParams) -> AdvantageSet:
    """Dual-stream advantages for a batch of trajectories.

    value_heads must expose value_turn(features) and value_session(features)
    returning one prediction per row.
    """
    batch = _require_batch(batch)
    turn_parts = []
    session_parts = []
    for traj in batch:
        x = traj.feature_matrix()
        v_turn = np.asarray(value_heads.value_turn(x), dtype=np.float64)
        v_session = np.asarray(value_heads.value_session(x), dtype=np.float64)
        turn_parts.append(gae(traj.turn_rewards(), v_turn,
                              gae_params.gamma_turn, gae_params.lambda_turn))
        session_parts.append(gae(traj.session_stream(), v_session,
                                 gae_params.gamma_session,
                                 gae_params.lambda_session))
    a_turn = np.concatenate(turn_parts)
    a_session = np.concatenate(session_parts)
    a_turn_hat = normalize(a_turn, hian_params.epsilon_norm)
    a_session_hat = normalize(a_session, hian_params.epsilon_norm)
    a_total = hian_params.w_turn * a_turn_hat + hian_params.w_session * a_session_hat
    return AdvantageSet(
        a_turn=a_turn,
        a_session=a_session,
        a_turn_hat=a_turn_hat,
        a_session_hat=a_session_hat,
        a_total=a_total,
    )


def naive_advantages(batch, value_head, gae_params: GaeParams,
                     epsilon_norm: float) -> np.ndarray:
    """Single GAE over the summed reward stream, whitened jointly.

    Uses the undiscounted pair (gamma_session, lambda_session) since the
    summed stream carries the terminal session reward. value_head is a
    callable mapping a feature matrix to one prediction per row.
    """
    batch = _require_batch(batch)
    parts = []
    for traj in batch:
        summed = traj.turn_rewards() + traj.session_stream()
        values = np.asarray(value_head(traj.feature_matrix()), dtype=np.float64)
        parts.append(gae(summed, values,
                         gae_params.gamma_session, gae_params.lambda_session))
    return normalize(np.concatenate(parts), epsilon_norm)


def group_advantages(batch, epsilon_norm: float) -> np.ndarray:
    """Critic-free baseline: per-persona-group standardized episode return,
    broadcast to every turn of the episode.

    A group with a single episode gets advantage 0 for that episode (its
    centered return is 0 regardless of scale).
    """
    batch = _require_batch(batch)
    returns = np.array(
        [float(np.sum(traj.turn_rewards())) + traj.session_reward
         for traj in batch],
        dtype=np.float64,
    )
    standardized = np.empty(len(batch), dtype=np.float64)
    groups: dict[int, list[int]] = {}
    for idx, traj in enumerate(batch):
        groups.setdefault(traj.persona_id, []).append(idx)
    for indices in groups.values():
        standardized[indices] = _kernels.whiten(returns[indices], epsilon_norm)
    parts = [np.full(batch[i].turn_count, standardized[i]) for i in range(len(batch))]
    return np.concatenate(parts)


def dominance_ratio(sigma_turn: float, sigma_session: float) -> float:
    """Scale of the turn signal after joint normalization of independent
    summed streams, relative to per-stream normalization.

    For independent streams the summed stream has scale
    sqrt(sigma_turn^2 + sigma_session^2), so joint whitening shrinks the
    turn component by sigma_turn / that; per-stream whitening keeps it at 1.
    """
    if sigma_turn < 0.0 or sigma_session < 0.0:
        raise ValidationError("scales must be >= 0")
    denom = sqrt(sigma_turn * sigma_turn + sigma_session * sigma_session)
    if denom == 0.0:
        raise ValidationError("at least one scale must be positive")
    return sigma_turn / denom


def naive_turn_contribution(batch, value_head, gae_params: GaeParams,
                            epsilon_norm: float) -> np.ndarray:
    """The turn-stream component of naive_advantages, under the statistics
    of the unmodified batch.

    GAE is linear in the rewards for fixed values, so the naive advantage
    splits exactly into a turn part (carrying the critic baseline) and a
    session part (against a zero baseline). Each part is centered by its
    own mean and divided by the FULL stream's scale, so the two
    contributions sum to naive_advantages(batch, ...) identically. Zeroing
    the session rewards while reusing the full-batch normalization
    statistics yields exactly this turn part.
    """
    batch = _require_batch(batch)
    turn_parts = []
    session_parts = []
    for traj in batch:
        values = np.asarray(value_head(traj.feature_matrix()), dtype=np.float64)
        zeros = np.zeros(traj.turn_count, dtype=np.float64)
        turn_parts.append(gae(traj.turn_rewards(), values,
                              gae_params.gamma_session,
                              gae_params.lambda_session))
        session_parts.append(gae(traj.session_stream(), zeros,
                                 gae_params.gamma_session,
                                 gae_params.lambda_session))
    g_turn = np.concatenate(turn_parts)
    g_session = np.concatenate(session_parts)
    full_scale = float(np.std(g_turn + g_session)) + epsilon_norm
    return (g_turn - g_turn.mean()) / full_scale


def duca_turn_contribution(batch, value_heads, gae_params: GaeParams,
                           hian_params: HianParams) -> np.ndarray:
    """The turn-stream component of the dual pipeline's fused advantage:
    w_turn times the whitened turn advantages. Zeroing the session stream
    under frozen statistics leaves exactly this term (plus a constant)."""
    adv = duca_advantages(batch, value_heads, gae_params, hian_params)
    return hian_params.w_turn * adv.a_turn_hat
