"""Linear-softmax policy with two linear value heads, trained by plain
gradient descent on a clipped surrogate objective.

The policy maps a feature vector to action logits (w @ x + b). The two
value heads share the features but nothing else: one predicts turn-level
reward-to-go, the other the session return. Gradients are analytic and
checked against central finite differences (see gradcheck).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .config import PpoParams
from .errors import DimMismatch, LengthMismatch, ParseError, ValidationError

_FORMAT_TAG = "duca-policy"
_FORMAT_VERSION = 1


@dataclass
class PolicyGrad:
    w: np.ndarray
    b: np.ndarray


class PolicyModel:
    """Mutable parameter container with analytic-gradient training ops."""

    def __init__(self, w, b, v_turn_w, v_turn_b, v_session_w, v_session_b):
        self.w = np.array(w, dtype=np.float64)
        self.b = np.array(b, dtype=np.float64)
        self.v_turn_w = np.array(v_turn_w, dtype=np.float64)
        self.v_turn_b = float(v_turn_b)
        self.v_session_w = np.array(v_session_w, dtype=np.float64)
        self.v_session_b = float(v_session_b)
        if self.w.ndim != 2:
            raise DimMismatch("policy weights must be 2-d")
        if self.b.shape != (self.w.shape[0],):
            raise DimMismatch("policy bias shape does not match weights")
        f = self.w.shape[1]
        if self.v_turn_w.shape != (f,) or self.v_session_w.shape != (f,):
            raise DimMismatch("value head shapes do not match feature_dim")

    @classmethod
    def zeros(cls, feature_dim: int, action_count: int) -> "PolicyModel":
        if feature_dim < 1 or action_count < 2:
            raise ValidationError(
                "need feature_dim >= 1 and action_count >= 2"
            )
        return cls(
            w=np.zeros((action_count, feature_dim)),
            b=np.zeros(action_count),
            v_turn_w=np.zeros(feature_dim),
            v_turn_b=0.0,
            v_session_w=np.zeros(feature_dim),
            v_session_b=0.0,
        )

    @property
    def feature_dim(self) -> int:
        return self.w.shape[1]

    @property
    def action_count(self) -> int:
        return self.w.shape[0]

    def clone(self) -> "PolicyModel":
        return PolicyModel(self.w, self.b, self.v_turn_w, self.v_turn_b,
                           self.v_session_w, self.v_session_b)

    def _check_features(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=np.float64)
        if arr.shape[-1] != self.feature_dim:
            raise DimMismatch(
                f"expected feature dim {self.feature_dim}, got {arr.shape[-1]}"
            )
        return arr

    def action_logits(self, features) -> np.ndarray:
        x = self._check_features(features)
        if x.ndim != 1:
            raise DimMismatch("action_logits takes a single feature vector")
        return _kernels.logits_one(self.w, self.b, x)

    def log_probs(self, features) -> np.ndarray:
        return _kernels.log_softmax(self.action_logits(features))

    def sample_action(self, features, u: float) -> tuple[int, float]:
        """Draw an action with one uniform in [0, 1); returns (action, logp)."""
        idx, logp = _kernels.sample_from_logits(self.action_logits(features), u)
        return int(idx), float(logp)

    def greedy_action(self, features) -> int:
        # ties break toward the lowest index
        return int(np.argmax(self.action_logits(features)))

    def batch_log_probs(self, features, actions) -> np.ndarray:
        x = self._check_features(features)
        if x.ndim != 2:
            raise DimMismatch("batch_log_probs takes a feature matrix")
        acts = self._check_actions(actions, x.shape[0])
        return _kernels.action_log_probs(self.w, self.b, x, acts)

    def _check_actions(self, actions, n: int) -> np.ndarray:
        acts = np.asarray(actions, dtype=np.int64)
        if acts.shape != (n,):
            raise LengthMismatch(
                f"expected {n} actions, got shape {acts.shape}"
            )
        if acts.size and (acts.min() < 0 or acts.max() >= self.action_count):
            raise ValidationError("action index out of range")
        return acts

    def value_turn(self, features) -> np.ndarray:
        x = self._check_features(features)
        if x.ndim != 2:
            raise DimMismatch("value_turn takes a feature matrix")
        return _kernels.value_predict(x, self.v_turn_w, self.v_turn_b)

    def value_session(self, features) -> np.ndarray:
        x = self._check_features(features)
        if x.ndim != 2:
            raise DimMismatch("value_session takes a feature matrix")
        return _kernels.value_predict(x, self.v_session_w, self.v_session_b)

    def ppo_loss_and_grad(self, features, actions, old_log_probs, ref_log_probs,
                          advantages, ppo: PpoParams) -> tuple[float, PolicyGrad]:
        """Clipped-surrogate loss plus KL-to-reference penalty.

        loss = -mean min(rho A, clip(rho, 1-eps, 1+eps) A)
               + kl_coef * mean (logpi - logpi_ref), rho = exp(logpi - old).
        Turns clipped on the worsening side contribute no surrogate
        gradient.
        """
        x = self._check_features(features)
        if x.ndim != 2:
            raise DimMismatch("ppo_loss_and_grad takes a feature matrix")
        n = x.shape[0]
        acts = self._check_actions(actions, n)
        old = np.asarray(old_log_probs, dtype=np.float64)
        ref = np.asarray(ref_log_probs, dtype=np.float64)
        adv = np.asarray(advantages, dtype=np.float64)
        for name, arr in (("old_log_probs", old), ("ref_log_probs", ref),
                          ("advantages", adv)):
            if arr.shape != (n,):
                raise LengthMismatch(f"{name} must have length {n}")
        loss, gw, gb = _kernels.ppo_loss_grad(
            x, acts, old, ref, adv, self.w, self.b,
            ppo.epsilon_clip, ppo.kl_coef,
        )
        return float(loss), PolicyGrad(w=gw, b=gb)

    def value_loss_and_grad(self, features, targets,
                            head: str) -> tuple[float, np.ndarray, float]:
        """MSE loss and gradient for one value head ('turn' or 'session')."""
        x = self._check_features(features)
        if x.ndim != 2:
            raise DimMismatch("value_loss_and_grad takes a feature matrix")
        tgt = np.asarray(targets, dtype=np.float64)
        if tgt.shape != (x.shape[0],):
            raise LengthMismatch("targets must match the batch length")
        if head == "turn":
            w, b = self.v_turn_w, self.v_turn_b
        elif head == "session":
            w, b = self.v_session_w, self.v_session_b
        else:
            raise ValidationError(f"unknown value head: {head}")
        loss, gw, gb = _kernels.value_loss_grad(x, tgt, w, b)
        return float(loss), gw, float(gb)

    def apply_policy_grad(self, grad: PolicyGrad, learning_rate: float) -> None:
        self.w -= learning_rate * grad.w
        self.b -= learning_rate * grad.b

    def apply_value_grad(self, head: str, gw, gb: float,
                         learning_rate: float) -> None:
        if head == "turn":
            self.v_turn_w -= learning_rate * np.asarray(gw)
            self.v_turn_b -= learning_rate * gb
        elif head == "session":
            self.v_session_w -= learning_rate * np.asarray(gw)
            self.v_session_b -= learning_rate * gb
        else:
            raise ValidationError(f"unknown value head: {head}")

    # -- text checkpoint format: repr round-trips doubles exactly --

    def save(self, path) -> None:
        lines = [
            f"{_FORMAT_TAG} {_FORMAT_VERSION}",
            f"feature_dim {self.feature_dim}",
            f"action_count {self.action_count}",
            "policy_w " + " ".join(repr(v) for v in self.w.ravel()),
            "policy_b " + " ".join(repr(v) for v in self.b),
            "value_turn_w " + " ".join(repr(v) for v in self.v_turn_w),
            f"value_turn_b {self.v_turn_b!r}",
            "value_session_w " + " ".join(repr(v) for v in self.v_session_w),
            f"value_session_b {self.v_session_b!r}",
        ]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "PolicyModel":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                lines = [line.rstrip("\n") for line in fh if line.strip()]
        except FileNotFoundError as exc:
            raise ParseError(f"checkpoint not found: {path}") from exc
        fields: dict[str, str] = {}
        if not lines or lines[0].split() != [_FORMAT_TAG, str(_FORMAT_VERSION)]:
            raise ParseError(f"not a {_FORMAT_TAG} v{_FORMAT_VERSION} file: {path}")
        for line in lines[1:]:
            key, _, rest = line.partition(" ")
            fields[key] = rest
        try:
            feature_dim = int(fields["feature_dim"])
            action_count = int(fields["action_count"])
            w = np.array([float(v) for v in fields["policy_w"].split()],
                         dtype=np.float64).reshape(action_count, feature_dim)
            b = np.array([float(v) for v in fields["policy_b"].split()],
                         dtype=np.float64)
            vtw = np.array([float(v) for v in fields["value_turn_w"].split()],
                           dtype=np.float64)
            vtb = float(fields["value_turn_b"])
            vsw = np.array([float(v) for v in fields["value_session_w"].split()],
                           dtype=np.float64)
            vsb = float(fields["value_session_b"])
        except (KeyError, ValueError) as exc:
            raise ParseError(f"malformed checkpoint: {path}") from exc
        if b.shape != (action_count,) or vtw.shape != (feature_dim,) \
                or vsw.shape != (feature_dim,):
            raise ValidationError(f"checkpoint shapes are inconsistent: {path}")
        return cls(w, b, vtw, vtb, vsw, vsb)


@dataclass(frozen=True)
class GradCheckReport:
    cases: int
    tolerance: float
    max_rel_err_policy: float
    max_rel_err_value_turn: float
    max_rel_err_value_session: float

    @property
    def passed(self) -> bool:
        return max(self.max_rel_err_policy, self.max_rel_err_value_turn,
                   self.max_rel_err_value_session) < self.tolerance


def _rel_err(fd: float, an: float) -> float:
    denom = max(abs(fd), abs(an), 1e-6)
    return abs(fd - an) / denom


_KINK_MARGIN = 1e-3


def gradcheck(seed: int = 0, cases: int = 25, batch: int = 12,
              feature_dim: int = 6, action_count: int = 5,
              h: float = 1e-5, tolerance: float = 1e-4,
              ppo: PpoParams | None = None) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Random cases keep every probability ratio at least _KINK_MARGIN away
    from the clip boundaries so the finite-difference stencil never
    straddles the kink.
    """
    ppo = ppo or PpoParams()
    rng = np.random.Generator(np.random.PCG64(seed))
    worst_policy = 0.0
    worst_turn = 0.0
    worst_session = 0.0
    for _ in range(cases):
        model = PolicyModel(
            w=rng.normal(0.0, 0.5, (action_count, feature_dim)),
            b=rng.normal(0.0, 0.5, action_count),
            v_turn_w=rng.normal(0.0, 0.5, feature_dim),
            v_turn_b=float(rng.normal()),
            v_session_w=rng.normal(0.0, 0.5, feature_dim),
            v_session_b=float(rng.normal()),
        )
        x = rng.normal(0.0, 1.0, (batch, feature_dim))
        actions = rng.integers(0, action_count, batch)
        adv = rng.normal(0.0, 1.0, batch)
        ref_model = PolicyModel(
            w=rng.normal(0.0, 0.5, (action_count, feature_dim)),
            b=rng.normal(0.0, 0.5, action_count),
            v_turn_w=np.zeros(feature_dim), v_turn_b=0.0,
            v_session_w=np.zeros(feature_dim), v_session_b=0.0,
        )
        ref_logp = ref_model.batch_log_probs(x, actions)
        cur_logp = model.batch_log_probs(x, actions)
        old_logp = cur_logp - rng.uniform(-0.3, 0.3, batch)
        # nudge any ratio off the clip kinks so FD stays one-sided
        for idx in range(batch):
            for _attempt in range(50):
                ratio = float(np.exp(cur_logp[idx] - old_logp[idx]))
                near = (abs(ratio - (1.0 - ppo.epsilon_clip)) < _KINK_MARGIN
                        or abs(ratio - (1.0 + ppo.epsilon_clip)) < _KINK_MARGIN)
                if not near:
                    break
                old_logp[idx] += 5e-3

        _, grad = model.ppo_loss_and_grad(x, actions, old_logp, ref_logp,
                                          adv, ppo)

        def ppo_loss(m: PolicyModel) -> float:
            loss, _ = m.ppo_loss_and_grad(x, actions, old_logp, ref_logp,
                                          adv, ppo)
            return loss

        for i in range(action_count):
            for j in range(feature_dim):
                up = model.clone()
                up.w[i, j] += h
                down = model.clone()
                down.w[i, j] -= h
                fd = (ppo_loss(up) - ppo_loss(down)) / (2.0 * h)
                worst_policy = max(worst_policy, _rel_err(fd, grad.w[i, j]))
            up = model.clone()
            up.b[i] += h
            down = model.clone()
            down.b[i] -= h
            fd = (ppo_loss(up) - ppo_loss(down)) / (2.0 * h)
            worst_policy = max(worst_policy, _rel_err(fd, grad.b[i]))

        targets_turn = rng.normal(0.0, 2.0, batch)
        targets_session = rng.normal(0.0, 3.0, batch)
        for head, targets in (("turn", targets_turn),
                              ("session", targets_session)):
            _, gw, gb = model.value_loss_and_grad(x, targets, head)

            def value_loss(m: PolicyModel) -> float:
                loss, _, _ = m.value_loss_and_grad(x, targets, head)
                return loss

            worst = 0.0
            for j in range(feature_dim):
                up = model.clone()
                down = model.clone()
                if head == "turn":
                    up.v_turn_w[j] += h
                    down.v_turn_w[j] -= h
                else:
                    up.v_session_w[j] += h
                    down.v_session_w[j] -= h
                fd = (value_loss(up) - value_loss(down)) / (2.0 * h)
                worst = max(worst, _rel_err(fd, gw[j]))
            up = model.clone()
            down = model.clone()
            if head == "turn":
                up.v_turn_b += h
                down.v_turn_b -= h
            else:
                up.v_session_b += h
                down.v_session_b -= h
            fd = (value_loss(up) - value_loss(down)) / (2.0 * h)
            worst = max(worst, _rel_err(fd, gb))
            if head == "turn":
                worst_turn = max(worst_turn, worst)
            else:
                worst_session = max(worst_session, worst)
    return GradCheckReport(
        cases=cases,
        tolerance=tolerance,
        max_rel_err_policy=worst_policy,
        max_rel_err_value_turn=worst_turn,
        max_rel_err_value_session=worst_session,
    )
