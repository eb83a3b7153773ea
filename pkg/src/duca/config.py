"""Experiment configuration: strict TOML loading, serialization, overrides.

Unknown keys are hard errors at any nesting level. Missing keys fall back
to defaults. Integer literals are accepted for float fields; booleans are
never silently coerced. ``output_dir`` is the only value that gets
environment-variable expansion.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from importlib import resources

try:
    import tomllib as _toml
except ImportError:
    import tomli as _toml

from .advantage import GaeParams, HianParams
from .errors import ParseError, UnknownKey, ValidationError
from .rewards import SessionRewardParams, TurnRewardParams

SCHEMA_VERSION = 1
FEATURE_DIM = 21


@dataclass(frozen=True)
class PpoParams:
    epsilon_clip: float = 0.2
    kl_coef: float = 0.05
    learning_rate: float = 0.05
    epochs_per_batch: int = 4
    episodes_per_step: int = 64
    max_steps: int = 70

    def __post_init__(self):
        if not 0.0 < self.epsilon_clip < 1.0:
            raise ValidationError(
                f"epsilon_clip must be in (0, 1), got {self.epsilon_clip}"
            )
        if self.kl_coef < 0.0:
            raise ValidationError(f"kl_coef must be >= 0, got {self.kl_coef}")
        if not self.learning_rate > 0.0:
            raise ValidationError(
                f"learning_rate must be > 0, got {self.learning_rate}"
            )
        for name in ("epochs_per_batch", "episodes_per_step", "max_steps"):
            v = getattr(self, name)
            if v < 1:
                raise ValidationError(f"{name} must be >= 1, got {v}")


def default_persona_library_path() -> str:
    return str(resources.files("duca").joinpath("data/environment.toml"))


def default_script_library_path() -> str:
    return str(resources.files("duca").joinpath("data/scripts.txt"))


@dataclass(frozen=True)
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int = 12345
    t_max: int = 8
    feature_dim: int = FEATURE_DIM
    persona_library_path: str = field(default_factory=default_persona_library_path)
    script_library_path: str = field(default_factory=default_script_library_path)
    output_dir: str = "runs"
    turn_reward: TurnRewardParams = field(default_factory=TurnRewardParams)
    session_reward: SessionRewardParams = field(default_factory=SessionRewardParams)
    gae: GaeParams = field(default_factory=GaeParams)
    hian: HianParams = field(default_factory=HianParams)
    ppo: PpoParams = field(default_factory=PpoParams)

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValidationError(
                f"unsupported schema_version {self.schema_version}"
            )
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must fit in an unsigned 64-bit integer")
        if self.t_max < 1:
            raise ValidationError(f"t_max must be >= 1, got {self.t_max}")
        if self.feature_dim < 1:
            raise ValidationError(
                f"feature_dim must be >= 1, got {self.feature_dim}"
            )


_SECTION_TYPES = {
    "turn_reward": TurnRewardParams,
    "session_reward": SessionRewardParams,
    "gae": GaeParams,
    "hian": HianParams,
    "ppo": PpoParams,
}

_SCHEMA: dict[str, object] = {
    "schema_version": int,
    "seed": int,
    "t_max": int,
    "feature_dim": int,
    "persona_library_path": str,
    "script_library_path": str,
    "output_dir": str,
    "turn_reward": {
        "delta1": float,
        "delta2": float,
        "l_target": int,
        "sigma_len": float,
        "r_penalty": float,
    },
    "session_reward": {"alpha": float, "beta": float},
    "gae": {
        "gamma_turn": float,
        "lambda_turn": float,
        "gamma_session": float,
        "lambda_session": float,
    },
    "hian": {"epsilon_norm": float, "w_turn": float, "w_session": float},
    "ppo": {
        "epsilon_clip": float,
        "kl_coef": float,
        "learning_rate": float,
        "epochs_per_batch": int,
        "episodes_per_step": int,
        "max_steps": int,
    },
}


def _coerce(value, expected, keypath: str):
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"{keypath} must be a number, got {value!r}")
        return float(value)
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"{keypath} must be an integer, got {value!r}")
        return int(value)
    if expected is str:
        if not isinstance(value, str):
            raise ValidationError(f"{keypath} must be a string, got {value!r}")
        return value
    raise AssertionError(f"unhandled schema type for {keypath}")


def _check_keys(mapping: dict, schema: dict, prefix: str = "") -> None:
    for key, value in mapping.items():
        keypath = prefix + key
        if key not in schema:
            raise UnknownKey(f"unknown config key: {keypath}")
        sub = schema[key]
        if isinstance(sub, dict):
            if not isinstance(value, dict):
                raise ValidationError(f"{keypath} must be a table")
            _check_keys(value, sub, keypath + ".")


def _build(data: dict) -> ExperimentConfig:
    _check_keys(data, _SCHEMA)
    kwargs: dict = {}
    for key, expected in _SCHEMA.items():
        if key not in data:
            continue
        if isinstance(expected, dict):
            section_cls = _SECTION_TYPES[key]
            section_kwargs = {
                k: _coerce(v, expected[k], f"{key}.{k}")
                for k, v in data[key].items()
            }
            kwargs[key] = section_cls(**section_kwargs)
        else:
            kwargs[key] = _coerce(data[key], expected, key)
    if "output_dir" in kwargs:
        kwargs["output_dir"] = os.path.expandvars(kwargs["output_dir"])
    cfg = ExperimentConfig(**kwargs)
    _check_paths(cfg)
    return cfg


def _check_paths(cfg: ExperimentConfig) -> None:
    for name in ("persona_library_path", "script_library_path"):
        path = getattr(cfg, name)
        if not os.path.isfile(path):
            raise ValidationError(f"{name} does not exist: {path}")


def default_config() -> ExperimentConfig:
    cfg = ExperimentConfig()
    _check_paths(cfg)
    return cfg


def load(path) -> ExperimentConfig:
    """Load a config file; missing keys take defaults, unknown keys raise."""
    try:
        with open(path, "rb") as fh:
            data = _toml.load(fh)
    except FileNotFoundError as exc:
        raise ParseError(f"config file not found: {path}") from exc
    except _toml.TOMLDecodeError as exc:
        raise ParseError(f"config file is not valid TOML: {exc}") from exc
    return _build(data)


def _to_plain_dict(cfg: ExperimentConfig) -> dict:
    out: dict = {}
    for key, expected in _SCHEMA.items():
        value = getattr(cfg, key)
        if isinstance(expected, dict):
            out[key] = {k: getattr(value, k) for k in expected}
        else:
            out[key] = value
    return out


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        text = repr(value)
        # TOML floats need a decimal point or exponent; repr of inf/nan is
        # spelled differently in TOML.
        if text == "inf":
            return "inf"
        if text == "-inf":
            return "-inf"
        if text == "nan":
            return "nan"
        if "." not in text and "e" not in text and "E" not in text:
            text += ".0"
        return text
    if isinstance(value, str):
        return json.dumps(value)
    raise AssertionError(f"unhandled TOML value {value!r}")


def serialize(cfg: ExperimentConfig) -> str:
    """Render a config as TOML text; load(serialize(c)) == c."""
    data = _to_plain_dict(cfg)
    lines: list[str] = []
    for key, expected in _SCHEMA.items():
        if not isinstance(expected, dict):
            lines.append(f"{key} = {_toml_scalar(data[key])}")
    for key, expected in _SCHEMA.items():
        if isinstance(expected, dict):
            lines.append("")
            lines.append(f"[{key}]")
            for sub in expected:
                lines.append(f"{sub} = {_toml_scalar(data[key][sub])}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> ExperimentConfig:
    try:
        data = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ParseError(f"config text is not valid TOML: {exc}") from exc
    return _build(data)


def apply_overrides(cfg: ExperimentConfig,
                    overrides: dict[str, str]) -> ExperimentConfig:
    """Apply dotted-key overrides with TOML-literal values, then revalidate.

    Example: {"ppo.learning_rate": "0.01", "seed": "7"}.
    """
    updated = cfg
    for dotted, raw in overrides.items():
        parts = dotted.split(".")
        try:
            value = _toml.loads(f"v = {raw}")["v"]
        except _toml.TOMLDecodeError as exc:
            raise ParseError(
                f"override {dotted}={raw!r} is not a TOML literal"
            ) from exc
        if len(parts) == 1:
            key = parts[0]
            expected = _SCHEMA.get(key)
            if expected is None or isinstance(expected, dict):
                raise UnknownKey(f"unknown config key: {dotted}")
            coerced = _coerce(value, expected, key)
            if key == "output_dir":
                coerced = os.path.expandvars(coerced)
            updated = replace(updated, **{key: coerced})
        elif len(parts) == 2:
            section, key = parts
            section_schema = _SCHEMA.get(section)
            if not isinstance(section_schema, dict) or key not in section_schema:
                raise UnknownKey(f"unknown config key: {dotted}")
            coerced = _coerce(value, section_schema[key], dotted)
            new_section = replace(getattr(updated, section), **{key: coerced})
            updated = replace(updated, **{section: new_section})
        else:
            raise UnknownKey(f"unknown config key: {dotted}")
    _check_paths(updated)
    return updated
