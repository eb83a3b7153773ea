"""Dual-horizon credit assignment on a scripted sales-dialogue simulator.

The training stack keeps per-turn linguistic rewards and per-session
outcome rewards on separate critic/GAE/normalization paths and fuses the
standardized advantages, so neither horizon's gradient signal drowns the
other. Includes the simulator, ablation baselines, and a compiled kernel
backend with a bit-identical pure-Python fallback.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .advantage import (
    AdvantageSet,
    GaeParams,
    HianParams,
    dominance_ratio,
    duca_advantages,
    gae,
    group_advantages,
    naive_advantages,
    normalize,
)
from .config import ExperimentConfig, PpoParams, default_config, load
from .env import ActionKind, Environment, Intent, Persona
from .metrics import MetricsReport, compute_report
from .policy import PolicyModel, gradcheck
from .rewards import (
    SessionRewardParams,
    TurnRewardParams,
    session_reward,
    turn_reward,
)
from .trainer import Method, evaluate, run_ablation, train
from .trajectory import Trajectory, TurnRecord

__version__ = "0.1.0"

__all__ = [
    "ActionKind",
    "AdvantageSet",
    "Environment",
    "ExperimentConfig",
    "GaeParams",
    "HianParams",
    "Intent",
    "KERNEL_BACKEND",
    "Method",
    "MetricsReport",
    "Persona",
    "PolicyModel",
    "PpoParams",
    "SessionRewardParams",
    "Trajectory",
    "TurnRecord",
    "TurnRewardParams",
    "__version__",
    "compute_report",
    "default_config",
    "dominance_ratio",
    "duca_advantages",
    "evaluate",
    "gae",
    "gradcheck",
    "group_advantages",
    "load",
    "naive_advantages",
    "normalize",
    "run_ablation",
    "session_reward",
    "train",
    "turn_reward",
]
