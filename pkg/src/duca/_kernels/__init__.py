"""Numeric kernels with a compiled backend and a pure-Python fallback.

The compiled extension is preferred when importable; set
``DUCA_KERNEL_BACKEND=python`` to force the fallback or
``DUCA_KERNEL_BACKEND=compiled`` to require the extension (ImportError if
it is missing). Both backends produce bit-identical results.
"""

from __future__ import annotations

import os

_choice = os.environ.get("DUCA_KERNEL_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "compiled", "python"):
    raise ValueError(
        "DUCA_KERNEL_BACKEND must be one of auto, compiled, python; got %r" % _choice
    )

if _choice == "python":
    from . import pyref as _impl
elif _choice == "compiled":
    from . import _core as _impl  # type: ignore[attr-defined]
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import pyref as _impl

BACKEND = _impl.BACKEND_NAME

gae = _impl.gae
whiten = _impl.whiten
log_softmax = _impl.log_softmax
logits_one = _impl.logits_one
sample_from_logits = _impl.sample_from_logits
action_log_probs = _impl.action_log_probs
ppo_loss_grad = _impl.ppo_loss_grad
value_loss_grad = _impl.value_loss_grad
value_predict = _impl.value_predict

__all__ = [
    "BACKEND",
    "gae",
    "whiten",
    "log_softmax",
    "logits_one",
    "sample_from_logits",
    "action_log_probs",
    "ppo_loss_grad",
    "value_loss_grad",
    "value_predict",
]
