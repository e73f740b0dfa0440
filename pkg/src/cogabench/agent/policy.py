"""Action selection over the masked joint action space."""

from __future__ import annotations

import numpy as np

from ..actions import Action, N_ACTION_TYPES, N_BINS, N_JOINT
from ..affordance.core import ActionMask
from .net import QOutput


def masked_argmax(out: QOutput, mask: ActionMask) -> int:
    """Flat index of the best allowed action; ties go to the lowest index.

    An all-false mask falls back to the unmasked argmax.
    """
    joint = (out.q_type[0][:, None] + out.q_bin[0][None, :]).reshape(N_JOINT)
    allowed = mask.flat
    if not allowed.any():
        return int(np.argmax(joint))
    masked = np.where(allowed, joint, -np.inf)
    return int(np.argmax(masked))


def select_action(
    out: QOutput,
    mask: ActionMask,
    epsilon: float,
    rng: np.random.Generator,
    counters: dict | None = None,
    soft_epsilon: float = 0.0,
) -> Action:
    """Epsilon-greedy over the allowed actions.

    Exploration draws uniformly from the allowed set; with probability
    ``soft_epsilon`` (soft masking, off by default) it instead draws from
    the disallowed set, so the mask can be a strong prior rather than a
    hard constraint.  Greedy selection is always hard-masked.  If the
    mask allows nothing at all we fall back to the full action space and
    bump ``counters["empty_mask_fallback"]``.
    """
    allowed = mask.flat
    if not allowed.any():
        if counters is not None:
            counters["empty_mask_fallback"] = counters.get("empty_mask_fallback", 0) + 1
        allowed = np.ones(N_JOINT, dtype=bool)
    if rng.random() < epsilon:
        pool = np.flatnonzero(allowed)
        if soft_epsilon > 0.0 and rng.random() < soft_epsilon:
            off = np.flatnonzero(~allowed)
            if off.size:
                pool = off
        flat = int(pool[rng.integers(pool.size)])
        return Action.from_flat(flat)
    joint = (out.q_type[0][:, None] + out.q_bin[0][None, :]).reshape(N_JOINT)
    masked = np.where(allowed, joint, -np.inf)
    return Action.from_flat(int(np.argmax(masked)))
