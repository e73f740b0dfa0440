"""Affordance providers: builtin template-matching references, the oracle
shortcut, external-script execution, and the recall-ablation wrapper.

Builtin providers never read simulator internals at query time: they crop
grayscale templates from a handful of seeded observations once (using the
oracle only to locate elements, the same role the papered-over human or
VLM plays), then answer queries purely by template matching.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from ..actions import ActionType
from ..errors import ConfigurationError
from ..vision import BBox, crop, match_template, to_grayscale
from .core import Affordance, AffordanceSet
from .protocol import DEFAULT_TIMEOUT, run_external_script

TEMPLATE_SEEDS = (101, 102, 103, 104, 105)
CONTENT_TOP = 24  # template search skips the instruction bar
DEFAULT_MATCH_THRESHOLD = 0.9


def _obs_pixels(obs) -> np.ndarray:
    return np.asarray(getattr(obs, "pixels", obs))


class _CachedProvider:
    """Deterministic provider with an LRU keyed by observation bytes."""

    kind = "abstract"
    identity = ""

    def __init__(self, cache_size: int = 256):
        self._cache: OrderedDict[bytes, AffordanceSet] = OrderedDict()
        self._cache_size = cache_size

    def query(self, obs) -> AffordanceSet:
        pixels = _obs_pixels(obs)
        key = hashlib.blake2s(pixels.tobytes()).digest()
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        result = self._compute(pixels)
        self._cache[key] = result
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return result

    __call__ = query

    def _compute(self, pixels: np.ndarray) -> AffordanceSet:
        raise NotImplementedError


class BuiltinProvider(_CachedProvider):
    kind = "builtin"

    def __init__(self, task_id: str, threshold: float = DEFAULT_MATCH_THRESHOLD):
        super().__init__()
        from ..env import TASK_IDS, make

        if task_id not in TASK_IDS:
            raise ConfigurationError(f"unknown task {task_id!r}")
        self.identity = task_id
        self.threshold = threshold
        env = make(task_id)
        seen: set[tuple[int, bytes, tuple[int, int]]] = set()
        self._library: list[tuple[ActionType, np.ndarray]] = []
        for seed in TEMPLATE_SEEDS:
            obs = env.reset(seed)
            gray = to_grayscale(obs.pixels)
            for aff in env.oracle_affordances():
                tpl = crop(gray, aff.bbox)
                key = (int(aff.action_type), tpl.tobytes(), tpl.shape)
                if key not in seen:
                    seen.add(key)
                    self._library.append((aff.action_type, tpl))

    def _compute(self, pixels: np.ndarray) -> AffordanceSet:
        gray = to_grayscale(pixels)[CONTENT_TOP:]
        found: list[Affordance] = []
        for action_type, tpl in self._library:
            for box in match_template(gray, tpl, threshold=self.threshold):
                found.append(Affordance(action_type, box.shift(0, CONTENT_TOP)))
        return AffordanceSet(found)


class OracleProvider:
    """Reads affordances straight from the simulator. Baseline plumbing for
    the harness; not a vision pipeline, so keep it out of any F1 claims."""

    kind = "oracle"

    def __init__(self, env):
        self.identity = env.spec.task_id
        self._env = env

    def query(self, obs) -> AffordanceSet:
        return self._env.oracle_affordances()

    __call__ = query


class ExternalScriptProvider(_CachedProvider):
    kind = "external_script"

    def __init__(self, script: str | Path, timeout: float = DEFAULT_TIMEOUT):
        super().__init__()
        self.script = Path(script)
        self.identity = str(script)
        self.timeout = timeout

    def _compute(self, pixels: np.ndarray) -> AffordanceSet:
        return run_external_script(self.script, pixels, timeout=self.timeout)


class DroppingProvider:
    """Recall-ablation wrapper: drops a seeded fraction of each answer.

    drop_fraction = 0 returns the inner answer object untouched (bit-exact
    identity with the unwrapped provider); 1.0 always answers empty.
    """

    kind = "dropping"

    def __init__(self, inner, drop_fraction: float, seed: int):
        if not 0 <= drop_fraction <= 1:
            raise ConfigurationError("drop_fraction must be in [0,1]")
        self.inner = inner
        self.identity = f"{getattr(inner, 'identity', '?')}~drop={drop_fraction:g}"
        self.drop_fraction = drop_fraction
        self._rng = np.random.default_rng(np.random.SeedSequence([0xD609, seed]))

    def query(self, obs) -> AffordanceSet:
        full = self.inner.query(obs)
        if self.drop_fraction == 0.0:
            return full
        if self.drop_fraction == 1.0:
            return AffordanceSet()
        items = sorted(full)
        n_drop = int(round(self.drop_fraction * len(items)))
        if n_drop == 0:
            return full
        dropped = set(self._rng.choice(len(items), size=n_drop, replace=False).tolist())
        return AffordanceSet(a for i, a in enumerate(items) if i not in dropped)

    __call__ = query


def builtin_provider(task_id: str, threshold: float = DEFAULT_MATCH_THRESHOLD) -> BuiltinProvider:
    return BuiltinProvider(task_id, threshold=threshold)


AffordanceProvider = Callable[..., AffordanceSet]  # anything with .query(obs)


def provider_f1(provider, task_id: str, seeds: Iterable[int] = range(100)):
    """Mean P/R/F1 of a provider against the oracle on reset observations."""
    from ..env import make
    from ..metrics import mean_f1_over_cases, precision_recall

    env = make(task_id)
    reports = []
    for seed in seeds:
        obs = env.reset(seed)
        reports.append(precision_recall(provider.query(obs), env.oracle_affordances()))
    return mean_f1_over_cases(reports)
