"""Affordances, their wire form, and the bbox-to-bin hard mask."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from ..actions import (
    GRID,
    N_ACTION_TYPES,
    N_BINS,
    SCREEN_H,
    SCREEN_W,
    X_BOUNDS,
    Y_BOUNDS,
    ActionType,
)
from ..vision import BBox


@dataclass(frozen=True, order=True)
class Affordance:
    """One affordable action: an action type applied anywhere inside a bbox."""

    action_type: ActionType
    bbox: BBox

    def to_wire(self) -> dict:
        return {"action": self.action_type.name, "coords": list(self.bbox.as_tuple())}

    @classmethod
    def from_wire(cls, obj: dict) -> "Affordance":
        name = obj["action"]
        if name not in ActionType.__members__:
            raise ValueError(f"unknown action name {name!r}")
        coords = obj["coords"]
        if len(coords) != 4 or not all(isinstance(c, int) for c in coords):
            raise ValueError(f"coords must be 4 integers, got {coords!r}")
        x1, y1, x2, y2 = coords
        # Generated scripts sometimes overshoot the screen; trim, reject empty.
        x1, x2 = max(0, x1), min(SCREEN_W, x2)
        y1, y2 = max(0, y1), min(SCREEN_H, y2)
        if x1 >= x2 or y1 >= y2:
            raise ValueError(f"coords {coords!r} empty after clamping to screen")
        return cls(ActionType[name], BBox(x1, y1, x2, y2))


class AffordanceSet:
    """Deduplicated, order-insensitive collection of affordances."""

    def __init__(self, items: Iterable[Affordance] = ()):
        self._items = frozenset(items)

    def __iter__(self) -> Iterator[Affordance]:
        return iter(sorted(self._items))

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, item: Affordance) -> bool:
        return item in self._items

    def __eq__(self, other) -> bool:
        return isinstance(other, AffordanceSet) and self._items == other._items

    def __hash__(self) -> int:
        return hash(self._items)

    def __repr__(self) -> str:
        return f"AffordanceSet({sorted(self._items)!r})"

    def to_wire(self) -> dict:
        return {"affordances": [a.to_wire() for a in self]}

    @classmethod
    def from_wire(cls, obj: dict) -> "AffordanceSet":
        if not isinstance(obj, dict) or "affordances" not in obj:
            raise ValueError("response must be an object with an 'affordances' list")
        items = obj["affordances"]
        if not isinstance(items, list):
            raise ValueError("'affordances' must be a list")
        return cls(Affordance.from_wire(a) for a in items)


def bbox_to_bins(bbox: BBox) -> frozenset[int]:
    """All bins whose cell overlaps ``bbox`` with nonzero area."""
    x1, x2 = max(0, bbox.x_left), min(SCREEN_W, bbox.x_right)
    y1, y2 = max(0, bbox.y_up), min(SCREEN_H, bbox.y_down)
    if x1 >= x2 or y1 >= y2:
        return frozenset()
    c1 = int(np.searchsorted(X_BOUNDS, x1, side="right")) - 1
    c2 = int(np.searchsorted(X_BOUNDS, x2 - 1, side="right")) - 1
    r1 = int(np.searchsorted(Y_BOUNDS, y1, side="right")) - 1
    r2 = int(np.searchsorted(Y_BOUNDS, y2 - 1, side="right")) - 1
    return frozenset(r * GRID + c for r in range(r1, r2 + 1) for c in range(c1, c2 + 1))


@dataclass(frozen=True)
class ActionMask:
    """Boolean 4x1024 table of allowed (action type, bin) pairs."""

    allowed: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.allowed, dtype=bool)
        if arr.shape != (N_ACTION_TYPES, N_BINS):
            raise ValueError(f"mask shape {arr.shape} != {(N_ACTION_TYPES, N_BINS)}")
        arr.setflags(write=False)
        object.__setattr__(self, "allowed", arr)

    @classmethod
    def all_true(cls) -> "ActionMask":
        return cls(np.ones((N_ACTION_TYPES, N_BINS), dtype=bool))

    @classmethod
    def none(cls) -> "ActionMask":
        return cls(np.zeros((N_ACTION_TYPES, N_BINS), dtype=bool))

    @property
    def flat(self) -> np.ndarray:
        return self.allowed.reshape(-1)

    @property
    def count(self) -> int:
        return int(self.allowed.sum())

    def is_empty(self) -> bool:
        return not self.allowed.any()

    def pack(self) -> bytes:
        """Compact byte form for replay storage."""
        return np.packbits(self.allowed).tobytes()

    @classmethod
    def unpack(cls, raw: bytes) -> "ActionMask":
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
        return cls(bits[: N_ACTION_TYPES * N_BINS].reshape(N_ACTION_TYPES, N_BINS).astype(bool))


def build_mask(aff: AffordanceSet) -> ActionMask:
    """allowed[t][b] is true iff some type-t affordance's bbox covers bin b."""
    allowed = np.zeros((N_ACTION_TYPES, N_BINS), dtype=bool)
    for a in aff:
        bins = sorted(bbox_to_bins(a.bbox))
        allowed[int(a.action_type), bins] = True
    return ActionMask(allowed)
