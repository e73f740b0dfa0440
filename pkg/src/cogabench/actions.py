"""Joint action space: 4 action types over a 32x32 grid of screen bins.

The 160x210 screen is split into 32 columns and 32 rows; cell boundaries
along an axis of length D are floor(b*D/32), so columns are exactly 5 px
wide while row heights alternate between 6 and 7 px. A bin index encodes
(row, col) as row*32 + col, and an action addresses the center pixel of
its bin cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .vision import BBox

SCREEN_W = 160
SCREEN_H = 210
GRID = 32
N_BINS = GRID * GRID
N_ACTION_TYPES = 4
N_JOINT = N_ACTION_TYPES * N_BINS


class ActionType(IntEnum):
    CLICK_COORDS = 0
    DBLCLICK_COORDS = 1
    BEGIN_DRAG = 2
    END_DRAG = 3


ACTION_NAMES = tuple(t.name for t in ActionType)

# boundary b of axis D sits at floor(b*D/32); arrays have 33 entries
X_BOUNDS = np.array([(b * SCREEN_W) // GRID for b in range(GRID + 1)], dtype=np.int64)
Y_BOUNDS = np.array([(b * SCREEN_H) // GRID for b in range(GRID + 1)], dtype=np.int64)


@dataclass(frozen=True)
class Action:
    action_type: ActionType
    bin: int

    def __post_init__(self):
        if not 0 <= self.bin < N_BINS:
            raise ValueError(f"bin {self.bin} out of [0,{N_BINS})")

    @property
    def flat(self) -> int:
        return int(self.action_type) * N_BINS + self.bin

    @property
    def point(self) -> tuple[int, int]:
        return bin_center(self.bin)

    @classmethod
    def from_flat(cls, flat: int) -> "Action":
        if not 0 <= flat < N_JOINT:
            raise ValueError(f"flat index {flat} out of [0,{N_JOINT})")
        return cls(ActionType(flat // N_BINS), flat % N_BINS)


def bin_cell(bin_index: int) -> BBox:
    """Pixel cell covered by a bin, half-open."""
    if not 0 <= bin_index < N_BINS:
        raise ValueError(f"bin {bin_index} out of [0,{N_BINS})")
    row, col = bin_index // GRID, bin_index % GRID
    return BBox(
        int(X_BOUNDS[col]), int(Y_BOUNDS[row]), int(X_BOUNDS[col + 1]), int(Y_BOUNDS[row + 1])
    )


def bin_center(bin_index: int) -> tuple[int, int]:
    cell = bin_cell(bin_index)
    return ((cell.x_left + cell.x_right) // 2, (cell.y_up + cell.y_down) // 2)


def point_to_bin(x: int, y: int) -> int:
    """Bin whose cell contains pixel (x, y)."""
    if not (0 <= x < SCREEN_W and 0 <= y < SCREEN_H):
        raise ValueError(f"point ({x},{y}) outside {SCREEN_W}x{SCREEN_H}")
    col = int(np.searchsorted(X_BOUNDS, x, side="right")) - 1
    row = int(np.searchsorted(Y_BOUNDS, y, side="right")) - 1
    return row * GRID + col
