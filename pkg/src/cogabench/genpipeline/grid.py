"""Coordinate-grid overlay shown to the vision model.

Gridlines let a chat model answer pixel bounding boxes; the overlay is a
copy, never a mutation, so the same observation can also be used
ungridded.
"""

from __future__ import annotations

import numpy as np

from ..env import font
from ..errors import ConfigurationError

LINE_COLOR = (110, 110, 110)
LABEL_COLOR = (70, 70, 70)


def _label_step(spacing: int) -> int:
    # labels are ~12 px wide; skip lines until consecutive labels fit
    step = spacing
    while step < 16:
        step += spacing
    return step


def overlay_grid(obs, spacing: int = 10) -> np.ndarray:
    """Copy of the observation with 1-px gridlines and edge tick labels."""
    if spacing < 5:
        raise ConfigurationError(f"grid spacing must be >= 5, got {spacing}")
    pixels = np.asarray(getattr(obs, "pixels", obs))
    img = pixels.copy()
    h, w = img.shape[:2]
    for x in range(0, w, spacing):
        img[:, x] = LINE_COLOR
    for y in range(0, h, spacing):
        img[y, :] = LINE_COLOR
    step = _label_step(spacing)
    for x in range(step, w, step):
        font.draw_text(img, x + 2, 1, str(x), LABEL_COLOR)
    for y in range(step, h, step):
        font.draw_text(img, 1, y + 2, str(y), LABEL_COLOR)
    return img
