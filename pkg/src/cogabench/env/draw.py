"""Flat-color drawing primitives on (H, W, 3) uint8 canvases."""

from __future__ import annotations

import numpy as np

from ..vision import BBox


def fill_rect(img: np.ndarray, bbox: BBox, color) -> None:
    h, w = img.shape[:2]
    x1, y1 = max(0, bbox.x_left), max(0, bbox.y_up)
    x2, y2 = min(w, bbox.x_right), min(h, bbox.y_down)
    if x1 < x2 and y1 < y2:
        img[y1:y2, x1:x2] = color


def rect_border(img: np.ndarray, bbox: BBox, color, thickness: int = 1) -> None:
    x1, y1, x2, y2 = bbox.as_tuple()
    t = thickness
    fill_rect(img, BBox(x1, y1, x2, min(y1 + t, y2)), color)
    fill_rect(img, BBox(x1, max(y2 - t, y1), x2, y2), color)
    fill_rect(img, BBox(x1, y1, min(x1 + t, x2), y2), color)
    fill_rect(img, BBox(max(x2 - t, x1), y1, x2, y2), color)


def fill_polygon(img: np.ndarray, points: list[tuple[float, float]], color) -> None:
    """Even-odd scanline fill over float vertex coordinates."""
    h, w = img.shape[:2]
    n = len(points)
    ys = [p[1] for p in points]
    y_lo = max(0, int(np.floor(min(ys))))
    y_hi = min(h - 1, int(np.ceil(max(ys))))
    for y in range(y_lo, y_hi + 1):
        yc = y + 0.5
        xs = []
        for i in range(n):
            x0, y0 = points[i]
            x1, y1 = points[(i + 1) % n]
            if (y0 <= yc < y1) or (y1 <= yc < y0):
                xs.append(x0 + (yc - y0) * (x1 - x0) / (y1 - y0))
        xs.sort()
        for j in range(0, len(xs) - 1, 2):
            a = max(0, int(np.ceil(xs[j] - 0.5)))
            b = min(w, int(np.floor(xs[j + 1] - 0.5)) + 1)
            if a < b:
                img[y, a:b] = color


def regular_polygon(cx: float, cy: float, radius: float, sides: int) -> list[tuple[float, float]]:
    """Vertices of a regular polygon, first vertex pointing up."""
    angles = [-np.pi / 2 + 2 * np.pi * k / sides for k in range(sides)]
    return [(cx + radius * np.cos(a), cy + radius * np.sin(a)) for a in angles]
