"""Grayscale conversion, template matching, and bounding-box geometry.

Template matching uses zero-normalized cross-correlation (ZNCC): for a
template T placed at (x, y) over a window W of the image,

    R(x, y) = sum(T' * W') / sqrt(sum(T'^2) * sum(W'^2))

with T' = T - mean(T), W' = W - mean(W). Placements where either variance
term is exactly zero produce no match. Window sums are computed with exact
integer arithmetic (images are 8-bit) so the zero-variance test is exact;
only the cross term goes through an FFT convolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.signal import fftconvolve

# ITU-R BT.601 luma weights.
_LUMA = (0.299, 0.587, 0.114)

DEFAULT_MATCH_THRESHOLD = 0.5


class DimensionError(ValueError):
    """Template does not fit strictly inside the image."""


class BBoxRangeError(ValueError):
    """Bounding box lies fully outside the image."""


@dataclass(frozen=True, order=True)
class BBox:
    """Pixel-aligned box, half-open on the right and bottom edges."""

    x_left: int
    y_up: int
    x_right: int
    y_down: int

    def __post_init__(self):
        if self.x_left >= self.x_right or self.y_up >= self.y_down:
            raise ValueError(f"degenerate bbox {self.as_tuple()}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x_left, self.y_up, self.x_right, self.y_down)

    @property
    def width(self) -> int:
        return self.x_right - self.x_left

    @property
    def height(self) -> int:
        return self.y_down - self.y_up

    @property
    def area(self) -> int:
        return self.width * self.height

    def shift(self, dx: int, dy: int) -> "BBox":
        return BBox(self.x_left + dx, self.y_up + dy, self.x_right + dx, self.y_down + dy)


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Convert an RGB uint8 image (H, W, 3) to single-channel uint8 luma."""
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected 3-channel image, got shape {arr.shape}")
    r, g, b = (arr[..., i].astype(np.float64) for i in range(3))
    gray = _LUMA[0] * r + _LUMA[1] * g + _LUMA[2] * b
    return np.clip(np.round(gray), 0, 255).astype(np.uint8)


def crop(image: np.ndarray, bbox: BBox | tuple[int, int, int, int]) -> np.ndarray:
    """Copy the pixels under ``bbox``, clamping coordinates to the image.

    A bbox that is empty after clamping (fully outside, or zero width or
    height to begin with) raises :class:`BBoxRangeError`.
    """
    arr = np.asarray(image)
    h, w = arr.shape[:2]
    x1, y1, x2, y2 = bbox.as_tuple() if isinstance(bbox, BBox) else bbox
    x1c, x2c = max(0, x1), min(w, x2)
    y1c, y2c = max(0, y1), min(h, y2)
    if x1c >= x2c or y1c >= y2c:
        raise BBoxRangeError(f"bbox {(x1, y1, x2, y2)} empty after clamping to {w}x{h}")
    return arr[y1c:y2c, x1c:x2c].copy()


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union with half-open pixel-area semantics."""
    ix = min(a.x_right, b.x_right) - max(a.x_left, b.x_left)
    iy = min(a.y_down, b.y_down) - max(a.y_up, b.y_up)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union


def _window_sums(image: np.ndarray, th: int, tw: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact per-placement window sums and sums of squares (int64)."""
    img = image.astype(np.int64)
    # Summed-area tables with a zero border row/column.
    sat = np.zeros((image.shape[0] + 1, image.shape[1] + 1), dtype=np.int64)
    sat2 = np.zeros_like(sat)
    np.cumsum(np.cumsum(img, axis=0), axis=1, out=sat[1:, 1:])
    np.cumsum(np.cumsum(img * img, axis=0), axis=1, out=sat2[1:, 1:])

    def box(s):
        return s[th:, tw:] - s[:-th, tw:] - s[th:, :-tw] + s[:-th, :-tw]

    return box(sat), box(sat2)


def zncc_map(image: np.ndarray, template: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """ZNCC response for every placement of ``template`` on ``image``.

    Returns ``(scores, valid)`` of shape (H-th+1, W-tw+1): ``valid`` is false
    where either the window or the template has zero variance (there the
    score is left at 0).
    """
    img = np.asarray(image)
    tpl = np.asarray(template)
    if img.ndim != 2 or tpl.ndim != 2:
        raise ValueError("zncc_map expects single-channel images")
    th, tw = tpl.shape
    if th >= img.shape[0] or tw >= img.shape[1]:
        raise DimensionError(
            f"template {tpl.shape} must be strictly smaller than image {img.shape}"
        )

    n = th * tw
    t = tpl.astype(np.int64)
    t_sum = int(t.sum())
    t_sq = int((t * t).sum())
    n_var_t = n * t_sq - t_sum * t_sum  # n * variance(T), exact
    h_out = img.shape[0] - th + 1
    w_out = img.shape[1] - tw + 1
    if n_var_t == 0:
        return np.zeros((h_out, w_out)), np.zeros((h_out, w_out), dtype=bool)

    w_sum, w_sq = _window_sums(img, th, tw)
    n_var_w = n * w_sq - w_sum * w_sum  # exact integers, 0 iff window constant

    cross = fftconvolve(img.astype(np.float64), tpl[::-1, ::-1].astype(np.float64), mode="valid")
    numer = n * cross - t_sum * w_sum.astype(np.float64)

    valid = n_var_w > 0
    denom = np.sqrt(n_var_w.astype(np.float64) * float(n_var_t), where=valid, out=np.ones_like(numer))
    scores = np.zeros_like(numer)
    np.divide(numer, denom, where=valid, out=scores)
    # |R| <= 1 holds exactly; only float rounding can poke past it.
    np.clip(scores, -1.0, 1.0, out=scores)
    scores[~valid] = 0.0
    return scores, valid


def match_template(
    image: np.ndarray,
    template: np.ndarray,
    threshold: float = DEFAULT_MATCH_THRESHOLD,
    nms: bool = False,
) -> list[BBox]:
    """Return a bbox for every placement whose ZNCC score reaches ``threshold``.

    No non-maximum suppression by default: overlapping above-threshold
    placements are all returned. With ``nms=True``, greedily keep the
    highest-scoring placement and drop others overlapping it (IoU > 0).
    """
    scores, valid = zncc_map(image, template)
    th, tw = np.asarray(template).shape
    ys, xs = np.nonzero(valid & (scores >= threshold))
    boxes = [BBox(int(x), int(y), int(x) + tw, int(y) + th) for y, x in zip(ys, xs)]
    if not nms or len(boxes) <= 1:
        return boxes
    order = np.argsort([-scores[b.y_up, b.x_left] for b in boxes], kind="stable")
    kept: list[BBox] = []
    for i in order:
        if all(iou(boxes[i], k) == 0.0 for k in kept):
            kept.append(boxes[i])
    return sorted(kept)


def draw_matches(image_gray: np.ndarray, boxes: list[BBox], thickness: int = 1) -> np.ndarray:
    """Debug overlay: matched boxes drawn in green on an RGB copy."""
    rgb = np.repeat(np.asarray(image_gray)[..., None], 3, axis=2).astype(np.uint8)
    h, w = rgb.shape[:2]
    for b in boxes:
        x1, y1 = max(0, b.x_left), max(0, b.y_up)
        x2, y2 = min(w, b.x_right), min(h, b.y_down)
        for k in range(thickness):
            if y1 + k < h:
                rgb[y1 + k, x1:x2] = (0, 255, 0)
            if y2 - 1 - k >= 0:
                rgb[y2 - 1 - k, x1:x2] = (0, 255, 0)
            if x1 + k < w:
                rgb[y1:y2, x1 + k] = (0, 255, 0)
            if x2 - 1 - k >= 0:
                rgb[y1:y2, x2 - 1 - k] = (0, 255, 0)
    return rgb


def save_gray_png(image: np.ndarray, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="L").save(path)


def load_gray_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


def template_path(root: str | Path, task: str, object_name: str, k: int) -> Path:
    """Canonical on-disk location for a saved template image."""
    return Path(root) / task / f"{object_name}_{k}.png"
