"""Template extraction: ask the vision client for object bounding boxes on
gridded observations, crop, grayscale, and save."""

from __future__ import annotations

import logging
import re
from pathlib import Path
from string import Template

import numpy as np

from ..actions import SCREEN_H, SCREEN_W
from ..env import make
from ..errors import GenerationError
from ..vision import BBox, crop, save_gray_png, to_grayscale
from .client import ChatClient
from .grid import overlay_grid

log = logging.getLogger(__name__)

# distinct from the builtin-provider seeds and the verification test cases
EXTRACTION_SEEDS = (301, 302, 303, 304, 305)

PROMPT_DIR = Path(__file__).parent / "prompts"

_BBOX_RE = re.compile(
    r"\[\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*\]"
)


def load_prompt(name: str, **subs) -> str:
    text = (PROMPT_DIR / name).read_text()
    return Template(text).substitute(**subs)


def parse_bbox(reply: str) -> BBox | None:
    """First '[x1, y1, x2, y2]' in the reply, clamped to the screen.

    Returns None when nothing parses or the clamped box is empty.
    """
    m = _BBOX_RE.search(reply)
    if not m:
        return None
    x1, y1, x2, y2 = (int(g) for g in m.groups())
    x1, x2 = max(0, x1), min(SCREEN_W, x2)
    y1, y2 = max(0, y1), min(SCREEN_H, y2)
    if x1 >= x2 or y1 >= y2:
        return None
    return BBox(x1, y1, x2, y2)


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-") or "object"


def extract_templates(task_id: str, client: ChatClient, objects: list[str],
                      out_dir: str | Path, n_obs: int = 5,
                      spacing: int = 10) -> list[Path]:
    """One bbox request per (observation, object); crops saved as PNGs.

    A reply that does not parse is retried once with a stricter prompt,
    then skipped with a warning. An object whose every request fails is a
    hard error: the script generation step cannot proceed without any
    template for it.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    env = make(task_id)
    seeds = EXTRACTION_SEEDS[:n_obs] if n_obs <= len(EXTRACTION_SEEDS) else tuple(
        EXTRACTION_SEEDS[0] + i for i in range(n_obs)
    )
    saved: list[Path] = []
    per_object = {obj: 0 for obj in objects}
    for k, seed in enumerate(seeds, 1):
        obs = env.reset(seed=seed)
        gridded = overlay_grid(obs.pixels, spacing)
        gray = to_grayscale(obs.pixels)
        for obj in objects:
            reply = client.send(load_prompt("04_bbox_request.txt", object=obj),
                                [gridded])
            box = parse_bbox(reply)
            if box is None:
                reply = client.send(load_prompt("05_bbox_retry.txt", object=obj),
                                    [gridded])
                box = parse_bbox(reply)
            if box is None:
                log.warning("no parseable bbox for %r on observation %d; skipped",
                            obj, k)
                continue
            path = out_dir / f"{_slug(obj)}_{k}.png"
            save_gray_png(crop(gray, box), path)
            saved.append(path)
            per_object[obj] += 1
    missing = [obj for obj, n in per_object.items() if n == 0]
    if missing:
        raise GenerationError(
            f"no template could be extracted for object(s) {missing} on task {task_id}"
        )
    return saved
