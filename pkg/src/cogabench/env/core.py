"""Deterministic simulated GUI episodes.

An episode renders a 160x210 RGB screen: an instruction bar on top and
flat-color widgets below. Actions address bin centers; semantics are:
hitting an interactive element with its affordable action type runs the
task rule for it, any other action type on an interactive element fails
the episode with reward -1, and actions landing on background (or on
decorative elements) consume a step with reward 0.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from ..actions import SCREEN_H, SCREEN_W, Action, ActionType, bin_center, N_BINS
from ..affordance.core import Affordance, AffordanceSet
from ..errors import ConfigurationError, ProtocolError
from ..vision import BBox
from . import draw, font

BAR_H = 24
CONTENT_TOP = BAR_H

BG = (255, 255, 255)
BAR_BG = (255, 255, 204)
WIDGET_FILL = (221, 221, 221)
WIDGET_BORDER = (136, 136, 136)
INK = (0, 0, 0)
FOCUS_BORDER = (204, 0, 0)
DRAG_FILL = (170, 170, 170)
TARGET_FILL = (204, 221, 221)
TARGET_BORDER = (68, 68, 68)
SHAPE_FILL = (51, 85, 170)

_WRAP_COLS = 26


@dataclass(frozen=True)
class Observation:
    pixels: np.ndarray
    instruction: str

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.shape != (SCREEN_H, SCREEN_W, 3):
            raise ValueError(f"observation pixels {px.shape} != {(SCREEN_H, SCREEN_W, 3)}")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        if not self.instruction:
            raise ValueError("instruction must be non-empty")


@dataclass(frozen=True)
class StepResult:
    observation: Observation
    reward: float
    done: bool
    success: bool

    def __post_init__(self):
        if self.success and not self.done:
            raise ValueError("success implies done")
        if self.reward > 0 and not self.success:
            raise ValueError("positive reward implies success")
        if not self.done and self.reward != 0:
            raise ValueError("non-terminal reward must be 0")
        if not -1 <= self.reward <= 1:
            raise ValueError(f"reward {self.reward} outside [-1,1]")


@dataclass
class GuiElement:
    kind: str  # button | tab | checkbox | text_field | shape | draggable
    bbox: BBox
    label: str = ""
    visual_state: str = "normal"  # normal | checked | focused | dragging
    interactive: bool = True
    object_name: str = ""


class Outcome(Enum):
    SUCCESS = "success"
    FAIL = "fail"
    NEUTRAL = "neutral"


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    max_steps: int = 10
    family_id: str = ""

    def __post_init__(self):
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be positive")
        if not self.family_id:
            object.__setattr__(self, "family_id", family_of(self.task_id))


class TaskLogic:
    """Per-task rules; subclasses own elements and episode state."""

    id: str = ""
    family: str = ""

    def reset(self, layout_rng: np.random.Generator, task_rng: np.random.Generator) -> None:
        raise NotImplementedError

    @property
    def elements(self) -> list[GuiElement]:
        raise NotImplementedError

    @property
    def instruction(self) -> str:
        raise NotImplementedError

    def element_action(
        self, element: GuiElement, action_type: ActionType, x: int, y: int
    ) -> Outcome:
        raise NotImplementedError

    def background_action(self, action_type: ActionType, x: int, y: int) -> Outcome:
        return Outcome.NEUTRAL

    def oracle(self) -> list[Affordance]:
        raise NotImplementedError

    def expert(self) -> Action:
        raise NotImplementedError

    def render_extras(self, img: np.ndarray) -> None:
        pass


def _digest(text: str) -> int:
    return int.from_bytes(hashlib.blake2s(text.encode()).digest()[:8], "little")


def target_bin(bbox: BBox) -> int:
    """The bin an optimal actor aims at: center-inside bin nearest bbox center."""
    cx = (bbox.x_left + bbox.x_right) // 2
    cy = (bbox.y_up + bbox.y_down) // 2
    best, best_d = None, None
    for b in range(N_BINS):
        x, y = bin_center(b)
        if bbox.x_left <= x < bbox.x_right and bbox.y_up <= y < bbox.y_down:
            d = (x - cx) ** 2 + (y - cy) ** 2
            if best is None or d < best_d:
                best, best_d = b, d
    if best is None:
        raise ValueError(f"no bin center inside {bbox.as_tuple()}")
    return best


def _wrap(text: str, cols: int = _WRAP_COLS) -> list[str]:
    lines, cur = [], ""
    for word in text.split():
        cand = f"{cur} {word}".strip()
        if len(cand) <= cols:
            cur = cand
        else:
            if cur:
                lines.append(cur)
            cur = word
    if cur:
        lines.append(cur)
    return lines or [text]


def render_screen(elements: list[GuiElement], instruction: str, extras=None) -> np.ndarray:
    img = np.empty((SCREEN_H, SCREEN_W, 3), dtype=np.uint8)
    img[:] = BG
    img[0:BAR_H] = BAR_BG
    lines = _wrap(instruction)
    y0 = max(1, (BAR_H - (8 * len(lines) - 1)) // 2)
    for i, line in enumerate(lines):
        font.draw_text(img, 4, y0 + 8 * i, line, INK)
    for el in elements:
        _render_element(img, el)
    if extras is not None:
        extras(img)
    return img


def _label_scale(el: GuiElement) -> int:
    # largest integer scale that fits; big labels survive the 2x observation
    # subsample, which matters for pixel-only agents
    for s in (4, 3, 2):
        if (
            font.text_width(el.label, s) <= el.bbox.width - 4
            and s * font.GLYPH_H <= el.bbox.height - 2
        ):
            return s
    return 1


def _render_element(img: np.ndarray, el: GuiElement) -> None:
    b = el.bbox
    if el.kind in ("button", "tab"):
        draw.fill_rect(img, b, WIDGET_FILL)
        if el.visual_state == "focused":
            draw.rect_border(img, b, FOCUS_BORDER, 2)
        else:
            draw.rect_border(img, b, WIDGET_BORDER, 1)
        if el.label:
            s = _label_scale(el)
            tx = b.x_left + (b.width - font.text_width(el.label, s)) // 2
            ty = b.y_up + (b.height - font.GLYPH_H * s) // 2
            font.draw_text(img, tx, ty, el.label, INK, s)
    elif el.kind == "checkbox":
        draw.fill_rect(img, b, WIDGET_FILL)
        draw.rect_border(img, b, INK, 1)
        if el.visual_state == "checked":
            inner = BBox(b.x_left + 3, b.y_up + 3, b.x_right - 3, b.y_down - 3)
            draw.fill_rect(img, inner, INK)
        if el.label:
            font.draw_text(img, b.x_right + 5, b.y_up + (b.height - font.GLYPH_H) // 2, el.label, INK)
    elif el.kind == "draggable":
        draw.fill_rect(img, b, DRAG_FILL)
        draw.rect_border(img, b, INK, 1)
    elif el.kind == "text_field":
        draw.fill_rect(img, b, WIDGET_FILL)
        draw.rect_border(img, b, WIDGET_BORDER, 1)
    elif el.kind == "shape":
        draw.fill_rect(img, b, WIDGET_FILL)
    elif el.kind == "target":
        draw.fill_rect(img, b, TARGET_FILL)
        draw.rect_border(img, b, TARGET_BORDER, 1)
    else:
        raise ConfigurationError(f"unknown element kind {el.kind!r}")


class Env:
    """One task instance; reset/step with strict episode bookkeeping."""

    def __init__(self, spec: TaskSpec):
        from .tasks import REGISTRY  # local import to avoid a cycle

        if spec.task_id not in REGISTRY:
            raise ConfigurationError(f"unknown task_id {spec.task_id!r}")
        self.spec = spec
        self._logic: TaskLogic = REGISTRY[spec.task_id]()
        self._active = False
        self._done = True
        self._steps = 0
        self._seed: Optional[int] = None

    def reset(self, seed: int) -> Observation:
        if seed < 0:
            raise ConfigurationError("seed must be >= 0")
        layout_rng = np.random.default_rng(
            np.random.SeedSequence([_digest("layout"), _digest(self._logic.family), seed])
        )
        task_rng = np.random.default_rng(
            np.random.SeedSequence([_digest("task"), _digest(self.spec.task_id), seed])
        )
        self._logic.reset(layout_rng, task_rng)
        self._active = True
        self._done = False
        self._steps = 0
        self._seed = seed
        return self._observe()

    def _observe(self) -> Observation:
        pixels = render_screen(
            self._logic.elements, self._logic.instruction, self._logic.render_extras
        )
        return Observation(pixels=pixels, instruction=self._logic.instruction)

    def _hit(self, x: int, y: int) -> Optional[GuiElement]:
        for el in reversed(self._logic.elements):
            if not el.interactive:
                continue
            b = el.bbox
            if b.x_left <= x < b.x_right and b.y_up <= y < b.y_down:
                return el
        return None

    def step(self, action: Action) -> StepResult:
        if self._done:
            raise ProtocolError("step() after episode end; call reset()")
        x, y = action.point
        el = self._hit(x, y)
        if el is None:
            outcome = self._logic.background_action(action.action_type, x, y)
        else:
            outcome = self._logic.element_action(el, action.action_type, x, y)
        self._steps += 1
        success = outcome is Outcome.SUCCESS
        if success:
            reward, done = max(0.1, 1 - self._steps / self.spec.max_steps), True
        elif outcome is Outcome.FAIL or self._steps >= self.spec.max_steps:
            reward, done = -1.0, True
        else:
            reward, done = 0.0, False
        self._done = done
        return StepResult(self._observe(), reward, done, success)

    def oracle_affordances(self) -> AffordanceSet:
        self._require_active()
        return AffordanceSet(self._logic.oracle())

    def scripted_expert(self, rng: Optional[np.random.Generator] = None) -> Action:
        self._require_active()
        return self._logic.expert()

    def _require_active(self) -> None:
        if not self._active or self._done:
            raise ProtocolError("no active episode")

    @property
    def elements(self) -> list[GuiElement]:
        return self._logic.elements

    @property
    def instruction(self) -> str:
        return self._logic.instruction

    @property
    def done(self) -> bool:
        return self._done

    @property
    def steps_used(self) -> int:
        return self._steps


def family_of(task_id: str) -> str:
    from .tasks import REGISTRY

    if task_id not in REGISTRY:
        raise ConfigurationError(f"unknown task_id {task_id!r}")
    return REGISTRY[task_id].family


def make(task_id: str, max_steps: int = 10) -> Env:
    return Env(TaskSpec(task_id=task_id, max_steps=max_steps))


def task_ids() -> tuple[str, ...]:
    from .tasks import REGISTRY

    return tuple(REGISTRY)
