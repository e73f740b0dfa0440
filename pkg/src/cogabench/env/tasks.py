"""The seven task definitions.

click-test-2 and click-button-sequence share the "two-buttons" family:
their element layout is sampled from a family-keyed generator, so for a
given seed both tasks render identical screens (only instructions and
success rules differ).
"""

from __future__ import annotations

import numpy as np

from ..actions import Action, ActionType, X_BOUNDS, Y_BOUNDS
from ..affordance.core import Affordance
from ..vision import BBox
from . import draw
from .core import (
    CONTENT_TOP,
    SCREEN_H,
    SCREEN_W,
    SHAPE_FILL,
    GuiElement,
    Outcome,
    TaskLogic,
    target_bin,
)


def _snapped(x_bin: int, y_bin: int, w_bins: int, h_bins: int) -> BBox:
    """Box covering whole action-grid cells.

    Click targets snap to the grid so that an affordance bbox admits no
    degenerate bins (cells whose center misses the element).
    """
    return BBox(
        int(X_BOUNDS[x_bin]),
        int(Y_BOUNDS[y_bin]),
        int(X_BOUNDS[x_bin + w_bins]),
        int(Y_BOUNDS[y_bin + h_bins]),
    )

CHECKBOX_WORDS = ("RED", "BLUE", "GOLD", "MINT", "PLUM", "TEAL", "LIME", "ROSE")


class _SingleClickTask(TaskLogic):
    """Shared plumbing for tasks where one CLICK ends the episode."""

    def __init__(self):
        self._elements: list[GuiElement] = []
        self._instruction = ""

    @property
    def elements(self):
        return self._elements

    @property
    def instruction(self):
        return self._instruction

    def oracle(self):
        return [
            Affordance(ActionType.CLICK_COORDS, el.bbox)
            for el in self._elements
            if el.interactive
        ]


class ClickTest(_SingleClickTask):
    id = "click-test"
    family = "click-test"

    def reset(self, layout_rng, task_rng):
        box = _snapped(
            x_bin=int(layout_rng.integers(6, 15)),
            y_bin=int(layout_rng.integers(9, 18)),
            w_bins=11,
            h_bins=4,
        )
        self._elements = [GuiElement("button", box, "OK", object_name="button")]
        self._instruction = "Click the button."

    def element_action(self, element, action_type, x, y):
        if action_type is ActionType.CLICK_COORDS:
            return Outcome.SUCCESS
        return Outcome.FAIL

    def expert(self):
        return Action(ActionType.CLICK_COORDS, target_bin(self._elements[0].bbox))


class _TwoButtons(_SingleClickTask):
    """Layout shared by the two-buttons family: buttons ONE and TWO."""

    family = "two-buttons"

    # 75x~32 grid-snapped buttons; labels render at 4x glyph scale, so ONE
    # and TWO stay legible after the agent's 2x observation subsample. The
    # column jitters but stays aligned, keeping the which-is-which cue local.
    W_BINS = 15
    H_BINS = 5

    def _layout(self, layout_rng):
        x_bin = int(layout_rng.integers(6, 10))
        top_bin = int(layout_rng.integers(5, 7))
        bot_bin = top_bin + self.H_BINS + 2
        one_on_top = bool(layout_rng.integers(0, 2))
        rows = (top_bin, bot_bin) if one_on_top else (bot_bin, top_bin)
        self._elements = [
            GuiElement(
                "button",
                _snapped(x_bin, rows[i], self.W_BINS, self.H_BINS),
                label,
                object_name=f"button-{label.lower()}",
            )
            for i, label in enumerate(("ONE", "TWO"))
        ]

    def _button(self, label):
        return next(el for el in self._elements if el.label == label)


class ClickTest2(_TwoButtons):
    id = "click-test-2"

    def reset(self, layout_rng, task_rng):
        self._layout(layout_rng)
        self._goal = "ONE" if task_rng.integers(0, 2) == 0 else "TWO"
        self._instruction = f"Click button {self._goal}."

    def element_action(self, element, action_type, x, y):
        if action_type is ActionType.CLICK_COORDS and element.label == self._goal:
            return Outcome.SUCCESS
        return Outcome.FAIL

    def expert(self):
        return Action(ActionType.CLICK_COORDS, target_bin(self._button(self._goal).bbox))


class ClickButtonSequence(_TwoButtons):
    id = "click-button-sequence"

    def reset(self, layout_rng, task_rng):
        self._layout(layout_rng)
        self._clicked_one = False
        self._instruction = "Click button ONE, then button TWO."

    def element_action(self, element, action_type, x, y):
        if action_type is not ActionType.CLICK_COORDS:
            return Outcome.FAIL
        if element.label == "ONE" and not self._clicked_one:
            self._clicked_one = True
            element.visual_state = "focused"
            return Outcome.NEUTRAL
        if element.label == "TWO" and self._clicked_one:
            return Outcome.SUCCESS
        return Outcome.FAIL

    def expert(self):
        label = "TWO" if self._clicked_one else "ONE"
        return Action(ActionType.CLICK_COORDS, target_bin(self._button(label).bbox))


class ClickTab(_SingleClickTask):
    id = "click-tab"
    family = "click-tab"

    def reset(self, layout_rng, task_rng):
        x0 = 4 + int(layout_rng.integers(0, 7))
        y0 = 30 + int(layout_rng.integers(0, 13))
        self._elements = [
            GuiElement(
                "tab",
                BBox(x0 + i * 48, y0, x0 + i * 48 + 46, y0 + 18),
                f"TAB {i + 1}",
                object_name=f"tab-{i + 1}",
            )
            for i in range(3)
        ]
        self._goal = int(task_rng.integers(1, 4))
        self._instruction = f"Click on Tab {self._goal}."

    def element_action(self, element, action_type, x, y):
        if action_type is ActionType.CLICK_COORDS and element.label == f"TAB {self._goal}":
            return Outcome.SUCCESS
        return Outcome.FAIL

    def expert(self):
        return Action(
            ActionType.CLICK_COORDS, target_bin(self._elements[self._goal - 1].bbox)
        )


class ClickCheckboxes(TaskLogic):
    id = "click-checkboxes"
    family = "click-checkboxes"

    def __init__(self):
        self._elements: list[GuiElement] = []
        self._instruction = ""

    @property
    def elements(self):
        return self._elements

    @property
    def instruction(self):
        return self._instruction

    def reset(self, layout_rng, task_rng):
        n = int(layout_rng.integers(3, 5))
        words = list(layout_rng.choice(CHECKBOX_WORDS, size=n, replace=False))
        x0 = 16 + int(layout_rng.integers(0, 9))
        y0 = 32 + int(layout_rng.integers(0, 5))
        self._elements = [
            GuiElement(
                "checkbox",
                BBox(x0, y0 + i * 26, x0 + 14, y0 + i * 26 + 14),
                w,
                object_name="checkbox",
            )
            for i, w in enumerate(words)
        ]
        sy = y0 + n * 26 + 6
        self._elements.append(
            GuiElement("button", BBox(x0, sy, x0 + 52, sy + 16), "SUBMIT", object_name="submit-button")
        )
        k = int(task_rng.integers(1, min(3, n) + 1))
        named = sorted(task_rng.choice(words, size=k, replace=False).tolist())
        self._named = set(named)
        listed = named[0] if k == 1 else ", ".join(named[:-1]) + " and " + named[-1]
        self._instruction = f"Select {listed} and click Submit."

    def _checked(self):
        return {el.label for el in self._elements if el.visual_state == "checked"}

    def element_action(self, element, action_type, x, y):
        if action_type is not ActionType.CLICK_COORDS:
            return Outcome.FAIL
        if element.kind == "checkbox":
            element.visual_state = "normal" if element.visual_state == "checked" else "checked"
            return Outcome.NEUTRAL
        return Outcome.SUCCESS if self._checked() == self._named else Outcome.FAIL

    def oracle(self):
        return [Affordance(ActionType.CLICK_COORDS, el.bbox) for el in self._elements]

    def expert(self):
        checked = self._checked()
        for el in self._elements:
            if el.kind != "checkbox":
                continue
            wrong = el.label in checked and el.label not in self._named
            missing = el.label not in checked and el.label in self._named
            if wrong or missing:
                return Action(ActionType.CLICK_COORDS, target_bin(el.bbox))
        return Action(ActionType.CLICK_COORDS, target_bin(self._elements[-1].bbox))


class CountSides(_SingleClickTask):
    id = "count-sides"
    family = "count-sides"

    def reset(self, layout_rng, task_rng):
        px = 20 + int(layout_rng.integers(0, 9))
        py = 34 + int(layout_rng.integers(0, 9))
        self._panel = BBox(px, py, px + 84, py + 80)
        self._sides = int(layout_rng.integers(3, 9))
        self._radius = 28 + int(layout_rng.integers(0, 7))
        bx = 8 + int(layout_rng.integers(0, 9))
        by = 168 + int(layout_rng.integers(0, 9))
        self._elements = [
            GuiElement("shape", self._panel, interactive=False, object_name="shape-panel")
        ]
        self._elements += [
            GuiElement(
                "button",
                BBox(bx + i * 24, by, bx + i * 24 + 20, by + 18),
                str(d),
                object_name=f"digit-{d}",
            )
            for i, d in enumerate(range(3, 9))
        ]
        self._instruction = "How many sides does the shape have?"

    def element_action(self, element, action_type, x, y):
        if action_type is ActionType.CLICK_COORDS and element.label == str(self._sides):
            return Outcome.SUCCESS
        return Outcome.FAIL

    def render_extras(self, img):
        cx = (self._panel.x_left + self._panel.x_right) / 2
        cy = (self._panel.y_up + self._panel.y_down) / 2
        draw.fill_polygon(img, draw.regular_polygon(cx, cy, self._radius, self._sides), SHAPE_FILL)

    def expert(self):
        el = next(e for e in self._elements if e.label == str(self._sides))
        return Action(ActionType.CLICK_COORDS, target_bin(el.bbox))


class DragBox(TaskLogic):
    id = "drag-box"
    family = "drag-box"

    def __init__(self):
        self._elements: list[GuiElement] = []
        self._instruction = ""
        self._dragging = False

    @property
    def elements(self):
        return self._elements

    @property
    def instruction(self):
        return self._instruction

    def reset(self, layout_rng, task_rng):
        tx = int(layout_rng.integers(92, 119))
        ty = int(layout_rng.integers(60, 151))
        bx = int(layout_rng.integers(12, 41))
        by = int(layout_rng.integers(40, 171))
        self._target = GuiElement(
            "target", BBox(tx, ty, tx + 36, ty + 36), object_name="target"
        )
        self._box = GuiElement(
            "draggable", BBox(bx, by, bx + 16, by + 16), object_name="box"
        )
        self._elements = [self._target, self._box]
        self._dragging = False
        self._instruction = "Drag the box into the target."

    def _drop(self, x, y):
        self._dragging = False
        self._box.visual_state = "normal"
        t = self._target.bbox
        hit = t.x_left <= x < t.x_right and t.y_up <= y < t.y_down
        nx = int(np.clip(x - 8, 0, SCREEN_W - 16))
        ny = int(np.clip(y - 8, CONTENT_TOP, SCREEN_H - 16))
        self._box.bbox = BBox(nx, ny, nx + 16, ny + 16)
        return Outcome.SUCCESS if hit else Outcome.NEUTRAL

    def element_action(self, element, action_type, x, y):
        if self._dragging and action_type is ActionType.END_DRAG:
            return self._drop(x, y)
        if element.kind == "draggable" and action_type is ActionType.BEGIN_DRAG:
            self._dragging = True
            element.visual_state = "dragging"
            return Outcome.NEUTRAL
        if element.kind == "target" and action_type is ActionType.END_DRAG:
            return Outcome.NEUTRAL  # nothing in hand; harmless
        return Outcome.FAIL

    def background_action(self, action_type, x, y):
        if self._dragging and action_type is ActionType.END_DRAG:
            return self._drop(x, y)
        return Outcome.NEUTRAL

    def oracle(self):
        return [
            Affordance(ActionType.BEGIN_DRAG, self._box.bbox),
            Affordance(ActionType.END_DRAG, self._target.bbox),
        ]

    def expert(self):
        if self._dragging:
            return Action(ActionType.END_DRAG, target_bin(self._target.bbox))
        return Action(ActionType.BEGIN_DRAG, target_bin(self._box.bbox))


REGISTRY: dict[str, type[TaskLogic]] = {
    cls.id: cls
    for cls in (
        ClickTest,
        ClickTest2,
        ClickButtonSequence,
        ClickTab,
        ClickCheckboxes,
        CountSides,
        DragBox,
    )
}
