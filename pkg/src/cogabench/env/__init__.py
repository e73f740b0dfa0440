from .core import (
    Env,
    GuiElement,
    Observation,
    StepResult,
    TaskSpec,
    family_of,
    make,
)
from .io import load_demos, read_observation, save_observation, write_demos
from .tasks import REGISTRY

TASK_IDS: tuple[str, ...] = tuple(REGISTRY)
FAMILIES: dict[str, str] = {tid: cls.family for tid, cls in REGISTRY.items()}

__all__ = [
    "FAMILIES",
    "TASK_IDS",
    "Env",
    "GuiElement",
    "Observation",
    "StepResult",
    "TaskSpec",
    "family_of",
    "load_demos",
    "make",
    "read_observation",
    "save_observation",
    "write_demos",
]
