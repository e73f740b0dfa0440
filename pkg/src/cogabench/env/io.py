"""Observation export and demo trajectory files.

Observations persist as RGB PNG plus a JSON sidecar (same stem) holding
{"instruction", "task", "seed"}. Demos are JSON-lines, one record per
transition: {"obs_png": path, "action": {"type": name, "bin": int},
"reward": float, "done": bool}; obs_png is relative to the demo file and
`done` closes a trajectory.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..actions import Action, ActionType
from ..errors import DataError
from .core import Observation


def save_observation(obs: Observation, path: str | Path, task: str, seed: int) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(obs.pixels), mode="RGB").save(path)
    sidecar = {"instruction": obs.instruction, "task": task, "seed": int(seed)}
    path.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True) + "\n")
    return path


def read_observation(path: str | Path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    with Image.open(path) as im:
        pixels = np.asarray(im.convert("RGB"), dtype=np.uint8)
    sidecar = path.with_suffix(".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    return pixels, meta


def write_demos(path: str | Path, trajectories: list[list[dict]], task: str) -> Path:
    """Each transition dict needs: obs (Observation), action (Action),
    reward, done, seed."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    obs_dir = path.parent / f"{path.stem}_obs"
    obs_dir.mkdir(exist_ok=True)
    with open(path, "w") as f:
        for e, traj in enumerate(trajectories):
            for t, tr in enumerate(traj):
                png = obs_dir / f"ep{e:04d}_t{t:02d}.png"
                save_observation(tr["obs"], png, task, tr["seed"])
                rec = {
                    "obs_png": str(png.relative_to(path.parent)),
                    "action": {"type": tr["action"].action_type.name, "bin": tr["action"].bin},
                    "reward": float(tr["reward"]),
                    "done": bool(tr["done"]),
                }
                f.write(json.dumps(rec, sort_keys=True) + "\n")
    return path


def load_demos(path: str | Path) -> list[list[dict]]:
    """Trajectories of {pixels, instruction, action, reward, done}."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"demo file not found: {path}")
    trajectories: list[list[dict]] = []
    current: list[dict] = []
    for i, line in enumerate(path.read_text().splitlines()):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            png = path.parent / rec["obs_png"]
            pixels, meta = read_observation(png)
            action = Action(ActionType[rec["action"]["type"]], int(rec["action"]["bin"]))
            tr = {
                "pixels": pixels,
                "instruction": meta.get("instruction", ""),
                "action": action,
                "reward": float(rec["reward"]),
                "done": bool(rec["done"]),
            }
        except (KeyError, ValueError, FileNotFoundError, json.JSONDecodeError) as e:
            raise DataError(f"bad demo record at {path}:{i + 1}: {e}") from e
        current.append(tr)
        if tr["done"]:
            trajectories.append(current)
            current = []
    if current:
        raise DataError(f"trailing transitions without done flag in {path}")
    return trajectories
