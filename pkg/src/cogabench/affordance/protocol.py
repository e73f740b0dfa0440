"""Run untrusted affordance scripts out of process.

One request/response per invocation, newline-delimited JSON on stdio:

    -> {"image_png_b64": "<base64>", "width": 160, "height": 210}
    <- {"affordances": [{"action": "<NAME>", "coords": [x1, y1, x2, y2]}, ...]}

Python scripts defining ``determine_affordable_actions(image)`` are wrapped
by the :mod:`cogabench.affordance.script_runner` adapter; anything else is
executed directly and must speak the protocol itself.
"""

from __future__ import annotations

import base64
import io
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from ..actions import SCREEN_H, SCREEN_W
from ..errors import ScriptExecutionError
from .core import AffordanceSet

DEFAULT_TIMEOUT = 10.0


def encode_request(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode="RGB").save(buf, format="PNG")
    req = {
        "image_png_b64": base64.b64encode(buf.getvalue()).decode("ascii"),
        "width": int(pixels.shape[1]),
        "height": int(pixels.shape[0]),
    }
    return (json.dumps(req) + "\n").encode("utf-8")


def decode_response(stdout_text: str) -> AffordanceSet:
    lines = [ln for ln in stdout_text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty response on stdout")
    try:
        obj = json.loads(lines[-1])
    except json.JSONDecodeError as e:
        raise ValueError(f"response is not valid JSON: {e}") from e
    return AffordanceSet.from_wire(obj)


def _command_for(script: Path) -> list[str]:
    if script.suffix == ".py":
        return [sys.executable, "-m", "cogabench.affordance.script_runner", str(script)]
    return [str(script)]


def run_external_script(
    script: str | Path,
    obs,
    timeout: float = DEFAULT_TIMEOUT,
) -> AffordanceSet:
    """Execute an affordance script on one observation.

    ``obs`` is an RGB pixel array or anything with a ``pixels`` attribute.
    Raises :class:`ScriptExecutionError` on nonzero exit, timeout, or output
    that does not parse as an affordance response; the error carries the
    captured stdout/stderr so a critique loop can inspect the failure.
    """
    script = Path(script)
    if not script.exists():
        raise ScriptExecutionError(f"script not found: {script}")
    pixels = getattr(obs, "pixels", obs)
    pixels = np.asarray(pixels)
    if pixels.shape != (SCREEN_H, SCREEN_W, 3):
        raise ValueError(f"observation shape {pixels.shape} != {(SCREEN_H, SCREEN_W, 3)}")

    env = dict(os.environ, PYTHONHASHSEED="0")
    try:
        proc = subprocess.run(
            _command_for(script),
            input=encode_request(pixels),
            capture_output=True,
            timeout=timeout,
            env=env,
        )
    except subprocess.TimeoutExpired as e:
        out = (e.stdout or b"").decode("utf-8", "replace")
        err = (e.stderr or b"").decode("utf-8", "replace")
        raise ScriptExecutionError(
            f"script {script.name} timed out after {timeout:g}s", stdout=out, stderr=err
        ) from e
    except OSError as e:
        raise ScriptExecutionError(f"failed to launch {script}: {e}") from e

    out = proc.stdout.decode("utf-8", "replace")
    err = proc.stderr.decode("utf-8", "replace")
    if proc.returncode != 0:
        raise ScriptExecutionError(
            f"script {script.name} exited with status {proc.returncode}", stdout=out, stderr=err
        )
    try:
        return decode_response(out)
    except ValueError as e:
        raise ScriptExecutionError(
            f"script {script.name} returned malformed output: {e}", stdout=out, stderr=err
        ) from None
