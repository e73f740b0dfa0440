"""Adapter that lets a plain ``determine_affordable_actions(image)`` script
speak the stdio affordance protocol.

Usage: python -m cogabench.affordance.script_runner <script.py>

Reads one JSON request line from stdin, decodes the PNG into an RGB numpy
array, loads the target script as a module, calls its
``determine_affordable_actions`` function, and prints the JSON response.
Exceptions propagate as a traceback on stderr with a nonzero exit so the
caller can capture the failure text.
"""

import base64
import importlib.util
import io
import json
import sys

import numpy as np
from PIL import Image


def _load_script(path):
    spec = importlib.util.spec_from_file_location("affordance_script", path)
    if spec is None or spec.loader is None:
        raise RuntimeError(f"cannot load script {path}")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    fn = getattr(mod, "determine_affordable_actions", None)
    if fn is None:
        raise RuntimeError(f"{path} does not define determine_affordable_actions(image)")
    return fn


def _normalize(result):
    if isinstance(result, dict) and "affordances" in result:
        result = result["affordances"]
    if not isinstance(result, (list, tuple)):
        raise RuntimeError(
            f"determine_affordable_actions must return a list of dicts, got {type(result).__name__}"
        )
    out = []
    for item in result:
        if not isinstance(item, dict) or "action" not in item or "coords" not in item:
            raise RuntimeError(f"bad affordance entry: {item!r}")
        coords = [int(c) for c in item["coords"]]
        if len(coords) != 4:
            raise RuntimeError(f"coords must have 4 entries: {item!r}")
        out.append({"action": str(item["action"]), "coords": coords})
    return {"affordances": out}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m cogabench.affordance.script_runner <script.py>", file=sys.stderr)
        return 2
    fn = _load_script(argv[0])
    request = json.loads(sys.stdin.readline())
    png = base64.b64decode(request["image_png_b64"])
    image = np.asarray(Image.open(io.BytesIO(png)).convert("RGB"))
    if image.shape[0] != request["height"] or image.shape[1] != request["width"]:
        raise RuntimeError(
            f"decoded image {image.shape[1]}x{image.shape[0]} does not match "
            f"declared {request['width']}x{request['height']}"
        )
    response = _normalize(fn(image))
    print(json.dumps(response))
    return 0


if __name__ == "__main__":
    sys.exit(main())
