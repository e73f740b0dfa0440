"""Script generation: a fixed prompt sequence that ends in a python candidate.

The sequence mirrors how a person would work the problem: describe the
screen, name the affordance intents and their objects, cut templates for
each object, design a template-matching strategy in four steps, then write
the code. Every exchange goes through a ChatClient so the whole flow can be
replayed offline from fixtures.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..env import make
from ..errors import GenerationError
from .client import ChatClient
from .grid import overlay_grid
from .templates import EXTRACTION_SEEDS, extract_templates, load_prompt

_LIST_RE = re.compile(r"\[[^\[\]]*\]", re.DOTALL)
_FENCE_PY_RE = re.compile(r"```python\s*\n(.*?)```", re.DOTALL)
_FENCE_ANY_RE = re.compile(r"```\s*\n(.*?)```", re.DOTALL)


def parse_name_list(reply: str) -> list[str]:
    """Last bracketed python list of strings in the reply.

    Tolerates prose and code fences around the literal; raises
    GenerationError when no span parses to a non-empty list of strings.
    """
    found: list[str] | None = None
    for span in _LIST_RE.findall(reply):
        try:
            val = ast.literal_eval(span)
        except (ValueError, SyntaxError):
            continue
        if isinstance(val, list) and val and all(isinstance(s, str) for s in val):
            found = val
    if found is None:
        raise GenerationError(f"no list of names found in reply: {reply[:200]!r}")
    return found


def extract_code(reply: str) -> str | None:
    """Script text from the last fenced code block, or None."""
    blocks = _FENCE_PY_RE.findall(reply) or _FENCE_ANY_RE.findall(reply)
    if not blocks:
        return None
    code = blocks[-1].strip()
    return code + "\n" if code else None


@dataclass
class GenerationResult:
    script: str
    intents: list[str]
    objects: list[str]
    template_paths: list[Path] = field(default_factory=list)


def run_generation(task_id: str, client: ChatClient, work_dir: str | Path,
                   n_obs: int = 5, spacing: int = 10) -> GenerationResult:
    """Produce one candidate script for ``task_id``.

    Raises GenerationError when a reply cannot be used (no parseable name
    list, no code block, or no templates for some object).
    """
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    env = make(task_id)
    obs = env.reset(seed=EXTRACTION_SEEDS[0])
    gridded = overlay_grid(obs.pixels, spacing)

    client.send(load_prompt("01_salient.txt", task=task_id, spacing=spacing),
                [gridded])
    intents = parse_name_list(client.send(load_prompt("02_intents.txt"), [gridded]))
    objects = parse_name_list(
        client.send(load_prompt("03_objects.txt", intents=repr(intents)))
    )

    template_dir = work_dir / "templates"
    paths = extract_templates(task_id, client, objects, template_dir,
                              n_obs=n_obs, spacing=spacing)
    template_list = "\n".join(str(p) for p in paths)

    strategy_steps = [
        client.send(load_prompt("06_strategy_detect.txt", task=task_id,
                                template_list=template_list),
                    [obs.pixels]),
        client.send(load_prompt("07_strategy_match.txt")),
        client.send(load_prompt("08_strategy_map.txt", task=task_id,
                                intents=repr(intents))),
        client.send(load_prompt("09_strategy_check.txt")),
    ]
    strategy = "\n\n".join(
        f"Step {i}: {text}" for i, text in enumerate(strategy_steps, 1)
    )

    reply = client.send(load_prompt("10_code.txt", template_list=template_list,
                                    strategy=strategy))
    script = extract_code(reply)
    if script is None:
        raise GenerationError("code reply contained no fenced code block")
    return GenerationResult(script=script, intents=intents, objects=objects,
                            template_paths=paths)
