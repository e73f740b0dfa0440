"""Shared test helpers: canned chat replies for offline pipeline runs.

The mock chat client plays back numbered reply files, so a scenario is just
an ordered list of strings. Helpers here synthesize those lists, including
a genuinely working template-matching script for the final code reply.
"""

from pathlib import Path

from cogabench.env import make
from cogabench.genpipeline.templates import EXTRACTION_SEEDS

# What the scripted chat hands back as its final code reply. It template-
# matches every saved crop against the screenshot (FFT cross-correlation
# plus integral-image window stats) and emits one CLICK affordance per
# non-overlapping match at the 0.5 threshold.
MATCHER_SCRIPT = '''\
import numpy as np
from pathlib import Path
from PIL import Image

TEMPLATE_DIR = Path(r"__TEMPLATE_DIR__")
THRESHOLD = 0.5
BAR_H = 24  # skip the instruction bar so its text cannot false-match


def _gray(rgb):
    rgb = np.asarray(rgb, dtype=np.float64)
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def _window_sums(img, th, tw):
    padded = np.pad(img, ((1, 0), (1, 0)))
    c = padded.cumsum(axis=0).cumsum(axis=1)
    return c[th:, tw:] - c[:-th, tw:] - c[th:, :-tw] + c[:-th, :-tw]


def _zncc(img, tpl):
    H, W = img.shape
    th, tw = tpl.shape
    if th > H or tw > W:
        return np.full((1, 1), -1.0)
    t0 = tpl - tpl.mean()
    tnorm = np.sqrt((t0 * t0).sum())
    if tnorm == 0.0:
        return np.full((H - th + 1, W - tw + 1), -1.0)
    sh = (H + th - 1, W + tw - 1)
    spec = np.fft.rfft2(img, s=sh) * np.fft.rfft2(t0[::-1, ::-1], s=sh)
    cross = np.fft.irfft2(spec, s=sh)[th - 1:H, tw - 1:W]
    s1 = _window_sums(img, th, tw)
    s2 = _window_sums(img * img, th, tw)
    var = np.maximum(s2 - s1 * s1 / (th * tw), 0.0)
    den = np.sqrt(var) * tnorm
    out = np.full(cross.shape, -1.0)
    np.divide(cross, den, out=out, where=den > 1e-12)
    return out


def _peaks(score, th, tw):
    found = []
    s = score.copy()
    while s.size:
        y, x = np.unravel_index(int(np.argmax(s)), s.shape)
        if s[y, x] < THRESHOLD:
            break
        found.append((int(x), int(y)))
        s[max(0, y - th + 1):y + th, max(0, x - tw + 1):x + tw] = -2.0
    return found


def determine_affordable_actions(image):
    img = _gray(image)[BAR_H:]
    results = []
    seen = set()
    for path in sorted(TEMPLATE_DIR.glob("*.png")):
        tpl = np.asarray(Image.open(path).convert("L"), dtype=np.float64)
        th, tw = tpl.shape
        for x, y in _peaks(_zncc(img, tpl), th, tw):
            coords = (x, y + BAR_H, x + tw, y + th + BAR_H)
            if coords not in seen:
                seen.add(coords)
                results.append({"action": "CLICK_COORDS", "coords": list(coords)})
    return results
'''

EMPTY_SCRIPT = """\
def determine_affordable_actions(image):
    return []
"""

CRASHING_SCRIPT = """\
def determine_affordable_actions(image):
    raise RuntimeError("template file missing")
"""

PASS_REPLY = "{Status: Pass, Reasoning: Predictions line up with the widgets.}"
FAIL_REPLY = (
    "{Status: Fail, Reasoning: Predictions miss some widgets, "
    "Critique: Lower the threshold and search the whole content area.}"
)


def fenced(script_text: str) -> str:
    return f"Here is the script.\n\n```python\n{script_text}```\n"


def working_script(template_dir: Path | str) -> str:
    return MATCHER_SCRIPT.replace("__TEMPLATE_DIR__", str(template_dir))


def fixed_script(affordances: list[tuple[str, tuple[int, int, int, int]]]) -> str:
    """Script returning a hard-coded affordance list."""
    entries = ",\n        ".join(
        f'{{"action": "{name}", "coords": {list(coords)}}}' for name, coords in affordances
    )
    return (
        "def determine_affordable_actions(image):\n"
        f"    return [\n        {entries},\n    ]\n"
    )


def generation_replies(task_id: str, objects: list[str], script_text: str,
                       n_obs: int = 5) -> list[str]:
    """Replies covering one run_generation call, ending in the code block.

    The bbox answers are the oracle boxes for the extraction seeds, handed
    out in the same (observation, object) order the pipeline asks for them.
    """
    env = make(task_id)
    replies = [
        "An instruction bar sits on top; below it, flat rectangular widgets "
        "on a plain background.",
        'The affordance intents: ["click a button"]',
        "Relevant objects: " + repr(objects),
    ]
    for seed in EXTRACTION_SEEDS[:n_obs]:
        env.reset(seed=seed)
        boxes = [aff.bbox for aff in sorted(env.oracle_affordances())]
        assert len(boxes) >= len(objects), "fixture assumes one box per object"
        for i, _ in enumerate(objects):
            x1, y1, x2, y2 = boxes[i].as_tuple()
            replies.append(f"The object sits at [{x1}, {y1}, {x2}, {y2}].")
    replies += [
        "Step 1: slide each saved template over the content area and collect "
        "candidate regions that resemble it.",
        "Step 2: score placements with normalized cross-correlation, keep "
        "local maxima at or above 0.5, and suppress overlapping hits.",
        "Step 3: every surviving detection becomes a CLICK_COORDS affordance "
        "whose bbox is the detection rectangle.",
        "Step 4: no match yields an empty list, duplicates are suppressed, "
        "and the instruction bar is excluded from the search.",
        fenced(script_text),
    ]
    return replies


def write_fixture(fixture_dir: Path, replies: list[str]) -> Path:
    fixture_dir.mkdir(parents=True, exist_ok=True)
    for i, text in enumerate(replies, 1):
        (fixture_dir / f"{i:02d}_reply.txt").write_text(text)
    return fixture_dir
