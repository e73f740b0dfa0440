"""Scoring candidates on held-out screenshots plus the critique exchange.

The critic never sees ground truth. It gets the script (on crashes) or the
predictions and a couple of raw screenshots (on clean runs) and must answer
in a fixed verdict form.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from ..affordance.core import AffordanceSet
from ..affordance.protocol import DEFAULT_TIMEOUT, run_external_script
from ..env import make
from ..errors import ConfigurationError, ScriptExecutionError
from ..metrics import CaseSummary, MatchReport, mean_f1_over_cases, precision_recall
from .client import ChatClient
from .templates import load_prompt

# held out from both the builtin-provider templates and script generation
CASE_SEEDS = (201, 202, 203, 204, 205)


@dataclass(frozen=True)
class TestCase:
    case_id: str
    pixels: np.ndarray
    truth: AffordanceSet


def make_test_cases(task_id: str, out_dir: str | Path,
                    n: int = 5) -> list[TestCase]:
    """Render ``n`` fresh episodes and persist screenshot + truth pairs.

    Ground truth comes from the environment oracle. The on-disk format
    (PNG next to a JSON affordance list) doubles as the manual-annotation
    format, so hand-labeled screenshots drop into the same loader.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    env = make(task_id)
    seeds = CASE_SEEDS[:n] if n <= len(CASE_SEEDS) else tuple(
        CASE_SEEDS[0] + i for i in range(n)
    )
    cases = []
    for seed in seeds:
        obs = env.reset(seed=seed)
        truth = env.oracle_affordances()
        case_id = f"case_{seed}"
        Image.fromarray(obs.pixels).save(out_dir / f"{case_id}.png")
        (out_dir / f"{case_id}.json").write_text(json.dumps(truth.to_wire()))
        cases.append(TestCase(case_id, obs.pixels.copy(), truth))
    return cases


def load_test_cases(case_dir: str | Path) -> list[TestCase]:
    """Load PNG + JSON pairs, sorted by file name."""
    case_dir = Path(case_dir)
    pngs = sorted(case_dir.glob("*.png"))
    if not pngs:
        raise ConfigurationError(f"no test cases under {case_dir}")
    cases = []
    for png in pngs:
        sidecar = png.with_suffix(".json")
        if not sidecar.exists():
            raise ConfigurationError(f"missing truth sidecar for {png.name}")
        with Image.open(png) as im:
            pixels = np.asarray(im.convert("RGB"), dtype=np.uint8)
        truth = AffordanceSet.from_wire(json.loads(sidecar.read_text()))
        cases.append(TestCase(png.stem, pixels, truth))
    return cases


@dataclass(frozen=True)
class CritiqueVerdict:
    status: str  # "Pass" or "Fail"
    reasoning: str
    critique: str = ""


_VERDICT_RE = re.compile(
    r"\{\s*status\s*:\s*(pass|fail)\s*,\s*reasoning\s*:\s*(.*?)"
    r"(?:,\s*critique\s*:\s*(.*?))?\s*\}",
    re.IGNORECASE | re.DOTALL,
)


def parse_verdict(reply: str) -> CritiqueVerdict | None:
    """Last well-formed verdict in the reply, or None."""
    matches = _VERDICT_RE.findall(reply)
    if not matches:
        return None
    status, reasoning, critique = matches[-1]
    return CritiqueVerdict(
        status=status.capitalize(),
        reasoning=reasoning.strip(),
        critique=(critique or "").strip(),
    )


@dataclass(frozen=True)
class CaseResult:
    case_id: str
    report: MatchReport
    error: str = ""


@dataclass(frozen=True)
class VerificationReport:
    status: str  # "Pass" or "Fail"
    cases: tuple[CaseResult, ...]
    summary: CaseSummary
    verdict: CritiqueVerdict

    @property
    def passed(self) -> bool:
        return self.status == "Pass"


_ZERO = MatchReport(0.0, 0.0, 0.0, 0, 0)


def _format_predictions(case_id: str, preds: AffordanceSet) -> str:
    if len(preds) == 0:
        return f"{case_id}: (no affordances)"
    parts = sorted(
        f"{a.action_type.name} {list(a.bbox.as_tuple())}" for a in preds
    )
    return f"{case_id}: " + "; ".join(parts)


def verify(script: str | Path, task_id: str, cases: list[TestCase],
           client: ChatClient, timeout: float = DEFAULT_TIMEOUT) -> VerificationReport:
    """Score one candidate on the test cases and ask the critic to rule.

    A crash on any case forces Fail regardless of what the critic says;
    the crash text goes into the critique prompt so the next improvement
    round can address it. An unparseable critic reply is also a Fail with
    a critique that says so.
    """
    if not cases:
        raise ConfigurationError("verify needs at least one test case")
    script = Path(script)
    results: list[CaseResult] = []
    pred_lines: list[str] = []
    first_error: ScriptExecutionError | None = None
    for case in cases:
        try:
            preds = run_external_script(script, case.pixels, timeout=timeout)
        except ScriptExecutionError as e:
            # a crashed case scores zero everywhere
            results.append(CaseResult(case.case_id, _ZERO, error=str(e)))
            if first_error is None:
                first_error = e
        else:
            results.append(CaseResult(case.case_id, precision_recall(preds, case.truth)))
            pred_lines.append(_format_predictions(case.case_id, preds))
    summary = mean_f1_over_cases([r.report for r in results])

    if first_error is not None:
        detail = str(first_error)
        for stream in ("stdout", "stderr"):
            text = (getattr(first_error, stream, "") or "").strip()
            if text:
                detail += f"\n{stream}:\n{text[-2000:]}"
        prompt = load_prompt("11_critique_error.txt", task=task_id, error=detail,
                             script=script.read_text())
        reply = client.send(prompt)
    else:
        prompt = load_prompt(
            "12_critique_review.txt",
            task=task_id,
            n_cases=len(cases),
            predictions="\n".join(pred_lines),
        )
        reply = client.send(prompt, [c.pixels for c in cases[:2]])

    verdict = parse_verdict(reply)
    if verdict is None:
        verdict = CritiqueVerdict(
            "Fail",
            "critic reply did not follow the verdict format",
            "The review reply could not be parsed; treating the candidate as failing.",
        )
    if first_error is not None and verdict.status == "Pass":
        # the critic cannot wave a crashing script through
        verdict = replace(verdict, status="Fail")
    return VerificationReport(
        status=verdict.status,
        cases=tuple(results),
        summary=summary,
        verdict=verdict,
    )
