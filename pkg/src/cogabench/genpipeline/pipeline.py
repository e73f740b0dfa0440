"""Generate-verify-improve orchestration and the script registry.

Budget: at most 3 independent runs, each at most 3 verification iterations
(the initial candidate plus up to two improved revisions). The first Pass
stops everything. When nothing passes, the best candidate by mean F1 still
gets registered so downstream consumers have a script to work with.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from ..errors import GenerationError
from .client import ChatClient, save_transcript
from .generate import extract_code, run_generation
from .templates import load_prompt
from .verifyloop import TestCase, VerificationReport, verify

log = logging.getLogger(__name__)

MAX_RUNS = 3
MAX_ITERATIONS = 3


@dataclass(frozen=True)
class Candidate:
    run: int
    iteration: int
    script_path: Path
    report: VerificationReport

    @property
    def evaluable(self) -> bool:
        """At least one test case executed without crashing."""
        return any(not c.error for c in self.report.cases)


@dataclass(frozen=True)
class PipelineResult:
    task: str
    best: Candidate
    candidates: tuple[Candidate, ...]
    passed: bool


def select_best(candidates: list[Candidate]) -> Candidate:
    """Highest mean F1; ties broken by recall, then by coming first.

    Candidates whose every case crashed are not evaluable and never win.
    """
    pool = [c for c in candidates if c.evaluable]
    if not pool:
        raise GenerationError("no evaluable candidates: every script crashed on every case")
    best = pool[0]
    for cand in pool[1:]:
        key = (cand.report.summary.mean_f1, cand.report.summary.mean_recall)
        best_key = (best.report.summary.mean_f1, best.report.summary.mean_recall)
        if key > best_key:
            best = cand
    return best


def generate_and_verify(task_id: str, client: ChatClient, cases: list[TestCase],
                        work_dir: str | Path, max_runs: int = MAX_RUNS,
                        max_iterations: int = MAX_ITERATIONS) -> PipelineResult:
    """Run the full candidate search for one task.

    Every candidate script is kept under ``work_dir`` along with the full
    client transcript, so a failed search can be audited offline.
    """
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    candidates: list[Candidate] = []
    passed = False
    for run in range(1, max_runs + 1):
        gen = run_generation(task_id, client, work_dir / f"run{run}")
        script_text = gen.script
        for iteration in range(1, max_iterations + 1):
            path = work_dir / f"run{run}" / f"candidate_i{iteration}.py"
            path.write_text(script_text)
            report = verify(path, task_id, cases, client)
            cand = Candidate(run, iteration, path, report)
            candidates.append(cand)
            log.info("task %s run %d iteration %d: %s (F1 %.3f)",
                     task_id, run, iteration, report.status,
                     report.summary.mean_f1)
            if report.passed:
                passed = True
                break
            if iteration == max_iterations:
                break
            reply = client.send(load_prompt(
                "13_critique_improve.txt",
                critique=report.verdict.critique or report.verdict.reasoning,
                script=script_text,
            ))
            improved = extract_code(reply)
            if improved is None:
                log.warning("improvement reply had no code block; run %d ends early", run)
                break
            script_text = improved
        if passed:
            break
    save_transcript(work_dir / "transcript.jsonl", client.exchanges)
    best = select_best(candidates)
    return PipelineResult(task=task_id, best=best,
                          candidates=tuple(candidates), passed=passed)


def register_script(result: PipelineResult, registry_dir: str | Path) -> Path:
    """Copy the winning candidate into the registry for provider use."""
    dest_dir = Path(registry_dir) / result.task
    dest_dir.mkdir(parents=True, exist_ok=True)
    best = result.best
    dest = dest_dir / ("best" + best.script_path.suffix)
    dest.write_text(best.script_path.read_text())
    meta = {
        "mean_precision": best.report.summary.mean_precision,
        "mean_recall": best.report.summary.mean_recall,
        "mean_f1": best.report.summary.mean_f1,
        "run": best.run,
        "iteration": best.iteration,
    }
    (dest_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return dest


def registered_script(registry_dir: str | Path, task_id: str) -> Path:
    """Path of the registered script for ``task_id``.

    Raises GenerationError when the task has no registered script yet.
    """
    dest_dir = Path(registry_dir) / task_id
    for cand in sorted(dest_dir.glob("best.*")):
        if cand.suffix != ".json":
            return cand
    raise GenerationError(f"no registered script for task {task_id!r}")
