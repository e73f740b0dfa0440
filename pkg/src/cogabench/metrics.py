"""Affordance-set quality metrics and benchmark aggregation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .affordance.core import Affordance, AffordanceSet
from .vision import iou


@dataclass(frozen=True)
class MatchReport:
    precision: float
    recall: float
    f1: float
    matched_pred: int
    matched_gt: int


@dataclass(frozen=True)
class CaseSummary:
    mean_precision: float
    mean_recall: float
    mean_f1: float


@dataclass(frozen=True)
class SuccessStats:
    mean: float
    std: float
    per_seed: tuple[tuple[int, float], ...]
    step_budget: int


def affordance_match(pred: Affordance, gt: Affordance) -> bool:
    """Identical action type and any positive bbox overlap."""
    return pred.action_type == gt.action_type and iou(pred.bbox, gt.bbox) > 0.0


def f1_score(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def precision_recall(preds: AffordanceSet, gts: AffordanceSet) -> MatchReport:
    """Non-exclusive matching: each side counts members with >= 1 match.

    Edge conventions: both empty -> P = R = 1; empty preds against real
    ground truth -> P = R = 0 (vacuous precision would hide total failure);
    predictions against empty ground truth -> R = 1, P = 0.
    """
    matched_pred = sum(1 for p in preds if any(affordance_match(p, g) for g in gts))
    matched_gt = sum(1 for g in gts if any(affordance_match(p, g) for p in preds))
    if len(preds) == 0 and len(gts) == 0:
        p, r = 1.0, 1.0
    elif len(preds) == 0:
        p, r = 0.0, 0.0
    elif len(gts) == 0:
        p, r = 0.0, 1.0
    else:
        p = matched_pred / len(preds)
        r = matched_gt / len(gts)
    return MatchReport(p, r, f1_score(p, r), matched_pred, matched_gt)


def mean_f1_over_cases(reports: Sequence[MatchReport]) -> CaseSummary:
    if not reports:
        raise ValueError("no test-case reports to aggregate")
    n = len(reports)
    return CaseSummary(
        mean_precision=sum(r.precision for r in reports) / n,
        mean_recall=sum(r.recall for r in reports) / n,
        mean_f1=sum(r.f1 for r in reports) / n,
    )


def success_stats(per_seed: Iterable[tuple[int, float]], step_budget: int) -> SuccessStats:
    rows = tuple(sorted((int(s), float(v)) for s, v in per_seed))
    if not rows:
        raise ValueError("no per-seed results")
    vals = [v for _, v in rows]
    mean = sum(vals) / len(vals)
    var = sum((v - mean) ** 2 for v in vals) / len(vals)  # population std
    return SuccessStats(mean=mean, std=var**0.5, per_seed=rows, step_budget=step_budget)


def format_mean_std(stats: SuccessStats) -> str:
    """Percent form to 2 decimals, e.g. '15.67 ± 1.15'."""
    return f"{100 * stats.mean:.2f} ± {100 * stats.std:.2f}"


def write_success_csv(path: str | Path, rows: Iterable[dict]) -> Path:
    """Rows: task, method, seed, step_budget, success_rate (sorted)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = ["task", "method", "seed", "step_budget", "success_rate"]
    ordered = sorted(rows, key=lambda r: (r["task"], r["method"], int(r["seed"]), int(r["step_budget"])))
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=cols)
        w.writeheader()
        for r in ordered:
            w.writerow({c: r[c] for c in cols})
    return path


def write_script_csv(path: str | Path, rows: Iterable[dict]) -> Path:
    """Rows: task, run, iteration, mean_precision, mean_recall, mean_f1."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = ["task", "run", "iteration", "mean_precision", "mean_recall", "mean_f1"]
    ordered = sorted(rows, key=lambda r: (r["task"], int(r["run"]), int(r["iteration"])))
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=cols)
        w.writeheader()
        for r in ordered:
            w.writerow({c: r[c] for c in cols})
    return path
