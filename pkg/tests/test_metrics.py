import csv

import numpy as np
import pytest

from cogabench.actions import ActionType
from cogabench.affordance.core import Affordance, AffordanceSet
from cogabench.metrics import (
    MatchReport,
    affordance_match,
    f1_score,
    format_mean_std,
    mean_f1_over_cases,
    precision_recall,
    success_stats,
    write_script_csv,
    write_success_csv,
)
from cogabench.vision import BBox, iou


def oracle_precision_recall(preds, gts):
    """Independent all-pairs reimplementation used as the reference."""
    preds, gts = list(preds), list(gts)
    match = {
        (i, j): (p.action_type == g.action_type and iou(p.bbox, g.bbox) > 0)
        for i, p in enumerate(preds)
        for j, g in enumerate(gts)
    }
    mp = len({i for (i, j), m in match.items() if m})
    mg = len({j for (i, j), m in match.items() if m})
    if not preds and not gts:
        p = r = 1.0
    elif not preds:
        p = r = 0.0
    elif not gts:
        p, r = 0.0, 1.0
    else:
        p, r = mp / len(preds), mg / len(gts)
    return p, r, mp, mg


def rand_affordance(rng):
    x1 = int(rng.integers(0, 150))
    y1 = int(rng.integers(0, 200))
    w = int(rng.integers(1, 30))
    h = int(rng.integers(1, 30))
    return Affordance(
        ActionType(int(rng.integers(0, 4))), BBox(x1, y1, min(160, x1 + w), min(210, y1 + h))
    )


def rand_set(rng, max_n=10):
    return AffordanceSet(rand_affordance(rng) for _ in range(int(rng.integers(0, max_n + 1))))


class TestMatch:
    def test_identical(self):
        a = Affordance(ActionType.CLICK_COORDS, BBox(0, 0, 10, 10))
        assert affordance_match(a, a)

    def test_type_mismatch(self):
        a = Affordance(ActionType.CLICK_COORDS, BBox(0, 0, 10, 10))
        b = Affordance(ActionType.END_DRAG, BBox(0, 0, 10, 10))
        assert not affordance_match(a, b)

    def test_one_pixel_overlap_counts(self):
        a = Affordance(ActionType.CLICK_COORDS, BBox(0, 0, 10, 10))
        b = Affordance(ActionType.CLICK_COORDS, BBox(9, 9, 20, 20))
        # 1 px intersection over union 100 + 121 - 1
        assert iou(a.bbox, b.bbox) == pytest.approx(1 / 220)
        assert affordance_match(a, b)

    def test_touching_does_not_count(self):
        a = Affordance(ActionType.CLICK_COORDS, BBox(0, 0, 10, 10))
        b = Affordance(ActionType.CLICK_COORDS, BBox(10, 0, 20, 10))
        assert not affordance_match(a, b)

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a, b = rand_affordance(rng), rand_affordance(rng)
            assert affordance_match(a, b) == affordance_match(b, a)


class TestPrecisionRecall:
    def test_equal_sets(self):
        rng = np.random.default_rng(2)
        s = AffordanceSet(rand_affordance(rng) for _ in range(4))
        rep = precision_recall(s, s)
        assert rep.precision == rep.recall == rep.f1 == 1.0

    def test_hand_example(self):
        gts = AffordanceSet(
            [
                Affordance(ActionType.CLICK_COORDS, BBox(0, 0, 10, 10)),
                Affordance(ActionType.CLICK_COORDS, BBox(50, 50, 60, 60)),
                Affordance(ActionType.CLICK_COORDS, BBox(100, 100, 110, 110)),
            ]
        )
        preds = AffordanceSet(
            [
                Affordance(ActionType.CLICK_COORDS, BBox(5, 5, 12, 12)),  # matches gt 1
                Affordance(ActionType.CLICK_COORDS, BBox(140, 140, 150, 150)),  # no match
            ]
        )
        rep = precision_recall(preds, gts)
        assert rep.precision == pytest.approx(0.5)
        assert rep.recall == pytest.approx(1 / 3)
        assert rep.f1 == pytest.approx(0.4)

    def test_edge_conventions(self):
        s = AffordanceSet([Affordance(ActionType.CLICK_COORDS, BBox(0, 0, 5, 5))])
        empty = AffordanceSet()
        both = precision_recall(empty, empty)
        assert (both.precision, both.recall, both.f1) == (1.0, 1.0, 1.0)
        no_preds = precision_recall(empty, s)
        assert (no_preds.precision, no_preds.recall, no_preds.f1) == (0.0, 0.0, 0.0)
        no_gts = precision_recall(s, empty)
        assert (no_gts.precision, no_gts.recall) == (0.0, 1.0)

    def test_matches_oracle_randomized(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            preds, gts = rand_set(rng), rand_set(rng)
            rep = precision_recall(preds, gts)
            p, r, mp, mg = oracle_precision_recall(preds, gts)
            assert rep.precision == p and rep.recall == r
            assert rep.matched_pred == mp and rep.matched_gt == mg
            assert rep.f1 == f1_score(p, r)

    def test_adding_matching_pred_never_lowers_recall(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            gts = rand_set(rng, 6)
            preds = rand_set(rng, 6)
            if len(gts) == 0:
                continue
            g = next(iter(gts))
            bigger = AffordanceSet(list(preds) + [g])
            assert precision_recall(bigger, gts).recall >= precision_recall(preds, gts).recall


class TestAggregation:
    def test_mean_f1(self):
        reports = [MatchReport(1, 1, f, 0, 0) for f in (1, 0.4, 0.4, 1, 0.2)]
        assert mean_f1_over_cases(reports).mean_f1 == pytest.approx(0.6)

    def test_single_case(self):
        rep = MatchReport(0.5, 1.0, 2 / 3, 1, 1)
        s = mean_f1_over_cases([rep])
        assert (s.mean_precision, s.mean_recall, s.mean_f1) == (0.5, 1.0, 2 / 3)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mean_f1_over_cases([])

    def test_success_stats_trivial(self):
        s = success_stats([(0, 1.0), (1, 1.0), (2, 1.0)], 1000)
        assert s.mean == 1.0 and s.std == 0.0

    def test_success_stats_population_std(self):
        s = success_stats([(0, 0.14), (1, 0.17), (2, 0.16)], 1000)
        assert s.mean == pytest.approx(0.156666, abs=1e-5)
        vals = np.array([0.14, 0.17, 0.16])
        assert s.std == pytest.approx(float(vals.std()))  # numpy default is population

    def test_format_matches_table_style(self):
        s = success_stats([(0, 0.14), (1, 0.17), (2, 0.16)], 1000)
        assert format_mean_std(s) == "15.67 ± 1.25"

    def test_single_seed(self):
        s = success_stats([(5, 0.8)], 500)
        assert s.mean == 0.8 and s.std == 0.0 and s.per_seed == ((5, 0.8),)


class TestCsv:
    def test_success_csv_sorted_and_complete(self, tmp_path):
        rows = [
            {"task": "b", "method": "rl", "seed": 1, "step_budget": 500, "success_rate": 0.5},
            {"task": "a", "method": "coga", "seed": 0, "step_budget": 1000, "success_rate": 1.0},
        ]
        p = write_success_csv(tmp_path / "s.csv", rows)
        got = list(csv.DictReader(open(p)))
        assert [r["task"] for r in got] == ["a", "b"]
        assert got[0]["success_rate"] == "1.0"

    def test_script_csv_columns(self, tmp_path):
        p = write_script_csv(
            tmp_path / "x.csv",
            [
                {
                    "task": "click-test",
                    "run": 1,
                    "iteration": 2,
                    "mean_precision": 1.0,
                    "mean_recall": 0.5,
                    "mean_f1": 2 / 3,
                }
            ],
        )
        got = list(csv.DictReader(open(p)))
        assert list(got[0].keys()) == [
            "task",
            "run",
            "iteration",
            "mean_precision",
            "mean_recall",
            "mean_f1",
        ]

    def test_byte_identical_rewrite(self, tmp_path):
        rows = [
            {"task": "t", "method": "rl", "seed": s, "step_budget": b, "success_rate": s * 0.1}
            for s in (2, 0, 1)
            for b in (1000, 250)
        ]
        p1 = write_success_csv(tmp_path / "a.csv", rows)
        p2 = write_success_csv(tmp_path / "b.csv", list(reversed(rows)))
        assert p1.read_bytes() == p2.read_bytes()
