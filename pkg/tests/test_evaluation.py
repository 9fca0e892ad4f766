"""Confusion tallies, threshold metrics, PR curves, and report emission."""

import json

import numpy as np
import pytest

from reviewlens import (
    ConfigError,
    ConfusionMatrix,
    MetricsRow,
    MissingLabelError,
    PRPoint,
    UndefinedRecallError,
    ValidationError,
    confusion_at,
    emit_report,
    f1_from,
    metrics_from,
    pr_curve,
    threshold_table,
)

from helpers import naive_confusion, naive_metrics, random_score_dataset


class TestConfusionAt:
    def test_hand_tally_of_three_items(self):
        scores = {"a": 0.9, "b": 0.8, "c": 0.4}
        truth = {"a": 1, "b": 0, "c": 1}
        cm = confusion_at(scores, truth, 0.5)
        assert (cm.tp, cm.fp, cm.fn, cm.tn) == (1, 1, 1, 0)

    def test_cutoff_zero_predicts_everything_positive(self):
        scores = {"a": 0.9, "b": 0.1, "c": 0.0}
        truth = {"a": 1, "b": 0, "c": 1}
        cm = confusion_at(scores, truth, 0.0)
        assert cm.fn == 0 and cm.tn == 0
        assert cm.tp + cm.fp == 3

    def test_empty_inputs(self):
        cm = confusion_at({}, {}, 0.5)
        assert (cm.tp, cm.fp, cm.fn, cm.tn) == (0, 0, 0, 0)

    def test_missing_truth_names_the_id(self):
        with pytest.raises(MissingLabelError, match="mystery"):
            confusion_at({"mystery": 0.5}, {}, 0.5)

    def test_extra_truth_entries_ignored(self):
        cm = confusion_at({"a": 0.9}, {"a": 1, "unused": 0}, 0.5)
        assert cm.total == 1

    def test_non_binary_truth_rejected(self):
        with pytest.raises(ValidationError):
            confusion_at({"a": 0.5}, {"a": 2}, 0.5)

    def test_boundary_score_counts_as_positive(self):
        cm = confusion_at({"a": 0.5}, {"a": 1}, 0.5)
        assert cm.tp == 1

    def test_agrees_with_naive_tally_on_random_data(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            scores, truth = random_score_dataset(rng)
            cutoff = float(rng.integers(0, 11)) / 10.0
            cm = confusion_at(scores, truth, cutoff)
            assert (cm.tp, cm.fp, cm.fn, cm.tn) == naive_confusion(scores, truth, cutoff)

    def test_negative_count_rejected(self):
        with pytest.raises(ValidationError):
            ConfusionMatrix(tp=-1, fp=0, fn=0, tn=0)


class TestMetricsFrom:
    def test_hand_computed_row(self):
        row = metrics_from(ConfusionMatrix(tp=3, fp=1, fn=2, tn=4), cutoff=0.5)
        np.testing.assert_allclose(row.precision, 0.750, atol=5e-4)
        np.testing.assert_allclose(row.recall, 0.600, atol=5e-4)
        np.testing.assert_allclose(row.f1, 0.667, atol=5e-4)
        np.testing.assert_allclose(row.accuracy, 0.700, atol=5e-4)

    def test_zero_denominators_give_zero(self):
        row = metrics_from(ConfusionMatrix(tp=0, fp=0, fn=0, tn=5), cutoff=0.9)
        assert row.precision == 0.0
        assert row.recall == 0.0
        assert row.f1 == 0.0
        assert row.accuracy == 1.0

    def test_empty_matrix_is_all_zero(self):
        row = metrics_from(ConfusionMatrix(tp=0, fp=0, fn=0, tn=0), cutoff=0.5)
        assert (row.precision, row.recall, row.f1, row.accuracy) == (0, 0, 0, 0)

    def test_agrees_with_naive_formulas_on_random_data(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            scores, truth = random_score_dataset(rng)
            cutoff = float(rng.integers(0, 11)) / 10.0
            cm = confusion_at(scores, truth, cutoff)
            row = metrics_from(cm, cutoff)
            expected = naive_metrics(cm.tp, cm.fp, cm.fn, cm.tn)
            np.testing.assert_allclose(
                (row.precision, row.recall, row.f1, row.accuracy), expected
            )

    def test_f1_bounded_by_precision_and_recall(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            scores, truth = random_score_dataset(rng)
            cutoff = float(rng.integers(0, 11)) / 10.0
            row = metrics_from(confusion_at(scores, truth, cutoff), cutoff)
            if row.precision + row.recall > 0:
                assert min(row.precision, row.recall) <= row.f1 + 1e-12
                assert row.f1 <= max(row.precision, row.recall) + 1e-12


class TestF1From:
    def test_published_low_cutoff_operating_point(self):
        """P=0.387, R=0.973 combine to F1 0.554."""
        np.testing.assert_allclose(f1_from(0.387, 0.973), 0.554, atol=1e-3)

    def test_published_high_cutoff_operating_point(self):
        """P=0.736, R=0.691 combine to F1 0.713."""
        np.testing.assert_allclose(f1_from(0.736, 0.691), 0.713, atol=1e-3)

    def test_zero_convention(self):
        assert f1_from(0.0, 0.0) == 0.0

    def test_symmetry(self):
        assert f1_from(0.3, 0.8) == f1_from(0.8, 0.3)


class TestThresholdTable:
    def test_one_row_per_cutoff_in_order(self):
        scores = {"a": 0.9, "b": 0.4}
        truth = {"a": 1, "b": 0}
        cutoffs = [0.1, 0.5, 0.9, 0.99]
        rows = threshold_table(scores, truth, cutoffs)
        assert [row.cutoff for row in rows] == cutoffs

    def test_duplicate_cutoffs_duplicate_rows(self):
        scores = {"a": 0.9, "b": 0.4}
        truth = {"a": 1, "b": 0}
        rows = threshold_table(scores, truth, [0.5, 0.5])
        assert rows[0] == rows[1]

    def test_rows_equal_componentwise_recomputation(self):
        rng = np.random.default_rng(3)
        scores, truth = random_score_dataset(rng, n=25)
        cutoffs = [0.0, 0.3, 0.7, 1.0]
        rows = threshold_table(scores, truth, cutoffs)
        for cutoff, row in zip(cutoffs, rows):
            assert row == metrics_from(confusion_at(scores, truth, cutoff), cutoff)

    def test_empty_cutoffs_rejected(self):
        with pytest.raises(ConfigError):
            threshold_table({"a": 0.5}, {"a": 1}, [])

    def test_out_of_range_cutoff_rejected(self):
        with pytest.raises(ConfigError):
            threshold_table({"a": 0.5}, {"a": 1}, [0.5, 1.5])


class TestPrCurve:
    def test_cutoff_grid_is_distinct_scores_plus_endpoints(self):
        scores = {"a": 0.7, "b": 0.7, "c": 0.2}
        truth = {"a": 1, "b": 0, "c": 1}
        points = pr_curve(scores, truth)
        assert [p.cutoff for p in points] == [0.0, 0.2, 0.7, 1.0]

    def test_matches_brute_force_recount(self):
        """Every curve point equals a from-scratch confusion at its cutoff."""
        rng = np.random.default_rng(4)
        for _ in range(100):
            scores, truth = random_score_dataset(rng)
            if not any(truth[i] == 1 for i in scores):
                truth[next(iter(scores))] = 1
            for point in pr_curve(scores, truth):
                tp, fp, fn, tn = naive_confusion(scores, truth, point.cutoff)
                precision, recall, _, _ = naive_metrics(tp, fp, fn, tn)
                np.testing.assert_allclose((point.precision, point.recall),
                                           (precision, recall))

    def test_recall_non_increasing(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            scores, truth = random_score_dataset(rng)
            if not any(truth[i] == 1 for i in scores):
                truth[next(iter(scores))] = 1
            points = pr_curve(scores, truth)
            recalls = [p.recall for p in points]
            for earlier, later in zip(recalls, recalls[1:]):
                assert later <= earlier + 1e-12

    def test_perfect_separation_reaches_the_corner(self):
        scores = {"p1": 0.9, "p2": 0.8, "n1": 0.3, "n2": 0.1}
        truth = {"p1": 1, "p2": 1, "n1": 0, "n2": 0}
        points = pr_curve(scores, truth)
        assert any(p.precision == 1.0 and p.recall == 1.0 for p in points)

    def test_singleton_positive(self):
        points = pr_curve({"only": 0.7}, {"only": 1})
        assert PRPoint(cutoff=0.7, precision=1.0, recall=1.0) in points

    def test_no_positives_rejected(self):
        with pytest.raises(UndefinedRecallError):
            pr_curve({"a": 0.5, "b": 0.2}, {"a": 0, "b": 0})

    def test_table_agrees_with_curve_at_shared_cutoffs(self):
        rng = np.random.default_rng(6)
        scores, truth = random_score_dataset(rng, n=30)
        if not any(truth[i] == 1 for i in scores):
            truth[next(iter(scores))] = 1
        points = pr_curve(scores, truth)
        rows = threshold_table(scores, truth, [p.cutoff for p in points])
        for point, row in zip(points, rows):
            assert (point.precision, point.recall) == (row.precision, row.recall)


class TestEmitReport:
    def _fixture(self):
        scores = {"a": 0.9, "b": 0.6, "c": 0.3, "d": 0.1}
        truth = {"a": 1, "b": 0, "c": 1, "d": 0}
        rows = threshold_table(scores, truth, [0.1, 0.5, 0.9, 0.99])
        curve = pr_curve(scores, truth)
        return rows, curve

    def test_json_schema(self):
        rows, curve = self._fixture()
        text = emit_report(rows, curve, "json", dataset="docs", n=4, positives=2)
        payload = json.loads(text)
        assert set(payload) == {"dataset", "n", "positives", "table", "pr_curve"}
        assert payload["dataset"] == "docs"
        assert payload["n"] == 4
        assert payload["positives"] == 2
        assert len(payload["table"]) == 4
        assert set(payload["table"][0]) == {
            "cutoff", "precision", "recall", "f1", "accuracy"
        }
        assert set(payload["pr_curve"][0]) == {"cutoff", "precision", "recall"}

    def test_deterministic_bytes(self):
        rows, curve = self._fixture()
        first = emit_report(rows, curve, "json", dataset="d", n=4, positives=2)
        second = emit_report(rows, curve, "json", dataset="d", n=4, positives=2)
        assert first == second

    def test_csv_layout_and_fixed_decimals(self):
        rows, curve = self._fixture()
        text = emit_report(rows, curve, "csv")
        lines = text.splitlines()
        assert lines[0] == "cutoff,precision,recall,f1,accuracy"
        assert len(lines) == 5
        for line in lines[1:]:
            cells = line.split(",")
            assert len(cells) == 5
            for cell in cells:
                whole, frac = cell.split(".")
                assert len(frac) == 6

    def test_csv_values_round_to_source_rows(self):
        rows, curve = self._fixture()
        text = emit_report(rows, curve, "csv")
        for row, line in zip(rows, text.splitlines()[1:]):
            cells = [float(c) for c in line.split(",")]
            np.testing.assert_allclose(
                cells, [row.cutoff, row.precision, row.recall, row.f1, row.accuracy],
                atol=5e-7,
            )

    def test_empty_table_section(self):
        _, curve = self._fixture()
        payload = json.loads(emit_report([], curve, "json"))
        assert payload["table"] == []
        assert payload["pr_curve"]

    def test_unknown_format(self):
        rows, curve = self._fixture()
        with pytest.raises(ConfigError):
            emit_report(rows, curve, "yaml")

    def test_writes_file_when_path_given(self, tmp_path):
        rows, curve = self._fixture()
        out = tmp_path / "report.json"
        text = emit_report(rows, curve, "json", path=out)
        assert out.read_text() == text
