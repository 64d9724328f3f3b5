"""Tests for challenge metrics, reports and ranking."""

import numpy as np
import pytest

from core.algorithms.metrics import (
    build_report,
    challenge_score,
    dsc,
    evaluate_dirs,
    jsc,
    miou,
    pair_counts,
    rank_teams,
    score_pair,
    split_aggregate,
    summarize_domains,
)
from core.domain.errors import IngestionError, InputValidationError, ShapeMismatchError
from formatters import render_leaderboard_csv, render_report_csv
from infrastructure.data.dataset_store import write_mask


@pytest.fixture
def fixture_pair():
    """4x4 grid with |P|=4, |G|=6 and |P n G|=3."""
    gt = np.zeros(16, dtype=bool)
    gt[:6] = True
    pred = np.zeros(16, dtype=bool)
    pred[3:7] = True
    return pred.reshape(4, 4), gt.reshape(4, 4)


def naive_counts(pred: np.ndarray, gt: np.ndarray) -> tuple[int, int, int]:
    inter = pred_area = gt_area = 0
    for p, g in zip(pred.ravel().tolist(), gt.ravel().tolist(), strict=True):
        inter += p and g
        pred_area += p
        gt_area += g
    return inter, pred_area, gt_area


class TestPixelMetrics:
    """Test DSC, JSC and mIoU."""

    def test_fixture_values(self, fixture_pair):
        pred, gt = fixture_pair
        assert dsc(pred, gt) == pytest.approx(0.6)
        assert jsc(pred, gt) == pytest.approx(3 / 7)
        assert miou(pred, gt) == pytest.approx(0.5 * (3 / 7 + 9 / 13))
        assert miou(pred, gt) == pytest.approx(0.5604, abs=1e-4)

    def test_fixture_counts(self, fixture_pair):
        counts = pair_counts(*fixture_pair)
        assert (counts.intersection, counts.pred_area, counts.gt_area, counts.union) == (3, 4, 6, 7)

    def test_identical_masks(self, fixture_pair):
        _, gt = fixture_pair
        assert dsc(gt, gt) == jsc(gt, gt) == miou(gt, gt) == 1.0

    def test_both_empty_is_perfect(self):
        empty = np.zeros((4, 4), dtype=bool)
        assert dsc(empty, empty) == jsc(empty, empty) == miou(empty, empty) == 1.0

    def test_disjoint_masks(self):
        pred = np.zeros((4, 4), dtype=bool)
        gt = np.zeros((4, 4), dtype=bool)
        pred[0, 0] = gt[3, 3] = True
        assert dsc(pred, gt) == 0.0
        assert jsc(pred, gt) == 0.0

    def test_all_foreground_background_iou(self):
        full = np.ones((4, 4), dtype=bool)
        assert miou(full, full) == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            dsc(np.zeros((4, 4)), np.zeros((4, 5)))

    def test_match_naive_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            pred = rng.random((16, 16)) < rng.random()
            gt = rng.random((16, 16)) < rng.random()
            inter, p_area, g_area = naive_counts(pred, gt)
            union = p_area + g_area - inter
            total = 256

            expected_dsc = 1.0 if p_area + g_area == 0 else 2 * inter / (p_area + g_area)
            expected_jsc = 1.0 if union == 0 else inter / union
            bg_union = total - inter
            expected_bg = 1.0 if bg_union == 0 else (total - union) / bg_union
            assert dsc(pred, gt) == expected_dsc
            assert jsc(pred, gt) == expected_jsc
            assert miou(pred, gt) == (expected_jsc + expected_bg) / 2.0

    def test_jaccard_dice_identity(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            pred = rng.random((16, 16)) < 0.4
            gt = rng.random((16, 16)) < 0.4
            if not (pred | gt).any():
                continue
            d = dsc(pred, gt)
            assert jsc(pred, gt) == pytest.approx(d / (2 - d), abs=1e-12)
            assert dsc(pred, gt) == dsc(gt, pred)

    def test_correct_pixel_never_lowers_dice(self, fixture_pair):
        pred, gt = fixture_pair
        better = pred.copy()
        better[0, 0] = True
        assert dsc(better, gt) >= dsc(pred, gt)


class TestChallengeScore:
    """Test the combined score."""

    def test_fixture_score(self):
        assert challenge_score(0.6, 3 / 7) == pytest.approx(0.514286, abs=1e-6)

    @pytest.mark.parametrize("x", [0.0, 0.37, 1.0])
    def test_equal_inputs(self, x):
        assert challenge_score(x, x) == pytest.approx(x)

    @pytest.mark.parametrize("d, j", [(1.2, 0.5), (0.5, -0.1), (float("nan"), 0.5)])
    def test_out_of_range(self, d, j):
        with pytest.raises(InputValidationError):
            challenge_score(d, j)


class TestReports:
    """Test report aggregation and CSV rendering."""

    def test_per_image_mean(self, fixture_pair):
        pred, gt = fixture_pair
        report = build_report([("a", pred, gt), ("b", gt, gt)])
        assert report.aggregate.score == pytest.approx((0.514286 + 1.0) / 2, abs=1e-6)

    def test_pooled_uses_summed_counts(self, fixture_pair):
        pred, gt = fixture_pair
        report = build_report([("a", pred, gt), ("b", gt, gt)], aggregation="pooled")
        # pooled: |P n G| = 3 + 6, |P| + |G| = 10 + 12
        assert report.aggregate.dsc == pytest.approx(18 / 22)
        assert report.aggregate.name == "AGGREGATE"

    def test_empty_report(self):
        with pytest.raises(InputValidationError):
            build_report([])

    def test_csv_layout(self):
        row = {"name": "ConvNeXt", "dsc": 0.8568, "miou": 0.7433, "jsc": 0.75, "score": 0.8034}
        text = render_report_csv([row], row)
        lines = text.splitlines()
        assert lines[0] == "name,dsc,miou,jsc,score"
        assert lines[1].startswith("ConvNeXt,0.856800,0.743300,")
        assert lines[2].startswith("AGGREGATE,")

    def test_domain_summaries(self, fixture_pair):
        pred, gt = fixture_pair
        report = build_report([("A_0000", pred, gt), ("A_0001", gt, gt), ("D_0000", gt, gt)])
        domains = {"A_0000": "A", "A_0001": "A", "D_0000": "D"}

        summaries = summarize_domains(report, domains, seen_domains={"A"})
        halves = split_aggregate(report, domains, seen_domains={"A"})

        assert [s["domain_id"] for s in summaries] == ["A", "D"]
        assert summaries[0]["images"] == 2 and summaries[0]["seen"]
        assert not summaries[1]["seen"]
        assert halves["unseen"].score == 1.0
        assert halves["seen"].score == pytest.approx(summaries[0]["score"])


class TestEvaluateDirs:
    """Test directory scoring."""

    def test_same_dir_scores_one(self, tmp_path, fixture_pair):
        _, gt = fixture_pair
        write_mask(tmp_path / "a.png", gt)
        write_mask(tmp_path / "b.png", ~gt)

        report = evaluate_dirs(tmp_path, tmp_path)

        assert [r.name for r in report.rows] == ["a", "b"]
        assert all(r.score == r.dsc == r.jsc == r.miou == 1.0 for r in report.rows)

    def test_dataset_dir_with_masks_folder(self, tmp_path, fixture_pair):
        pred, gt = fixture_pair
        (tmp_path / "gt" / "masks").mkdir(parents=True)
        (tmp_path / "pred").mkdir()
        write_mask(tmp_path / "gt" / "masks" / "x.png", gt)
        write_mask(tmp_path / "pred" / "x.png", pred)

        report = evaluate_dirs(tmp_path / "pred", tmp_path / "gt")

        assert report.rows[0].score == pytest.approx(score_pair("x", pred, gt).score)

    def test_unmatched_stem(self, tmp_path, fixture_pair):
        _, gt = fixture_pair
        (tmp_path / "pred").mkdir()
        (tmp_path / "gt").mkdir()
        write_mask(tmp_path / "gt" / "a.png", gt)
        write_mask(tmp_path / "gt" / "lonely.png", gt)
        write_mask(tmp_path / "pred" / "a.png", gt)

        with pytest.raises(IngestionError, match="lonely"):
            evaluate_dirs(tmp_path / "pred", tmp_path / "gt")


class TestRankTeams:
    """Test leaderboard ordering."""

    def test_task_one_order(self):
        ranked = rank_teams({"Zhijian Life": 0.7719, "agalaran": 0.7865, "deepmicroscopy": 0.7776})
        assert [e["name"] for e in ranked] == ["agalaran", "deepmicroscopy", "Zhijian Life"]
        assert [e["rank"] for e in ranked] == [1, 2, 3]

    def test_task_two_order(self):
        ranked = rank_teams({"Biototem": 0.8354, "Zhijian Life": 0.8192, "deepmicroscopy": 0.8527})
        assert [e["name"] for e in ranked] == ["deepmicroscopy", "Biototem", "Zhijian Life"]

    def test_ties_are_alphabetical(self):
        ranked = rank_teams({"beta": 0.5, "alpha": 0.5, "gamma": 0.9})
        assert [e["name"] for e in ranked] == ["gamma", "alpha", "beta"]

    def test_non_finite(self):
        with pytest.raises(InputValidationError, match="bad"):
            rank_teams({"bad": float("inf"), "ok": 0.5})

    def test_leaderboard_csv(self):
        text = render_leaderboard_csv(rank_teams({"a": 0.5}))
        assert text == "rank,name,score\n1,a,0.500000\n"
