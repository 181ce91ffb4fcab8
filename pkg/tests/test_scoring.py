import math

import numpy as np
import pytest

from predex.dataset import Dataset, load_csv_text
from predex.errors import ConfigError, DataError, InfluenceError, ScoreImportError
from predex.predicate import Selection, parse, evaluate
from predex.scoring import (
    ScoreVector,
    Strictness,
    aggregate_influence,
    fit_gaussian,
    import_scores,
    likelihood_influence,
    score_points,
    write_scores_csv,
)


def one_d(values, targets=("v",)):
    return Dataset.from_columns(
        {"v": list(values)}, {"v": "numeric"}, targets=list(targets)
    )


def sel_of(ids, n):
    mask = np.zeros(n, dtype=bool)
    mask[list(ids)] = True
    return Selection(mask)


class TestGaussian:
    def test_mean_on_simple_column(self):
        model = fit_gaussian(one_d([0, 0, 0, 10]))
        assert model.mean[0] == pytest.approx(2.5)

    def test_constant_column_is_regularized(self):
        model = fit_gaussian(one_d([122.153] * 6))
        assert model.covariance[0, 0] > 0
        sv = score_points(model, one_d([122.153] * 6))
        assert np.isfinite(sv.scores).all()

    def test_too_few_rows_errors(self):
        with pytest.raises(DataError):
            fit_gaussian(one_d([1.0]))

    def test_no_numeric_targets_errors(self):
        ds = Dataset.from_columns({"c": ["a", "b"]}, {"c": "categorical"}, targets=["c"])
        with pytest.raises(ConfigError):
            fit_gaussian(ds)

    def test_outlier_scores_highest(self):
        ds = one_d([0, 0, 0, 10])
        sv = score_points(fit_gaussian(ds), ds)
        assert int(np.argmax(sv.scores)) == 3

    def test_score_minimized_at_mean(self):
        rng = np.random.default_rng(0)
        values = rng.normal(5, 2, size=200).tolist()
        ds = one_d(values)
        model = fit_gaussian(ds)
        values2 = values + [float(model.mean[0])]
        sv = score_points(model, one_d(values2))
        assert int(np.argmin(sv.scores)) == len(values2) - 1

    def test_mahalanobis_monotone(self):
        ds = one_d([0.0, 1.0, 2.0, 3.0, 9.0])
        model = fit_gaussian(ds)
        sv = score_points(model, ds)
        dist = np.abs(np.array([0, 1, 2, 3, 9]) - model.mean[0])
        assert (np.argsort(sv.scores) == np.argsort(dist)).all()

    def test_missing_target_rows_get_max_score_and_flag(self):
        ds = load_csv_text("v\n1\n2\n3\nNA\n", {"v": {"kind": "numeric", "role": "target"}})
        sv = score_points(fit_gaussian(ds), ds)
        assert sv.imputed_rows == (3,)
        assert sv.scores[3] == sv.scores.max()

    def test_multivariate_fit(self):
        rng = np.random.default_rng(1)
        x = rng.normal(0, 1, 300)
        y = 0.5 * x + rng.normal(0, 0.1, 300)
        ds = Dataset.from_columns(
            {"x": x, "y": y}, {"x": "numeric", "y": "numeric"}, targets=["x", "y"]
        )
        sv = score_points(fit_gaussian(ds), ds)
        assert np.isfinite(sv.scores).all()


class TestImport:
    def test_side_file_one_per_line(self, t1_csv, tmp_path):
        ds = load_csv_text(t1_csv.read_text()).drop_feature("score")
        side = tmp_path / "scores.txt"
        side.write_text("\n".join(str(float(i)) for i in range(6)) + "\n")
        sv, ds2 = import_scores(ds, side)
        assert list(sv.scores) == [0, 1, 2, 3, 4, 5]
        assert ds2 is ds

    def test_row_id_csv(self, tmp_path):
        ds = one_d([1, 2, 3])
        side = tmp_path / "scores.csv"
        side.write_text("row_id,score\n2,9.0\n0,7.0\n1,8.0\n")
        sv, _ = import_scores(ds, side)
        assert list(sv.scores) == [7.0, 8.0, 9.0]

    def test_length_mismatch(self, tmp_path):
        ds = one_d([1, 2, 3])
        side = tmp_path / "scores.txt"
        side.write_text("1\n2\n")
        with pytest.raises(ScoreImportError, match="mismatch"):
            import_scores(ds, side)

    def test_non_finite_rejected(self, tmp_path):
        ds = one_d([1, 2, 3])
        side = tmp_path / "scores.txt"
        side.write_text("1\nNaN\n3\n")
        with pytest.raises(ScoreImportError) as err:
            import_scores(ds, side)
        assert err.value.row == 1

    def test_column_source_excluded_from_dataset(self, t1_csv):
        ds = load_csv_text(t1_csv.read_text())
        sv, ds2 = import_scores(ds, "score")
        assert list(sv.scores) == [9, 8, 7, 1, 1, 1]
        assert not ds2.has_feature("score")

    def test_orientation_flip_and_min_shift(self, tmp_path):
        ds = one_d([1, 2, 3])
        side = tmp_path / "s.txt"
        side.write_text("1\n2\n3\n")
        sv, _ = import_scores(ds, side, higher_is_anomalous=False, min_shift=True)
        assert list(sv.scores) == [2.0, 1.0, 0.0]

    def test_write_scores_round_trip(self, tmp_path):
        ds = one_d([1, 2, 3])
        sv = ScoreVector([0.5, 1.5, 2.5])
        path = tmp_path / "out.csv"
        write_scores_csv(sv, path)
        sv2, _ = import_scores(ds, path)
        assert list(sv2.scores) == [0.5, 1.5, 2.5]


class TestInfluence:
    def test_t1_values(self, t1):
        _, sv = t1
        assert likelihood_influence(sv, sel_of([0, 1], 6), 1.0) == pytest.approx(8.5, abs=1e-9)
        assert likelihood_influence(sv, sel_of([0, 1], 6), 0.5) == pytest.approx(
            17 / math.sqrt(2), abs=1e-9
        )
        assert likelihood_influence(sv, sel_of([2, 3, 4, 5], 6), 1.0) == pytest.approx(
            2.5, abs=1e-9
        )

    def test_empty_selection_is_error(self, t1):
        _, sv = t1
        with pytest.raises(InfluenceError):
            likelihood_influence(sv, sel_of([], 6), 1.0)

    def test_strictness_validation(self):
        with pytest.raises(ConfigError):
            Strictness(0.0)
        with pytest.raises(ConfigError):
            Strictness(1.5)

    def test_scaling_equivariance(self):
        rng = np.random.default_rng(2)
        scores = rng.normal(3, 2, size=50)
        mask = rng.random(50) < 0.4
        sel = Selection(mask)
        for c in (0.3, 0.7, 1.0):
            base = likelihood_influence(scores, sel, c)
            assert likelihood_influence(2.5 * scores, sel, c) == pytest.approx(2.5 * base)

    def test_c_equal_one_is_plain_mean_rule(self):
        rng = np.random.default_rng(3)
        scores = rng.normal(0, 1, size=40)
        mask = rng.random(40) < 0.5
        sel = Selection(mask)
        assert likelihood_influence(scores, sel, 1.0) == pytest.approx(
            float(scores[mask].sum()) / mask.sum()
        )


class TestAggregateInfluence:
    def test_single_outlier(self):
        sel = sel_of([3], 4)
        assert aggregate_influence([1, 1, 1, 9], sel) == pytest.approx(2.0)

    def test_value_at_mean(self):
        values = [2.0, 4.0, 6.0]
        sel = sel_of([1], 3)
        expected = (np.mean(values) - np.mean([2.0, 6.0])) / 1
        assert aggregate_influence(values, sel) == pytest.approx(expected)

    def test_all_rows_is_error(self):
        with pytest.raises(InfluenceError):
            aggregate_influence([1, 2, 3], sel_of([0, 1, 2], 3))

    def test_empty_is_error(self):
        with pytest.raises(InfluenceError):
            aggregate_influence([1, 2, 3], sel_of([], 3))


def test_duplicate_row_never_raises_rank(t1):
    # duplicating a row leaves its own Gaussian score rank no higher
    values = [0.0, 1.0, 2.0, 3.0, 12.0]
    ds = one_d(values)
    sv = score_points(fit_gaussian(ds), ds)
    rank_before = (sv.scores > sv.scores[4]).sum()
    values2 = values + [12.0]
    ds2 = one_d(values2)
    sv2 = score_points(fit_gaussian(ds2), ds2)
    rank_after = (sv2.scores > sv2.scores[4]).sum()
    assert rank_after <= rank_before


def test_evaluate_then_influence_chain(t1):
    ds, sv = t1
    sel = evaluate(parse("city = 'Boston'"), ds)
    assert likelihood_influence(sv, sel, 1.0) == pytest.approx(8.5)
