import numpy as np
import pytest
from scipy.stats import rankdata

from prgauge.combine import Combination
from prgauge.combine import ScoreMatrix
from prgauge.combine import build_score_matrix
from prgauge.combine import combine
from prgauge.combine import first_component
from prgauge.combine import orient
from prgauge.combine import parse_combination
from prgauge.combine import pca_combine
from prgauge.entities import MeasureValue
from prgauge.entities import Orientation
from prgauge.errors import ConfigError
from prgauge.errors import InvalidScoreMatrixError

LOW = Orientation.LOWER_BETTER


def _matrix(**columns) -> ScoreMatrix:
    size = len(next(iter(columns.values())))
    return ScoreMatrix(
        model_ids=tuple(f"m{i:03d}" for i in range(size)),
        columns={name: np.asarray(values, dtype=float) for name, values in columns.items()},
        orientations={name: LOW for name in columns},
    )


def test_parse_combination():
    combination = parse_combination("pca:gi_intra_l0+mixup_l0")
    assert combination == Combination(method="pca", columns=("gi_intra_l0", "mixup_l0"))
    assert combination.label == "pca:gi_intra_l0+mixup_l0"
    with pytest.raises(ConfigError):
        parse_combination("median:a+b")
    with pytest.raises(ConfigError):
        parse_combination("prod:a+b+c")


def test_pca_matches_eigen_decomposition():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.standard_normal(20)
        matrix = _matrix(gi_a=x, other=0.5 * x + rng.standard_normal(20))
        centered = matrix.values() - matrix.values().mean(axis=0)
        _, vectors = np.linalg.eigh(centered.T @ centered / len(centered))
        expected = centered @ vectors[:, -1]
        if expected @ centered[:, 0] < 0:
            expected = -expected
        assert np.allclose(pca_combine(matrix), expected, atol=1e-8)


def test_power_iteration_on_three_columns():
    rng = np.random.default_rng(1)
    data = rng.standard_normal((30, 3)) @ np.array([[2.0, 0.5, 0.1], [0.0, 1.0, 0.3], [0.0, 0.0, 0.2]])
    covariance = np.cov(data.T, bias=True)
    component = first_component(covariance)
    _, vectors = np.linalg.eigh(covariance)
    assert abs(abs(component @ vectors[:, -1]) - 1.0) < 1e-8


def test_pca_sign_follows_first_column():
    rng = np.random.default_rng(2)
    first = rng.standard_normal(15)
    second = first + 0.1 * rng.standard_normal(15)
    flipped = pca_combine(_matrix(a=first, b=-second))
    assert np.corrcoef(flipped, first)[0, 1] > 0


def test_npca_rejects_constant_column():
    with pytest.raises(InvalidScoreMatrixError, match="flat"):
        combine(_matrix(gi_a=[1.0, 2.0, 3.0], flat=[1.0, 1.0, 1.0]), parse_combination("npca:gi_a+flat"))


def test_avg_rank_matches_scalar_reference():
    a = [0.3, 0.1, 0.3, 0.9]
    b = [2.0, 5.0, 1.0, 1.0]
    combined, _ = combine(_matrix(a=a, b=b), parse_combination("avg_rank:a+b"))
    reference = [(ra + rb) / 2 for ra, rb in zip(rankdata(a), rankdata(b))]
    assert np.allclose(combined, reference)
    assert np.allclose(combined, [2.75, 2.5, 2.0, 2.75])


def test_prod_and_avg():
    matrix = _matrix(a=[1.0, 2.0], b=[3.0, 4.0])
    assert np.allclose(combine(matrix, parse_combination("prod:a+b"))[0], [3.0, 8.0])
    assert np.allclose(combine(matrix, parse_combination("prod_avg:a+b"))[0], [5.0, 11.0])
    assert np.allclose(combine(matrix, parse_combination("avg:a+b"))[0], [2.0, 3.0])


def test_pal_is_negated_next_to_gi():
    matrix = _matrix(gi_intra_l0=[0.1, 0.2], pal_intra_l0=[1.0, 2.0])
    oriented = orient(matrix)
    assert np.allclose(oriented.columns["pal_intra_l0"], [-1.0, -2.0])
    assert orient(oriented) is oriented


def test_pal_is_kept_without_gi():
    matrix = _matrix(pal_intra_l0=[1.0, 2.0], mixup_l0=[0.5, 0.6])
    assert orient(matrix) is matrix


def test_build_score_matrix_excludes_missing():
    values = [
        MeasureValue(model_id="m000", measure="a", value=1.0, orientation=LOW),
        MeasureValue(model_id="m001", measure="a", value=2.0, orientation=LOW),
        MeasureValue(model_id="m002", measure="a", value=None, orientation=LOW),
    ]
    matrix, excluded = build_score_matrix(values, ["a"])
    assert matrix.model_ids == ("m000", "m001")
    assert excluded == ["m002"]


def test_power_iteration_finds_leading_component_off_the_ones_direction():
    first = np.array([1.0, -1.0, 1.0, -1.0])
    matrix = _matrix(gi_a=first, gi_b=-first, gi_c=np.array([1.0, 1.0, -1.0, -1.0]))
    centered = matrix.values() - matrix.values().mean(axis=0)
    covariance = centered.T @ centered / len(centered)

    component = first_component(covariance)

    assert abs(component @ np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0)) == pytest.approx(1.0, abs=1e-8)
    assert float(component @ covariance @ component) == pytest.approx(2.0)


def test_power_iteration_on_zero_covariance():
    assert np.array_equal(first_component(np.zeros((3, 3))), np.array([1.0, 0.0, 0.0]))
