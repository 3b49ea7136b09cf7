import numpy as np
import pytest

from prgauge.datasets import gen_glyphs
from prgauge.entities import MeasureValue
from prgauge.entities import Orientation
from prgauge.errors import ArtifactFormatError
from prgauge.errors import MissingPrerequisiteError
from prgauge.repository import dataset_repository
from prgauge.repository import score_repository
from prgauge.repository.curve_repository import load_curve
from prgauge.repository.curve_repository import save_curve


def test_dataset_round_trip(tmp_path):
    glyphs = gen_glyphs(3, 10, 8, seed=1)
    path = str(tmp_path / "glyphs.prgd")
    dataset_repository.save_dataset(path, glyphs)
    loaded = dataset_repository.load_dataset(path, split="train")
    assert np.array_equal(loaded.inputs, glyphs.inputs.astype(np.float32).astype(np.float64))
    assert np.array_equal(loaded.labels, glyphs.labels)
    assert loaded.num_classes == 3
    assert loaded.split == "train"


def test_dataset_bad_magic(tmp_path):
    path = tmp_path / "bad.prgd"
    path.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(ArtifactFormatError):
        dataset_repository.load_dataset(str(path))


def test_curve_round_trip(tmp_path, make_curve):
    curve = make_curve(np.linspace(1.0, 0.4, 11), model_id="m007")
    path = str(tmp_path / "curve.csv")
    save_curve(path, curve)
    loaded = load_curve(path)
    assert np.array_equal(loaded.accuracies, curve.accuracies)
    assert np.array_equal(loaded.norm_alphas, curve.norm_alphas)
    assert loaded.spec == curve.spec
    assert loaded.model_id == "m007"


def test_malformed_curve_names_the_line(tmp_path):
    path = tmp_path / "curve.csv"
    path.write_text("# prgauge pr-curve\nalpha,norm_alpha,accuracy,kept_count\n0.0,0.0,1.0,\n0.5,zero,0.5,\n")
    with pytest.raises(ArtifactFormatError) as error:
        load_curve(str(path))
    assert error.value.line == 4
    assert "curve.csv:4" in str(error.value)


def test_missing_curve(tmp_path):
    with pytest.raises(MissingPrerequisiteError):
        load_curve(str(tmp_path / "absent.csv"))


def test_scores_keep_missing_values(tmp_path):
    values = [
        MeasureValue(model_id="m001", measure="gi_intra_l0", value=0.25, orientation=Orientation.LOWER_BETTER),
        MeasureValue(model_id="m000", measure="pal_intra_l0", value=None, orientation=Orientation.LOWER_BETTER),
    ]
    csv_path, json_path = str(tmp_path / "scores.csv"), str(tmp_path / "scores.json")
    score_repository.save_scores(csv_path, json_path, values)
    loaded = score_repository.load_scores(csv_path)
    assert [value.model_id for value in loaded] == ["m000", "m001"]
    assert loaded[0].value is None
    assert loaded[1].value == 0.25
