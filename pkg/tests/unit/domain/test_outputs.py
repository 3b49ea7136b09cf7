import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from prgauge.domain import measure_invariance
from prgauge.domain import plot_curves
from prgauge.domain import score_models
from prgauge.domain.time_curves import select_record
from prgauge.entities import AugmentationInfo
from prgauge.entities import ModelRecord
from prgauge.entities import PerturbationSpec
from prgauge.entities import RunConfig
from prgauge.errors import ConfigError
from prgauge.errors import InsufficientModelsError
from prgauge.repository.corpus_repository import CorpusRepository
from prgauge.repository.curve_repository import save_curve
from prgauge.scores import gi_score

ROTATE = PerturbationSpec(kind="rotate", alpha_min=-180.0, alpha_max=179.0)
LEVELS = ("none", "partial", "full")
# Gaps are not monotone in model id within a depth group, so pair signs are mixed.
GAPS = [0.20, 0.30, 0.10, 0.05, 0.25, 0.15]


def _polygon(svg_path, gid):
    root = ET.parse(svg_path).getroot()
    group = next(element for element in root.iter() if element.get("id") == gid)
    path = next(element for element in group.iter() if element.tag.endswith("path"))
    numbers = [float(token) for token in re.findall(r"-?\d+(?:\.\d+)?(?:e-?\d+)?", path.get("d"))]
    return np.array(numbers).reshape(-1, 2)


def _shoelace(points):
    x, y = points[:, 0], points[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def test_plot_area_matches_gi(tmp_path, make_curve):
    curve = make_curve([1.0, 0.95, 0.85, 0.7, 0.6, 0.5, 0.45, 0.4, 0.38, 0.35, 0.3])
    path = tmp_path / "curve.csv"
    save_curve(str(path), curve)
    output = tmp_path / "plot.svg"

    plot_curves.execute([str(path)], str(output))

    ratio = _shoelace(_polygon(output, "gi-area-0")) / _shoelace(_polygon(output, "ideal-area-0"))
    assert ratio == pytest.approx(gi_score(curve), rel=0.02)


def test_plot_of_unaffected_model_has_no_area(tmp_path, make_curve):
    path = tmp_path / "flat.csv"
    save_curve(str(path), make_curve(np.ones(11)))
    output = tmp_path / "flat.svg"

    plot_curves.execute([str(path)], str(output))

    assert _shoelace(_polygon(output, "gi-area-0")) == pytest.approx(0.0, abs=1e-6)


def test_plot_is_byte_stable(tmp_path, make_curve):
    path = tmp_path / "curve.csv"
    save_curve(str(path), make_curve(np.linspace(1.0, 0.4, 11)))
    plot_curves.execute([str(path)], str(tmp_path / "a.svg"))
    plot_curves.execute([str(path)], str(tmp_path / "b.svg"))
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_plot_needs_curves(tmp_path):
    with pytest.raises(ConfigError):
        plot_curves.execute([], str(tmp_path / "none.svg"))


def test_score_curve_files(tmp_path, make_curve):
    path = tmp_path / "ones.csv"
    save_curve(str(path), make_curve(np.ones(11), model_id="m007"))

    values = {value.measure: value for value in score_models.score_curve_files([str(path)])}

    assert values["gi_intra_l0"].value == pytest.approx(0.0, abs=1e-12)
    assert values["pal_intra_l0"].value == pytest.approx(1.0)
    assert values["mean_pr_intra_l0"].value == pytest.approx(1.0)
    assert values["gi_intra_l0"].model_id == "m007"


def test_select_record(make_record):
    records = [make_record("m000", 0.1), make_record("m001", 0.2)]
    assert select_record(records, None).id == "m000"
    assert select_record(records, "m001").id == "m001"
    with pytest.raises(ConfigError):
        select_record(records, "m999")
    with pytest.raises(ConfigError):
        select_record([], None)


def _invariance_config(tmp_path, **invariance):
    return RunConfig.model_validate(
        {
            "seed": 1,
            "output_dir": str(tmp_path),
            "dataset": {"kind": "glyphs", "num_classes": 4, "num_samples": 64},
            "corpus": {
                "architecture": "conv",
                "axes": {"depth": [1, 2]},
                "augmentation_levels": list(LEVELS),
                "augmentation_kinds": ["rotate"],
            },
            "perturbations": [ROTATE.model_dump()],
            "invariance": {"kinds": ["rotate"], "measures": ["gi", "mean_pr", "pal"], "min_models": 4, **invariance},
        }
    )


def _augmented_records(train_acc=1.0):
    records = []
    for index, (level, depth) in enumerate((level, depth) for level in LEVELS for depth in (1, 2)):
        records.append(
            ModelRecord(
                id=f"m{index:03d}",
                hyperparams={"depth": depth, "augmentation": level},
                train_acc=train_acc,
                test_acc=train_acc - GAPS[index],
                augmentation=AugmentationInfo(level=level, kind="rotate"),
            )
        )
    return records


def test_invariance_refuses_pal_on_signed_range(tmp_path, mocker, make_curve):
    config = _invariance_config(tmp_path)
    records = _augmented_records()

    def _fake_curve(config, repo, record, spec):
        gap = GAPS[int(record.id[1:])]
        return make_curve(np.linspace(1.0, 1.0 - 2 * gap, 11), spec=spec, model_id=record.id)

    mocker.patch("prgauge.domain.measure_invariance.ensure_curve", side_effect=_fake_curve)

    report = measure_invariance.measure_kind(config, CorpusRepository(str(tmp_path)), records, "rotate")

    rows = {row.measure: row for row in report.rows}
    assert rows["pal"].refused is not None and rows["pal"].cmi is None
    assert rows["gi"].cmi == pytest.approx(1.0)
    assert set(report.mean_gi) == set(LEVELS)
    none_gi = [gi_score(_fake_curve(config, None, record, ROTATE)) for record in records[:2]]
    assert report.mean_gi["none"] == pytest.approx(np.mean(none_gi))


def test_invariance_needs_enough_qualifying_models(tmp_path):
    config = _invariance_config(tmp_path, train_accuracy_floor=0.9)
    records = _augmented_records(train_acc=0.85)
    with pytest.raises(InsufficientModelsError):
        measure_invariance.measure_kind(config, CorpusRepository(str(tmp_path)), records, "rotate")
