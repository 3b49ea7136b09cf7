import json
import os

import pytest

from prgauge.cmi import cmi_score
from prgauge.domain import build_curves
from prgauge.domain import build_report
from prgauge.domain import combine_scores
from prgauge.domain import evaluate_cmi
from prgauge.domain import generate_corpus
from prgauge.domain import generate_data
from prgauge.domain import score_models
from prgauge.domain import time_curves
from prgauge.errors import MissingPrerequisiteError
from prgauge.errors import TrainingDivergedError
from prgauge.repository import score_repository
from prgauge.repository.corpus_repository import CorpusRepository


def _read(path):
    with open(path, "rb") as file:
        return file.read()


def test_plan_counts_grid_cells(tiny_config):
    config = tiny_config.model_copy(
        update={"corpus": tiny_config.corpus.model_copy(update={"axes": {"depth": [1, 2], "learning_rate": [0.1, 0.01], "label_noise": [0.0, 0.1, 0.2]}})}
    )
    cells = generate_corpus.plan_cells(config)
    assert len(cells) == 12
    assert [cell.model_id for cell in cells[:2]] == ["m000", "m001"]


def test_gen_data_writes_splits(tiny_config):
    paths = generate_data.execute(tiny_config)
    names = {os.path.basename(path) for path in paths}
    assert {"test.prgd", "validation.prgd", "train_noise0.prgd", "train_noise0.csv"} <= names


def test_corpus_is_resumable_and_deterministic(tiny_config):
    first = generate_corpus.execute(tiny_config, workers=1)
    assert first.trained == 4 and not first.failures
    repo = CorpusRepository(tiny_config.output_dir)
    manifest = _read(repo.manifest_path)
    again = generate_corpus.execute(tiny_config, workers=1)
    assert again.trained == 0 and again.skipped == 4
    assert _read(repo.manifest_path) == manifest
    records = json.loads(manifest)
    assert {"id", "hyperparams", "train_acc", "test_acc", "gap"} <= set(records[0])


def test_diverged_cell_is_reported(tiny_config, mocker):
    mocker.patch("prgauge.domain.generate_corpus.train", side_effect=TrainingDivergedError("loss is nan"))
    result = generate_corpus.execute(tiny_config, workers=1)
    assert len(result.failures) == 4
    assert os.path.exists(CorpusRepository(tiny_config.output_dir).failures_path)


def test_scoring_needs_curves(tiny_config):
    generate_corpus.execute(tiny_config, workers=1)
    with pytest.raises(MissingPrerequisiteError):
        score_models.execute(tiny_config, workers=1)


def test_full_pipeline_is_deterministic(tiny_config):
    generate_corpus.execute(tiny_config, workers=1)
    repo = CorpusRepository(tiny_config.output_dir)
    paths = build_curves.execute(tiny_config, workers=1)
    assert len(paths) == 4 * 3
    score_models.execute(tiny_config, workers=1)
    first_scores = _read(repo.scores_csv)

    build_curves.execute(tiny_config, workers=2)
    score_models.execute(tiny_config, workers=2)
    assert _read(repo.scores_csv) == first_scores

    values = combine_scores.execute(tiny_config)
    assert sum(value.measure == "avg_rank:gi_intra_l0+mixup_l0" for value in values) == 4
    combine_scores.execute(tiny_config)
    stored = score_repository.load_scores(repo.scores_csv)
    assert len(stored) == len(values)

    reports = evaluate_cmi.execute(tiny_config, workers=1)
    assert {report.measure for report in reports} >= {"gi_intra_l0", "random_baseline"}
    cmi_file = _read(repo.path(evaluate_cmi.CMI_FILE))
    evaluate_cmi.execute(tiny_config, workers=1)
    assert _read(repo.path(evaluate_cmi.CMI_FILE)) == cmi_file

    rows = time_curves.execute(tiny_config, workers=1)
    assert [row.n_b for row in rows] == [1, 2]
    with open(repo.path(time_curves.TIMING_FILE)) as file:
        assert file.readline().strip() == "n_b,mean_seconds,std_seconds,measure"

    report = build_report.execute(tiny_config)
    assert len(report["models"]) == 4
    assert os.path.exists(repo.path(build_report.REPORT_MD))
    for row in report["normalized"].values():
        assert row["gap"] is None or 0.0 <= row["gap"] <= 1.0


def test_min_max_constant_column():
    assert build_report.min_max({"a": 2.0, "b": 2.0, "c": None}) == {"a": 0.0, "b": 0.0, "c": None}


def test_average_cmi_across_tasks(toy_records, toy_values):
    report = evaluate_cmi.evaluate(toy_records, [], seed=0)
    assert [item.measure for item in report] == ["random_baseline"]
    first = [cmi_score(toy_records, toy_values, measure="m")]
    averaged = build_report.average_cmi({"task_a": first, "task_b": first})
    assert averaged["m"]["mean"] == pytest.approx(0.5)
    assert set(averaged["m"]["tasks"]) == {"task_a", "task_b"}


def test_stored_curve_is_rebuilt_when_batch_count_changes(tiny_config):
    generate_corpus.execute(tiny_config, workers=1)
    repo = CorpusRepository(tiny_config.output_dir)
    record = repo.load_records()[0]
    spec = tiny_config.perturbation_spec("mixup_intra", 0)
    assert build_curves.ensure_curve(tiny_config, repo, record, spec).n_b == 2

    fewer = tiny_config.model_copy(update={"curve": tiny_config.curve.model_copy(update={"n_b": 1})})

    assert build_curves.ensure_curve(fewer, repo, record, spec).n_b == 1
    assert build_curves.ensure_curve(tiny_config, repo, record, spec).n_b == 2
