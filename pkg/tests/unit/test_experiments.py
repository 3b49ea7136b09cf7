import os
from pathlib import Path

import numpy as np
import pytest

from prgauge.cli import load_config
from prgauge.domain import build_curves
from prgauge.domain import evaluate_cmi
from prgauge.domain import generate_corpus
from prgauge.domain import measure_invariance
from prgauge.domain import score_models
from prgauge.domain import time_curves
from prgauge.repository.corpus_repository import CorpusRepository

CONFIGS = Path(__file__).resolve().parents[2] / "configs"
WORKERS = os.cpu_count() or 1

pytestmark = pytest.mark.slow


def _run_generalization(output_dir):
    config = load_config(str(CONFIGS / "generalization.json"), output_dir=str(output_dir))
    result = generate_corpus.execute(config, workers=WORKERS)
    build_curves.execute(config, workers=WORKERS)
    score_models.execute(config, workers=WORKERS)
    reports = evaluate_cmi.execute(config, workers=WORKERS)
    return config, result, {report.measure: report for report in reports}


def test_gi_predicts_generalization(tmp_path):
    _, result, reports = _run_generalization(tmp_path / "run")

    assert len(result.records) >= 24 and not result.failures
    assert all(record.train_acc >= 0.95 for record in result.records)
    assert generate_corpus.gap_spread(result.records) >= 0.05
    assert reports["gi_intra_l0"].cmi - reports["random_baseline"].cmi >= 0.15
    assert reports["gi_intra_l0"].kendall_tau > 0


def test_rerun_is_byte_identical(tmp_path):
    first, _, _ = _run_generalization(tmp_path / "first")
    second, _, _ = _run_generalization(tmp_path / "second")
    for name in ("manifest.json", "scores.csv", "scores.json", evaluate_cmi.CMI_FILE):
        assert (Path(first.output_dir) / name).read_bytes() == (Path(second.output_dir) / name).read_bytes()


def test_batch_count_sensitivity(tmp_path):
    config = load_config(str(CONFIGS / "generalization.json"), output_dir=str(tmp_path / "run"))
    config = config.model_copy(update={"timing": config.timing.model_copy(update={"include_cmi": False})})
    generate_corpus.execute(config, workers=WORKERS)

    rows = {row.n_b: row for row in time_curves.execute(config, workers=WORKERS)}

    assert np.std(rows[32].values) < np.std(rows[4].values)
    assert os.path.exists(CorpusRepository(config.output_dir).path(time_curves.SENSITIVITY_FILE))


def test_invariance_ordering(tmp_path):
    config = load_config(str(CONFIGS / "invariance.json"), output_dir=str(tmp_path / "run"))
    generate_corpus.execute(config, workers=WORKERS)

    reports = {report.kind: report for report in measure_invariance.execute(config, workers=WORKERS)}

    rotate = reports["rotate"]
    assert rotate.mean_gi["full"] < rotate.mean_gi["none"]
    wins = 0
    for report in reports.values():
        rows = {row.measure: row for row in report.rows}
        wins += rows["gi"].cmi >= rows["mean_pr"].cmi
    assert wins >= 2
