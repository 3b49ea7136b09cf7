import time
from dataclasses import dataclass
from typing import List
from typing import Optional
from typing import Sequence

import numpy as np

from prgauge.cmi import cmi_score
from prgauge.domain.build_curves import load_model_and_data
from prgauge.entities import ModelRecord
from prgauge.entities import RunConfig
from prgauge.errors import ConfigError
from prgauge.logging_utils import get_logger
from prgauge.measures import MeasureKey
from prgauge.measures import evaluate_curve_measure
from prgauge.measures import parse_measure_name
from prgauge.parallel import map_ordered
from prgauge.prcurve import build_pr_curve
from prgauge.repository.corpus_repository import CorpusRepository
from prgauge.repository.table_repository import save_table
from prgauge.seeding import derive_seed

logger = get_logger()

TIMING_FILE = "timing.csv"
SENSITIVITY_FILE = "sensitivity.csv"
TIMING_COLUMNS = ["n_b", "mean_seconds", "std_seconds", "measure"]
SENSITIVITY_COLUMNS = ["n_b", "measure", "value_mean", "value_std", "cmi_mean", "cmi_std"]


@dataclass(frozen=True)
class TimingRow:
    n_b: int
    seconds: List[float]
    values: List[float]
    cmis: List[float]


def repeat_seed(seed: int, repeat: int) -> int:
    return derive_seed(seed, "timing", repeat)


def _curve_value(config: RunConfig, key: MeasureKey, record: ModelRecord, repo: CorpusRepository, n_b: int, seed: int) -> float:
    net, dataset = load_model_and_data(repo, record)
    curve = build_pr_curve(
        net,
        dataset,
        config.perturbation_spec(key.kind, key.layer),  # type: ignore[arg-type]
        n_p=config.curve.n_p,
        n_b=n_b,
        b_s=config.curve.b_s,
        seed=seed,
        model_id=record.id,
    )
    return evaluate_curve_measure(key, curve, config.curve.pal_mode)


def time_model(config: RunConfig, repo: CorpusRepository, record: ModelRecord, n_b: int) -> TimingRow:
    """Wall-clock seconds and measure value of `repeats` curve builds with n_b batches, one seed per repeat."""
    key = parse_measure_name(config.timing.measure)
    spec = config.perturbation_spec(key.kind, key.layer)  # type: ignore[arg-type]
    net, dataset = load_model_and_data(repo, record)
    seconds, values = [], []
    for repeat in range(config.timing.repeats):
        start = time.perf_counter()
        curve = build_pr_curve(
            net,
            dataset,
            spec,
            n_p=config.curve.n_p,
            n_b=n_b,
            b_s=config.curve.b_s,
            seed=repeat_seed(config.seed, repeat),
            model_id=record.id,
        )
        seconds.append(time.perf_counter() - start)
        values.append(evaluate_curve_measure(key, curve, config.curve.pal_mode))
    return TimingRow(n_b=n_b, seconds=seconds, values=values, cmis=[])


def corpus_cmis(config: RunConfig, repo: CorpusRepository, records: Sequence[ModelRecord], n_b: int, workers: Optional[int] = None) -> List[float]:
    """CMI of the timed measure over the corpus, once per repeat."""
    key = parse_measure_name(config.timing.measure)
    cmis = []
    for repeat in range(config.timing.repeats):
        seed = repeat_seed(config.seed, repeat)
        scores = map_ordered(lambda record: _curve_value(config, key, record, repo, n_b, seed), records, workers)
        values = {record.id: score for record, score in zip(records, scores)}
        cmis.append(cmi_score(records, values, measure=key.name, max_subset_size=config.cmi.max_subset_size).cmi)
    return cmis


def select_record(records: Sequence[ModelRecord], model_id: Optional[str]) -> ModelRecord:
    if not records:
        raise ConfigError("The corpus manifest is empty")
    if model_id is None:
        return records[0]
    for record in records:
        if record.id == model_id:
            return record
    raise ConfigError(f"Model '{model_id}' is not in the corpus manifest")


def execute(config: RunConfig, workers: Optional[int] = None) -> List[TimingRow]:
    repo = CorpusRepository(config.output_dir)
    records = repo.load_records()
    record = select_record(records, config.timing.model_id)
    measure = config.timing.measure
    rows = []
    for n_b in config.timing.batch_counts:
        row = time_model(config, repo, record, n_b)
        if config.timing.include_cmi:
            row = TimingRow(n_b=n_b, seconds=row.seconds, values=row.values, cmis=corpus_cmis(config, repo, records, n_b, workers))
        logger.info(f"n_b={n_b}: {np.mean(row.seconds):.4f}s per curve, {measure} std {np.std(row.values):.4g}")
        rows.append(row)

    save_table(
        repo.path(TIMING_FILE),
        TIMING_COLUMNS,
        [[row.n_b, float(np.mean(row.seconds)), float(np.std(row.seconds)), measure] for row in rows],
    )
    save_table(
        repo.path(SENSITIVITY_FILE),
        SENSITIVITY_COLUMNS,
        [
            [
                row.n_b,
                measure,
                float(np.mean(row.values)),
                float(np.std(row.values)),
                float(np.mean(row.cmis)) if row.cmis else None,
                float(np.std(row.cmis)) if row.cmis else None,
            ]
            for row in rows
        ],
    )
    return rows
