from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence

from rich.table import Table

from prgauge.cmi import cmi_score
from prgauge.entities import CmiReport
from prgauge.entities import MeasureValue
from prgauge.entities import ModelRecord
from prgauge.entities import RunConfig
from prgauge.logging_utils import get_logger
from prgauge.measures import RANDOM_BASELINE
from prgauge.measures import random_baseline
from prgauge.repository import score_repository
from prgauge.repository.corpus_repository import CorpusRepository

logger = get_logger()

CMI_FILE = "cmi.json"


def values_by_measure(values: Sequence[MeasureValue]) -> Dict[str, Dict[str, Optional[float]]]:
    table: Dict[str, Dict[str, Optional[float]]] = {}
    for value in values:
        table.setdefault(value.measure, {})[value.model_id] = value.value
    return table


def evaluate(
    records: Sequence[ModelRecord],
    values: Sequence[MeasureValue],
    seed: int,
    max_subset_size: int = 2,
    workers: Optional[int] = 1,
) -> List[CmiReport]:
    """One report per measure in the score table, followed by the seeded random baseline."""
    table = values_by_measure(values)
    if RANDOM_BASELINE not in table:
        table[RANDOM_BASELINE] = {record.id: random_baseline(seed, record.id) for record in records}
    return [
        cmi_score(records, table[measure], measure=measure, max_subset_size=max_subset_size, workers=workers)
        for measure in table
    ]


def execute(config: RunConfig, workers: Optional[int] = None) -> List[CmiReport]:
    repo = CorpusRepository(config.output_dir)
    records = repo.load_records()
    values = score_repository.load_scores(repo.scores_csv)
    reports = evaluate(records, values, config.seed, config.cmi.max_subset_size, workers)
    repo.write_json(repo.path(CMI_FILE), [report.model_dump(mode="json") for report in reports])
    for report in reports:
        for diagnostic in report.diagnostics:
            logger.warning(f"{report.measure}: {diagnostic}")
    return reports


def render_table(reports: Sequence[CmiReport], title: str = "CMI") -> Table:
    table = Table(title=title)
    table.add_column("Measure")
    table.add_column("n", justify="right")
    table.add_column("CMI", justify="right")
    table.add_column("CMI (pairs)", justify="right")
    table.add_column("Kendall tau", justify="right")
    for report in reports:
        table.add_row(
            report.measure,
            str(report.num_models),
            f"{report.cmi:.4f}",
            _optional(report.cmi_pairs_only),
            _optional(report.kendall_tau),
        )
    return table


def _optional(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4f}"
