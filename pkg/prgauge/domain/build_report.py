import os
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence

import numpy as np

from prgauge.domain.evaluate_cmi import CMI_FILE
from prgauge.domain.generate_corpus import gap_spread
from prgauge.domain.measure_invariance import INVARIANCE_FILE
from prgauge.domain.time_curves import SENSITIVITY_FILE
from prgauge.domain.time_curves import TIMING_FILE
from prgauge.entities import CmiReport
from prgauge.entities import MeasureValue
from prgauge.entities import ModelRecord
from prgauge.entities import RunConfig
from prgauge.logging_utils import get_logger
from prgauge.repository import score_repository
from prgauge.repository.corpus_repository import CorpusRepository
from prgauge.repository.table_repository import load_table

logger = get_logger()

REPORT_JSON = "report.json"
REPORT_MD = "report.md"


def min_max(values: Dict[str, Optional[float]]) -> Dict[str, Optional[float]]:
    """Maps the present values of one column onto [0, 1]; a constant column maps to 0."""
    present = [value for value in values.values() if value is not None]
    if not present:
        return dict(values)
    low, high = min(present), max(present)
    span = high - low
    return {key: None if value is None else (0.0 if span == 0 else (value - low) / span) for key, value in values.items()}


def normalized_scores(records: Sequence[ModelRecord], values: Sequence[MeasureValue]) -> Dict[str, Dict[str, Optional[float]]]:
    """Corpus-normalized gap plus one corpus-normalized column per measure, keyed by model id."""
    columns: Dict[str, Dict[str, Optional[float]]] = {"gap": {record.id: record.gap for record in records}}
    for value in values:
        columns.setdefault(value.measure, {})[value.model_id] = value.value
    normalized = {name: min_max(column) for name, column in columns.items()}
    return {record.id: {name: column.get(record.id) for name, column in normalized.items()} for record in records}


def average_cmi(task_reports: Dict[str, List[CmiReport]]) -> Dict[str, Dict[str, Any]]:
    """Mean CMI per measure over the tasks that report it."""
    by_measure: Dict[str, Dict[str, float]] = {}
    for task, reports in task_reports.items():
        for report in reports:
            by_measure.setdefault(report.measure, {})[task] = report.cmi
    return {
        measure: {"mean": float(np.mean(list(tasks.values()))), "tasks": dict(sorted(tasks.items()))}
        for measure, tasks in sorted(by_measure.items())
    }


def _load_cmi(repo: CorpusRepository) -> Optional[List[CmiReport]]:
    path = repo.path(CMI_FILE)
    if not os.path.exists(path):
        return None
    return [CmiReport.model_validate(item) for item in repo.read_json(path, "run `prgauge cmi` first")]


def _optional_json(repo: CorpusRepository, name: str) -> Optional[Any]:
    path = repo.path(name)
    return repo.read_json(path, "") if os.path.exists(path) else None


def _optional_table(repo: CorpusRepository, name: str) -> Optional[List[Dict[str, str]]]:
    path = repo.path(name)
    if not os.path.exists(path):
        return None
    header, *rows = load_table(path)
    return [dict(zip(header, row)) for row in rows]


def build(config: RunConfig, task_dirs: Sequence[str] = ()) -> Dict[str, Any]:
    repo = CorpusRepository(config.output_dir)
    records = repo.load_records()
    values = score_repository.load_scores(repo.scores_csv)
    cmi = _load_cmi(repo)
    tasks: Dict[str, List[CmiReport]] = {}
    if cmi is not None:
        tasks[config.output_dir] = cmi
    for directory in task_dirs:
        reports = _load_cmi(CorpusRepository(directory))
        if reports is None:
            logger.warning(f"{directory} has no {CMI_FILE}; left out of the task average")
            continue
        tasks[directory] = reports
    return {
        "seed": config.seed,
        "models": [record.model_dump(mode="json") for record in records],
        "gap_spread": gap_spread(records),
        "scores": [value.model_dump(mode="json") for value in sorted(values, key=lambda v: (v.model_id, v.measure))],
        "normalized": normalized_scores(records, values),
        "cmi": None if cmi is None else [report.model_dump(mode="json") for report in cmi],
        "cmi_by_task": average_cmi(tasks) if tasks else None,
        "invariance": _optional_json(repo, INVARIANCE_FILE),
        "timing": _optional_table(repo, TIMING_FILE),
        "sensitivity": _optional_table(repo, SENSITIVITY_FILE),
    }


def render_markdown(report: Dict[str, Any]) -> str:
    lines = [
        "# prgauge report",
        "",
        f"- seed: {report['seed']}",
        f"- models: {len(report['models'])}",
        f"- gap spread: {report['gap_spread']:.4f}",
        "",
    ]
    if report["cmi"]:
        lines += ["## CMI", "", "| measure | n | CMI | CMI (pairs) | Kendall tau |", "|---|---:|---:|---:|---:|"]
        for item in report["cmi"]:
            lines.append(
                f"| {item['measure']} | {item['num_models']} | {item['cmi']:.4f} "
                f"| {_cell(item['cmi_pairs_only'])} | {_cell(item['kendall_tau'])} |"
            )
        lines.append("")
    if report["cmi_by_task"] and len(next(iter(report["cmi_by_task"].values()))["tasks"]) > 1:
        lines += ["## CMI averaged over tasks", "", "| measure | mean CMI | tasks |", "|---|---:|---:|"]
        for measure, entry in report["cmi_by_task"].items():
            lines.append(f"| {measure} | {entry['mean']:.4f} | {len(entry['tasks'])} |")
        lines.append("")
    if report["invariance"]:
        lines += ["## Invariance", "", "| perturbation | measure | n | CMI |", "|---|---|---:|---:|"]
        for kind in report["invariance"]:
            for row in kind["rows"]:
                cmi = "refused" if row["refused"] else _cell(row["cmi"])
                lines.append(f"| {kind['kind']} | {row['measure']} | {row['n']} | {cmi} |")
        lines.append("")
    if report["timing"]:
        lines += ["## Curve timing", "", "| n_b | mean seconds | std seconds |", "|---:|---:|---:|"]
        for row in report["timing"]:
            lines.append(f"| {row['n_b']} | {float(row['mean_seconds']):.4f} | {float(row['std_seconds']):.4f} |")
        lines.append("")
    return "\n".join(lines)


def _cell(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4f}"


def execute(config: RunConfig, task_dirs: Sequence[str] = ()) -> Dict[str, Any]:
    repo = CorpusRepository(config.output_dir)
    report = build(config, task_dirs)
    repo.write_json(repo.path(REPORT_JSON), report)
    with open(repo.path(REPORT_MD), "w", encoding="utf-8") as file:
        file.write(render_markdown(report))
    logger.info(f"Wrote {repo.path(REPORT_JSON)} and {repo.path(REPORT_MD)}")
    return report
