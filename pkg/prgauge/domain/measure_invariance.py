from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence

import numpy as np
from pydantic import BaseModel
from pydantic import Field
from rich.table import Table

from prgauge.cmi import cmi_score
from prgauge.domain.build_curves import ensure_curve
from prgauge.domain.build_curves import load_model_and_data
from prgauge.entities import ModelRecord
from prgauge.entities import PerturbationSpec
from prgauge.entities import RunConfig
from prgauge.errors import DegeneratePalError
from prgauge.errors import InsufficientModelsError
from prgauge.errors import PalNotApplicableError
from prgauge.logging_utils import get_logger
from prgauge.parallel import map_ordered
from prgauge.prcurve import PrCurve
from prgauge.repository.corpus_repository import CorpusRepository
from prgauge.scores import augmented_subset_accuracy
from prgauge.scores import gi_score
from prgauge.scores import mean_pr_accuracy
from prgauge.scores import pal_score
from prgauge.seeding import derive_seed

logger = get_logger()

INVARIANCE_FILE = "invariance.json"


class InvarianceRow(BaseModel):
    measure: str
    n: int
    cmi: Optional[float] = None
    kendall_tau: Optional[float] = None
    refused: Optional[str] = None


class KindReport(BaseModel):
    kind: str
    n: int
    excluded: List[str] = Field(default_factory=list)
    rows: List[InvarianceRow] = Field(default_factory=list)
    mean_gi: Dict[str, float] = Field(default_factory=dict)


def qualifying_records(records: Sequence[ModelRecord], kind: str, floor: float) -> List[ModelRecord]:
    return [
        record
        for record in records
        if record.augmentation is not None and record.augmentation.kind == kind and record.train_acc >= floor
    ]


def mean_gi_by_level(records: Sequence[ModelRecord], gi: Dict[str, float]) -> Dict[str, float]:
    levels: Dict[str, List[float]] = {}
    for record in records:
        level = record.augmentation.level if record.augmentation else "none"
        levels.setdefault(level, []).append(gi[record.id])
    return {level: float(np.mean(values)) for level, values in sorted(levels.items())}


def measure_kind(config: RunConfig, repo: CorpusRepository, records: Sequence[ModelRecord], kind: str, workers: Optional[int] = None) -> KindReport:
    """CMI of the invariance measures over the models augmented with `kind`."""
    settings = config.invariance
    candidates = [record for record in records if record.augmentation is not None and record.augmentation.kind == kind]
    qualifying = qualifying_records(candidates, kind, settings.train_accuracy_floor)
    excluded = sorted(record.id for record in candidates if record not in qualifying)
    if len(qualifying) < settings.min_models:
        raise InsufficientModelsError(
            f"{kind}: {len(qualifying)} of {len(candidates)} models reach train accuracy "
            f"{settings.train_accuracy_floor}, at least {settings.min_models} are needed"
        )
    if excluded:
        logger.info(f"{kind}: excluded {len(excluded)} models below the train accuracy floor")
    spec = config.perturbation_spec(kind, 0)
    curves: List[PrCurve] = map_ordered(lambda record: ensure_curve(config, repo, record, spec), qualifying, workers)
    by_id = {record.id: curve for record, curve in zip(qualifying, curves)}
    gi = {model_id: gi_score(curve) for model_id, curve in by_id.items()}

    rows = []
    for measure in settings.measures:
        if measure == "pal" and spec.is_signed_range and not settings.force_pal:
            refusal = f"Pal is not defined for the signed range [{spec.alpha_min}, {spec.alpha_max}]"
            logger.warning(f"{kind}: {refusal}")
            rows.append(InvarianceRow(measure=measure, n=len(qualifying), refused=refusal))
            continue
        values = _measure_values(config, repo, qualifying, by_id, gi, spec, measure)
        report = cmi_score(qualifying, values, measure=measure, max_subset_size=config.cmi.max_subset_size, workers=1)
        rows.append(InvarianceRow(measure=measure, n=report.num_models, cmi=report.cmi, kendall_tau=report.kendall_tau))
    return KindReport(kind=kind, n=len(qualifying), excluded=excluded, rows=rows, mean_gi=mean_gi_by_level(qualifying, gi))


def _measure_values(
    config: RunConfig,
    repo: CorpusRepository,
    records: Sequence[ModelRecord],
    curves: Dict[str, PrCurve],
    gi: Dict[str, float],
    spec: PerturbationSpec,
    measure: str,
) -> Dict[str, Optional[float]]:
    if measure == "gi":
        return dict(gi)
    if measure == "mean_pr":
        return {model_id: mean_pr_accuracy(curve) for model_id, curve in curves.items()}
    if measure == "pal":
        values: Dict[str, Optional[float]] = {}
        for model_id, curve in curves.items():
            try:
                values[model_id] = pal_score(curve, mode=config.curve.pal_mode, force=config.invariance.force_pal)
            except (DegeneratePalError, PalNotApplicableError) as e:
                logger.warning(f"{model_id}: Pal recorded as missing: {e}")
                values[model_id] = None
        return values
    subset: Dict[str, Optional[float]] = {}
    for record in records:
        net, dataset = load_model_and_data(repo, record)
        subset[record.id] = augmented_subset_accuracy(
            net,
            dataset,
            spec,
            subset_fraction=config.invariance.subset_fraction,
            seed=derive_seed(config.seed, "aug-subset", record.id),
        )
    return subset


def execute(config: RunConfig, workers: Optional[int] = None) -> List[KindReport]:
    repo = CorpusRepository(config.output_dir)
    records = repo.load_records()
    reports = [measure_kind(config, repo, records, kind, workers) for kind in config.invariance_kinds()]
    repo.write_json(repo.path(INVARIANCE_FILE), [report.model_dump(mode="json") for report in reports])
    logger.info(f"Wrote {repo.path(INVARIANCE_FILE)}")
    return reports


def render_table(reports: Sequence[KindReport]) -> Table:
    table = Table(title="Invariance CMI")
    table.add_column("Perturbation")
    table.add_column("Measure")
    table.add_column("n", justify="right")
    table.add_column("CMI", justify="right")
    table.add_column("Kendall tau", justify="right")
    for report in reports:
        for row in report.rows:
            if row.refused is not None:
                table.add_row(report.kind, row.measure, str(row.n), "refused", "-")
                continue
            tau = "-" if row.kendall_tau is None else f"{row.kendall_tau:.4f}"
            table.add_row(report.kind, row.measure, str(row.n), f"{row.cmi:.4f}", tau)
    return table
