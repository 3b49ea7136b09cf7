from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence

from prgauge.domain.build_curves import load_model_and_data
from prgauge.entities import MeasureValue
from prgauge.entities import Orientation
from prgauge.entities import RunConfig
from prgauge.errors import DegeneratePalError
from prgauge.errors import InvalidCurveError
from prgauge.errors import PalNotApplicableError
from prgauge.logging_utils import get_logger
from prgauge.measures import CurveKey
from prgauge.measures import evaluate_measures
from prgauge.measures import measure_name
from prgauge.measures import parse_measure_name
from prgauge.measures import required_curves
from prgauge.parallel import map_ordered
from prgauge.prcurve import PrCurve
from prgauge.repository import score_repository
from prgauge.repository.corpus_repository import CorpusRepository
from prgauge.repository.curve_repository import load_curve
from prgauge.scores import PalMode
from prgauge.scores import augmented_subset_accuracy
from prgauge.scores import gi_score
from prgauge.scores import mean_pr_accuracy
from prgauge.scores import pal_score
from prgauge.seeding import derive_seed

logger = get_logger()


def execute(config: RunConfig, workers: Optional[int] = None) -> List[MeasureValue]:
    """Scores every model of the corpus on the configured measures from its stored curves."""
    repo = CorpusRepository(config.output_dir)
    records = repo.load_records()
    curve_keys = required_curves(config.measures)
    subset_keys = sorted(
        {
            (key.kind, key.layer)
            for key in map(parse_measure_name, config.measures)
            if key.statistic == "aug_subset_acc"
        }
    )

    def _score(record) -> List[MeasureValue]:
        curves: Dict[CurveKey, PrCurve] = {
            (kind, layer): load_curve(repo.curve_path(record.id, kind, layer)) for kind, layer in curve_keys
        }
        subset_accuracy = {}
        if subset_keys:
            net, dataset = load_model_and_data(repo, record)
            for kind, layer in subset_keys:
                subset_accuracy[(kind, layer)] = augmented_subset_accuracy(
                    net,
                    dataset,
                    config.perturbation_spec(kind, layer),
                    subset_fraction=config.invariance.subset_fraction,
                    seed=derive_seed(config.seed, "aug-subset", record.id),
                )
        return evaluate_measures(
            record.id,
            config.measures,
            curves,
            seed=config.seed,
            pal_mode=config.curve.pal_mode,
            subset_accuracy=subset_accuracy,
        )

    values = [value for batch in map_ordered(_score, records, workers) for value in batch]
    score_repository.save_scores(repo.scores_csv, repo.scores_json, values)
    logger.info(f"Scored {len(records)} models on {len(config.measures)} measures")
    return values


def score_curve_files(paths: Sequence[str], pal_mode: PalMode = "literal", force_pal: bool = False) -> List[MeasureValue]:
    """Gi, Pal and mean accuracy of standalone curve files; unavailable Pal values are recorded as missing."""
    values = []
    for path in paths:
        curve = load_curve(path)
        model_id = curve.model_id or path
        if curve.spec is not None:
            names = {stat: measure_name(stat, curve.spec.kind, curve.spec.layer) for stat in ("gi", "pal", "mean_pr")}
        else:
            names = {"gi": "gi", "pal": "pal", "mean_pr": "mean_pr"}
        pal: Optional[float]
        try:
            pal = pal_score(curve, mode=pal_mode, force=force_pal)
        except (DegeneratePalError, PalNotApplicableError, InvalidCurveError) as e:
            logger.warning(f"{path}: Pal recorded as missing: {e}")
            pal = None
        values += [
            MeasureValue(model_id=model_id, measure=names["gi"], value=gi_score(curve), orientation=Orientation.LOWER_BETTER),
            MeasureValue(model_id=model_id, measure=names["pal"], value=pal, orientation=Orientation.LOWER_BETTER),
            MeasureValue(
                model_id=model_id, measure=names["mean_pr"], value=mean_pr_accuracy(curve), orientation=Orientation.HIGHER_BETTER
            ),
        ]
    return values
