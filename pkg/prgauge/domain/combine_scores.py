from typing import List
from typing import Optional
from typing import Sequence

from prgauge.combine import build_score_matrix
from prgauge.combine import combine
from prgauge.combine import parse_combination
from prgauge.entities import MeasureValue
from prgauge.entities import RunConfig
from prgauge.logging_utils import get_logger
from prgauge.repository import score_repository
from prgauge.repository.corpus_repository import CorpusRepository

logger = get_logger()


def execute(config: RunConfig, labels: Optional[Sequence[str]] = None) -> List[MeasureValue]:
    """Appends one column per combination to the score table, replacing earlier runs of the same combination."""
    repo = CorpusRepository(config.output_dir)
    values = score_repository.load_scores(repo.scores_csv)
    combinations = [parse_combination(label) for label in (labels or config.combinations)]
    produced = {combination.label for combination in combinations}
    kept = [value for value in values if value.measure not in produced]
    for combination in combinations:
        matrix, excluded = build_score_matrix(kept, combination.columns)
        if excluded:
            logger.warning(f"{combination.label}: excluded models with missing values {excluded}")
        combined, orientation = combine(matrix, combination)
        kept += [
            MeasureValue(model_id=model_id, measure=combination.label, value=float(value), orientation=orientation)
            for model_id, value in zip(matrix.model_ids, combined)
        ]
        logger.info(f"Added {combination.label} for {len(matrix.model_ids)} models")
    score_repository.save_scores(repo.scores_csv, repo.scores_json, kept)
    return kept
