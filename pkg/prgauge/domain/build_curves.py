import os
from typing import List
from typing import Optional
from typing import Tuple

from prgauge.datasets import Dataset
from prgauge.entities import ModelRecord
from prgauge.entities import PerturbationSpec
from prgauge.entities import RunConfig
from prgauge.errors import ArtifactFormatError
from prgauge.logging_utils import get_logger
from prgauge.measures import required_curves
from prgauge.network import Network
from prgauge.parallel import map_ordered
from prgauge.prcurve import PrCurve
from prgauge.prcurve import build_pr_curve
from prgauge.prcurve import effective_batch_count
from prgauge.repository import dataset_repository
from prgauge.repository.corpus_repository import CorpusRepository
from prgauge.repository.curve_repository import load_curve
from prgauge.repository.curve_repository import save_curve

logger = get_logger()


def load_train_data(repo: CorpusRepository, record: ModelRecord) -> Dataset:
    if record.train_data is None:
        raise ArtifactFormatError(repo.manifest_path, f"model {record.id} has no train_data entry")
    return dataset_repository.load_dataset(repo.path(record.train_data), split="train")


def load_model_and_data(repo: CorpusRepository, record: ModelRecord) -> Tuple[Network, Dataset]:
    net, _ = repo.models.load(record.id)
    return net, load_train_data(repo, record)


def _reusable(config: RunConfig, curve: PrCurve, spec: PerturbationSpec, dataset_size: int) -> bool:
    settings = config.curve
    return (
        curve.spec == spec
        and curve.seed == config.seed
        and curve.b_s == settings.b_s
        and curve.n_b == effective_batch_count(dataset_size, settings.n_b, settings.b_s)
        and len(curve.alphas) == settings.n_p
    )


def ensure_curve(
    config: RunConfig, repo: CorpusRepository, record: ModelRecord, spec: PerturbationSpec, rebuild: bool = False
) -> PrCurve:
    """Loads the stored curve of (model, spec) or builds and stores it."""
    path = repo.curve_path(record.id, spec.kind, spec.layer)
    if not rebuild and os.path.exists(path):
        curve = load_curve(path)
        if _reusable(config, curve, spec, len(load_train_data(repo, record))):
            return curve
    net, dataset = load_model_and_data(repo, record)
    curve = build_pr_curve(
        net,
        dataset,
        spec,
        n_p=config.curve.n_p,
        n_b=config.curve.n_b,
        b_s=config.curve.b_s,
        seed=config.seed,
        model_id=record.id,
    )
    save_curve(path, curve)
    logger.debug(f"Wrote {path}")
    return curve


def execute(config: RunConfig, workers: Optional[int] = None, rebuild: bool = True) -> List[str]:
    """Builds the PR curve of every model for every (perturbation, layer) the measure list needs."""
    repo = CorpusRepository(config.output_dir)
    records = repo.load_records()
    specs = [config.perturbation_spec(kind, layer) for kind, layer in required_curves(config.measures)]
    tasks = [(record, spec) for record in records for spec in specs]
    logger.info(f"Building {len(tasks)} PR curves for {len(records)} models")
    map_ordered(lambda task: ensure_curve(config, repo, task[0], task[1], rebuild=rebuild), tasks, workers)
    return [repo.curve_path(record.id, spec.kind, spec.layer) for record, spec in tasks]
