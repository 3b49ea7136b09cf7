from dataclasses import dataclass
from dataclasses import replace
from typing import Dict
from typing import List
from typing import Optional

import numpy as np

from prgauge import datasets
from prgauge.datasets import Dataset
from prgauge.entities import RunConfig
from prgauge.logging_utils import get_logger
from prgauge.repository import dataset_repository
from prgauge.repository.corpus_repository import CorpusRepository
from prgauge.seeding import derive_seed

logger = get_logger()


@dataclass(frozen=True)
class CorpusData:
    test: Dataset
    validation: Optional[Dataset]
    train_by_noise: Dict[str, Dataset]

    def train(self, label_noise: float) -> Dataset:
        return self.train_by_noise[noise_name(label_noise)]


def noise_name(label_noise: float) -> str:
    return f"train_noise{label_noise:g}"


def _label_noise_levels(config: RunConfig) -> List[float]:
    levels = config.corpus.axes.get("label_noise", [config.corpus.label_noise])
    return sorted({float(level) for level in levels})


def build(config: RunConfig) -> CorpusData:
    spec = config.dataset
    seed = derive_seed(config.seed, "dataset")
    if spec.kind == "blobs":
        full = datasets.gen_blobs(spec.num_classes, spec.num_samples, spec.dims, spec.spread, seed)
    else:
        full = datasets.gen_glyphs(spec.num_classes, spec.num_samples, spec.image_size, seed)
    # Stored files hold float32; keep the in-memory copy identical.
    full = replace(full, inputs=full.inputs.astype(np.float32).astype(np.float64))
    train, test = datasets.split(full, spec.test_fraction, derive_seed(config.seed, "test-split"))
    validation = None
    if spec.validation_fraction > 0:
        train, validation = datasets.split(
            train, spec.validation_fraction, derive_seed(config.seed, "validation-split"), ("train", "validation")
        )
    train_by_noise = {
        noise_name(level): datasets.with_label_noise(train, level, derive_seed(config.seed, "label-noise", noise_name(level)))
        for level in _label_noise_levels(config)
    }
    return CorpusData(test=test, validation=validation, train_by_noise=train_by_noise)


def execute(config: RunConfig) -> List[str]:
    """Generates the corpus datasets and writes them under <output_dir>/data.

    Returns:
        List[str]: paths of the written files.
    """
    return write(CorpusRepository(config.output_dir), build(config))


def write(repo: CorpusRepository, data: CorpusData) -> List[str]:
    written = []
    parts: Dict[str, Optional[Dataset]] = {"test": data.test, "validation": data.validation, **data.train_by_noise}
    for name, dataset in parts.items():
        if dataset is None:
            continue
        path = repo.data_path(name)
        dataset_repository.save_dataset(path, dataset)
        written.append(path)
        if not dataset.is_image:
            csv_path = path[: -len(".prgd")] + ".csv"
            dataset_repository.export_csv(csv_path, dataset)
            written.append(csv_path)
    logger.info(f"Wrote {len(written)} dataset files to {repo.path('data')}")
    return written
