import hashlib
import json
import os
from dataclasses import dataclass
from dataclasses import field
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Union

import numpy as np

from prgauge import datasets
from prgauge.domain import generate_data
from prgauge.domain.generate_data import CorpusData
from prgauge.entities import AugmentationInfo
from prgauge.entities import AugmentRegime
from prgauge.entities import HyperparamValue
from prgauge.entities import ModelRecord
from prgauge.entities import RunConfig
from prgauge.entities import TrainConfig
from prgauge.errors import TrainingDivergedError
from prgauge.logging_utils import get_logger
from prgauge.network import Network
from prgauge.network import accuracy
from prgauge.network import build_convnet
from prgauge.network import build_mlp
from prgauge.network import quantize_float32
from prgauge.parallel import map_ordered
from prgauge.repository.corpus_repository import CorpusRepository
from prgauge.seeding import derive_seed
from prgauge.seeding import substream
from prgauge.training import train

logger = get_logger()


@dataclass(frozen=True)
class CorpusCell:
    index: int
    model_id: str
    hyperparams: Dict[str, HyperparamValue]
    settings: Dict[str, HyperparamValue]
    augmentation: Optional[AugmentationInfo] = None


@dataclass(frozen=True)
class CellFailure:
    model_id: str
    reason: str


@dataclass
class CorpusResult:
    records: List[ModelRecord] = field(default_factory=list)
    failures: List[CellFailure] = field(default_factory=list)
    trained: int = 0
    skipped: int = 0


def plan_cells(config: RunConfig) -> List[CorpusCell]:
    """Every grid cell, crossed with augmentation kind x level when augmentation is configured."""
    corpus = config.corpus
    variants: List[Optional[AugmentationInfo]] = [None]
    if corpus.augmentation_kinds:
        variants = [
            AugmentationInfo(level=level, kind=kind)
            for kind in corpus.augmentation_kinds
            for level in corpus.augmentation_levels
        ]
    cells = []
    for variant in variants:
        for grid_values in corpus.grid():
            hyperparams = dict(grid_values)
            if variant is not None:
                hyperparams["augmentation"] = variant.level
            index = len(cells)
            cells.append(
                CorpusCell(
                    index=index,
                    model_id=f"m{index:03d}",
                    hyperparams=hyperparams,
                    settings=corpus.settings_for(grid_values),
                    augmentation=variant,
                )
            )
    return cells


def cell_checksum(config: RunConfig, cell: CorpusCell) -> str:
    """sha256 over everything that determines the trained model of a cell."""
    identity = {
        "seed": config.seed,
        "dataset": config.dataset.model_dump(),
        "architecture": config.corpus.architecture,
        "epochs": config.corpus.epochs,
        "conv": [config.corpus.conv_channels, config.corpus.kernel_size, config.corpus.stride],
        "settings": cell.settings,
        "augmentation": cell.augmentation.model_dump() if cell.augmentation else None,
        "perturbation": (
            config.perturbation_spec(cell.augmentation.kind).model_dump() if cell.augmentation else None
        ),
        "index": cell.index,
    }
    return hashlib.sha256(json.dumps(identity, sort_keys=True).encode("utf-8")).digest().hex()


def build_network(config: RunConfig, cell: CorpusCell, input_shape: tuple, seed: int) -> Network:
    corpus = config.corpus
    depth = int(cell.settings["depth"])
    width = int(cell.settings["width"])
    k = config.dataset.num_classes
    if corpus.architecture == "mlp":
        return build_mlp(input_shape[0], [width] * depth, k, seed)
    return build_convnet(
        input_shape, [corpus.conv_channels] * depth, corpus.kernel_size, k, seed, stride=corpus.stride, hidden=[width]
    )


def execute(config: RunConfig, workers: Optional[int] = None) -> CorpusResult:
    """Trains every missing or changed cell and rewrites the manifest; failed cells are logged and listed."""
    repo = CorpusRepository(config.output_dir)
    data = generate_data.build(config)
    generate_data.write(repo, data)
    cells = plan_cells(config)
    existing: Dict[str, ModelRecord] = {}
    if repo.has_manifest():
        existing = {record.id: record for record in repo.load_records()}

    done: Dict[int, ModelRecord] = {}
    todo = []
    for cell in cells:
        previous = existing.get(cell.model_id)
        if previous and previous.checksum == cell_checksum(config, cell) and repo.models.exists(cell.model_id):
            done[cell.index] = previous
        else:
            todo.append(cell)
    logger.info(f"Corpus has {len(cells)} cells: {len(done)} up to date, {len(todo)} to train")

    outcomes = map_ordered(lambda cell: _train_cell(config, cell, data, repo), todo, workers)
    result = CorpusResult(skipped=len(done))
    for cell, outcome in zip(todo, outcomes):
        if isinstance(outcome, CellFailure):
            result.failures.append(outcome)
        else:
            done[cell.index] = outcome
            result.trained += 1
    result.records = [done[index] for index in sorted(done)]
    repo.save_records(result.records)
    repo.save_failures([{"model_id": f.model_id, "reason": f.reason} for f in result.failures])
    return result


def _augmented_test_set(config: RunConfig, data: CorpusData, kind: str) -> datasets.Dataset:
    regime = AugmentRegime(level="full", perturbation=config.perturbation_spec(kind))
    rng = substream(config.seed, "test-augment", kind)
    return datasets.Dataset(
        inputs=datasets.augment(data.test.inputs, regime, rng),
        labels=data.test.labels,
        num_classes=data.test.num_classes,
        split="test",
        seed=data.test.seed,
    )


def _train_cell(config: RunConfig, cell: CorpusCell, data: CorpusData, repo: CorpusRepository) -> Union[ModelRecord, CellFailure]:
    settings = cell.settings
    label_noise = float(settings["label_noise"])
    train_set = data.train(label_noise)
    seed = derive_seed(config.seed, "cell", cell.index)
    net = build_network(config, cell, train_set.input_shape, seed)
    train_config = TrainConfig(
        optimizer=str(settings["optimizer"]),  # type: ignore[arg-type]
        learning_rate=float(settings["learning_rate"]),
        batch_size=int(settings["batch_size"]),
        epochs=config.corpus.epochs,
        seed=seed,
        label_noise_fraction=label_noise,
        weight_decay=float(settings["weight_decay"]),
    )
    regime = None
    if cell.augmentation is not None:
        regime = AugmentRegime(level=cell.augmentation.level, perturbation=config.perturbation_spec(cell.augmentation.kind))
    logger.info(f"Training {cell.model_id} {cell.hyperparams}")
    try:
        run = train(net, train_set, train_config, validation=data.validation, regime=regime)
    except TrainingDivergedError as e:
        logger.error(f"Cell {cell.model_id} failed: {e}")
        return CellFailure(model_id=cell.model_id, reason=str(e))

    trained = quantize_float32(run.network)
    test_set = data.test if cell.augmentation is None else _augmented_test_set(config, data, cell.augmentation.kind)
    train_acc = accuracy(trained, train_set.inputs, train_set.labels)
    test_acc = accuracy(trained, test_set.inputs, test_set.labels)
    digest = repo.models.save(cell.model_id, trained, seed, cell.hyperparams)
    logger.info(f"Trained {cell.model_id}: train_acc={train_acc:.4f} test_acc={test_acc:.4f}")
    return ModelRecord(
        id=cell.model_id,
        hyperparams=cell.hyperparams,
        train_acc=train_acc,
        test_acc=test_acc,
        augmentation=cell.augmentation,
        model_file=os.path.relpath(repo.models.path_for(cell.model_id), repo.root),
        train_data=os.path.relpath(repo.data_path(generate_data.noise_name(label_noise)), repo.root),
        checksum=cell_checksum(config, cell),
        model_sha256=digest,
    )


def gap_spread(records: List[ModelRecord]) -> float:
    gaps = np.array([record.gap for record in records])
    return float(gaps.max() - gaps.min()) if len(gaps) else 0.0


def summary(result: CorpusResult) -> Dict[str, Any]:
    return {
        "models": len(result.records),
        "trained": result.trained,
        "skipped": result.skipped,
        "failed": len(result.failures),
        "gap_spread": gap_spread(result.records),
    }
