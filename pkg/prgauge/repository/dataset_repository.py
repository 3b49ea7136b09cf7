import csv
import os
import struct

import numpy as np

from prgauge.datasets import Dataset
from prgauge.errors import ArtifactFormatError
from prgauge.errors import MissingPrerequisiteError

MAGIC = b"PRGD"
DATASET_FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHH")


def save_dataset(path: str, dataset: Dataset) -> None:
    """Binary layout: magic, version, k, ndims, dims (uint32 each), count, float32 samples, uint16 labels."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    dims = dataset.input_shape
    with open(path, "wb") as file:
        file.write(_HEADER.pack(MAGIC, DATASET_FORMAT_VERSION, dataset.num_classes, len(dims)))
        file.write(struct.pack(f"<{len(dims)}I", *dims))
        file.write(struct.pack("<I", len(dataset)))
        file.write(np.asarray(dataset.inputs, dtype="<f4").tobytes())
        file.write(np.asarray(dataset.labels, dtype="<u2").tobytes())


def load_dataset(path: str, split: str = "all", seed: int = 0) -> Dataset:
    if not os.path.exists(path):
        raise MissingPrerequisiteError(path, "run `prgauge gen-data` first")
    with open(path, "rb") as file:
        blob = file.read()
    try:
        magic, version, k, ndims = _HEADER.unpack_from(blob, 0)
        if magic != MAGIC:
            raise ArtifactFormatError(path, f"bad magic {magic!r}")
        if version != DATASET_FORMAT_VERSION:
            raise ArtifactFormatError(path, f"unsupported dataset version {version}")
        offset = _HEADER.size
        dims = struct.unpack_from(f"<{ndims}I", blob, offset)
        offset += 4 * ndims
        (count,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        size = count * int(np.prod(dims))
        inputs = np.frombuffer(blob, dtype="<f4", count=size, offset=offset).astype(np.float64)
        offset += 4 * size
        labels = np.frombuffer(blob, dtype="<u2", count=count, offset=offset).astype(np.int64)
    except (struct.error, ValueError) as e:
        raise ArtifactFormatError(path, f"truncated dataset file: {e}")
    return Dataset(inputs=inputs.reshape((count,) + tuple(dims)), labels=labels, num_classes=k, split=split, seed=seed)  # type: ignore[arg-type]


def export_csv(path: str, dataset: Dataset) -> None:
    if dataset.is_image:
        raise ArtifactFormatError(path, "CSV export is only available for vector datasets")
    with open(path, "w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file)
        writer.writerow([f"x{i}" for i in range(dataset.inputs.shape[1])] + ["label"])
        for sample, label in zip(dataset.inputs, dataset.labels):
            writer.writerow([repr(float(value)) for value in sample] + [int(label)])
