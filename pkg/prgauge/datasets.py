from dataclasses import dataclass
from dataclasses import replace
from typing import Literal
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np

from prgauge.entities import AugmentRegime
from prgauge.errors import InvalidDatasetError
from prgauge.perturbations import check_modality
from prgauge.perturbations import perturb_per_sample

Split = Literal["all", "train", "validation", "test"]

GLYPH_SHAPES = ("hbar", "vbar", "diag", "antidiag", "cross", "circle", "square", "triangle")


@dataclass(frozen=True, eq=False)
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: Split = "all"
    seed: int = 0

    def __post_init__(self):
        if len(self.inputs) == 0:
            raise InvalidDatasetError("Dataset is empty")
        if len(self.inputs) != len(self.labels):
            raise InvalidDatasetError(f"{len(self.inputs)} inputs but {len(self.labels)} labels")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise InvalidDatasetError(f"Labels must lie in [0, {self.num_classes})")
        if self.is_image and (self.inputs.min() < 0 or self.inputs.max() > 1):
            raise InvalidDatasetError("Image values must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def input_shape(self) -> Tuple[int, ...]:
        return tuple(self.inputs.shape[1:])

    @property
    def is_image(self) -> bool:
        return self.inputs.ndim == 4

    def subset(self, indices: np.ndarray, split: Optional[Split] = None) -> "Dataset":
        return replace(self, inputs=self.inputs[indices], labels=self.labels[indices], split=split or self.split)


def _balanced_labels(k: int, n: int, rng: np.random.Generator) -> np.ndarray:
    labels = np.arange(n) % k
    rng.shuffle(labels)
    return labels


def gen_blobs(k: int, n: int, d: int, spread: float, seed: int, separation: float = 1.0) -> Dataset:
    """k Gaussian clusters around standard-normal centers scaled by `separation`."""
    if k < 2 or n < k or d < 1 or spread < 0:
        raise InvalidDatasetError(f"Invalid blob sizes: k={k}, n={n}, d={d}, spread={spread}")
    rng = np.random.default_rng(seed)
    centers = separation * rng.standard_normal((k, d))
    labels = _balanced_labels(k, n, rng)
    inputs = centers[labels] + spread * rng.standard_normal((n, d))
    return Dataset(inputs=inputs, labels=labels, num_classes=k, seed=seed)


def render_glyph(shape: str, size: int, center: Sequence[float], radius: float) -> np.ndarray:
    """Binary (size, size) mask of a glyph centered at (row, col)."""
    rows, cols = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    u = (cols - center[1]) / radius
    v = (rows - center[0]) / radius
    thickness = 0.3
    masks = {
        "hbar": (np.abs(u) <= 1) & (np.abs(v) <= thickness),
        "vbar": (np.abs(v) <= 1) & (np.abs(u) <= thickness),
        "diag": (np.abs(u - v) <= thickness * np.sqrt(2)) & (np.abs(u + v) <= 2),
        "antidiag": (np.abs(u + v) <= thickness * np.sqrt(2)) & (np.abs(u - v) <= 2),
        "cross": ((np.abs(u) <= 1) & (np.abs(v) <= thickness)) | ((np.abs(v) <= 1) & (np.abs(u) <= thickness)),
        "circle": u * u + v * v <= 1,
        "square": (np.maximum(np.abs(u), np.abs(v)) <= 0.8) & (np.maximum(np.abs(u), np.abs(v)) >= 0.45),
        "triangle": (v <= 0.8) & (v >= 2 * np.abs(u) - 1),
    }
    if shape not in masks:
        raise InvalidDatasetError(f"Unknown glyph shape '{shape}'")
    return masks[shape].astype(np.float64)


def gen_glyphs(k: int, n: int, size: int, seed: int) -> Dataset:
    """RGB glyph images: class c renders GLYPH_SHAPES[c] at a jittered position and scale on a tinted background."""
    if n < 1:
        raise InvalidDatasetError("Cannot generate an empty glyph dataset")
    if size < 8:
        raise InvalidDatasetError(f"Glyph images need size >= 8, got {size}")
    if not 2 <= k <= len(GLYPH_SHAPES):
        raise InvalidDatasetError(f"Glyph datasets support 2..{len(GLYPH_SHAPES)} classes, got {k}")
    rng = np.random.default_rng(seed)
    labels = _balanced_labels(k, n, rng)
    images = np.empty((n, 3, size, size))
    middle = (size - 1) / 2.0
    for index, label in enumerate(labels):
        radius = rng.uniform(0.25, 0.4) * size
        center = middle + rng.uniform(-0.1, 0.1, 2) * size
        mask = render_glyph(GLYPH_SHAPES[label], size, center, radius)
        color = rng.uniform(0.6, 1.0, 3)[:, None, None]
        tint = rng.uniform(0.0, 0.2, 3)[:, None, None]
        images[index] = tint * (1.0 - mask) + color * mask
    return Dataset(inputs=images, labels=labels, num_classes=k, seed=seed)


def split(
    dataset: Dataset, fraction: float, seed: int, names: Tuple[Split, Split] = ("train", "test")
) -> Tuple[Dataset, Dataset]:
    """Disjoint random split; the second part holds round(fraction * n) samples (at least one)."""
    if not 0 < fraction < 1:
        raise InvalidDatasetError(f"Split fraction must lie in (0, 1), got {fraction}")
    count = len(dataset)
    held_out = min(max(1, int(round(fraction * count))), count - 1)
    if held_out < 1:
        raise InvalidDatasetError(f"Cannot split a dataset of {count} samples")
    order = np.random.default_rng(seed).permutation(count)
    first = dataset.subset(np.sort(order[held_out:]), names[0])
    second = dataset.subset(np.sort(order[:held_out]), names[1])
    return first, second


def with_label_noise(dataset: Dataset, fraction: float, seed: int) -> Dataset:
    """Relabels round(fraction * n) samples to a different, uniformly chosen class."""
    if not 0 <= fraction <= 1:
        raise InvalidDatasetError(f"Label noise fraction must lie in [0, 1], got {fraction}")
    count = int(round(fraction * len(dataset)))
    if count == 0:
        return dataset
    rng = np.random.default_rng(seed)
    indices = rng.choice(len(dataset), size=count, replace=False)
    labels = dataset.labels.copy()
    labels[indices] = (labels[indices] + rng.integers(1, dataset.num_classes, size=count)) % dataset.num_classes
    return replace(dataset, labels=labels)


def draw_magnitudes(regime: AugmentRegime, count: int, rng: np.random.Generator) -> np.ndarray:
    low, high = regime.magnitude_range()
    if high == low:
        return np.full(count, low)
    return rng.uniform(low, high, size=count)


def augment(inputs: np.ndarray, regime: AugmentRegime, rng: np.random.Generator) -> np.ndarray:
    """Perturbs every sample with its own magnitude drawn from the regime's range; level none is the identity."""
    if regime.level == "none" or regime.perturbation is None:
        return inputs
    kind = regime.perturbation.kind
    check_modality(kind, np.asarray(inputs))
    return perturb_per_sample(kind, inputs, draw_magnitudes(regime, len(inputs), rng), rng)
