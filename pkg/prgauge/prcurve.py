import zlib
from dataclasses import dataclass
from dataclasses import replace
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from prgauge.datasets import Dataset
from prgauge.entities import PerturbationSpec
from prgauge.errors import EmptyCurvePointError
from prgauge.errors import InvalidCurveError
from prgauge.errors import InvalidDatasetError
from prgauge.logging_utils import get_logger
from prgauge.network import Network
from prgauge.parallel import map_ordered
from prgauge.perturbations import interpolate
from prgauge.perturbations import pair_inter
from prgauge.perturbations import pair_intra
from prgauge.perturbations import perturb
from prgauge.seeding import substream

logger = get_logger()

NORM_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class PrCurve:
    """Accuracy of one model under increasing perturbation magnitude."""

    alphas: np.ndarray
    accuracies: np.ndarray
    kept_counts: Optional[np.ndarray] = None
    norm_alphas: Optional[np.ndarray] = None
    spec: Optional[PerturbationSpec] = None
    model_id: str = ""
    seed: Optional[int] = None
    n_b: Optional[int] = None
    b_s: Optional[int] = None

    def __post_init__(self):
        n = len(self.alphas)
        if n < 2:
            raise InvalidCurveError(f"A PR curve needs at least 2 points, got {n}")
        if len(self.accuracies) != n:
            raise InvalidCurveError(f"{n} magnitudes but {len(self.accuracies)} accuracies")
        if not np.all(np.diff(self.alphas) > 0):
            raise InvalidCurveError("Magnitudes must be strictly increasing")
        if np.any(self.accuracies < 0) or np.any(self.accuracies > 1):
            raise InvalidCurveError("Accuracies must lie in [0, 1]")
        if self.kept_counts is not None and (len(self.kept_counts) != n or np.any(self.kept_counts < 0)):
            raise InvalidCurveError("kept_counts must hold one non-negative count per magnitude")
        if self.norm_alphas is not None:
            norm = self.norm_alphas
            if len(norm) != n:
                raise InvalidCurveError(f"{n} magnitudes but {len(norm)} normalized magnitudes")
            if abs(norm[0]) > NORM_TOLERANCE or abs(norm[-1] - 1.0) > NORM_TOLERANCE:
                raise InvalidCurveError("Normalized magnitudes must start at 0 and end at 1")

    @property
    def is_normalized(self) -> bool:
        return self.norm_alphas is not None

    @property
    def standard_errors(self) -> Optional[np.ndarray]:
        """Binomial standard error of every accuracy, NaN where nothing was kept."""
        if self.kept_counts is None:
            return None
        kept = self.kept_counts.astype(np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(kept > 0, np.sqrt(self.accuracies * (1.0 - self.accuracies) / kept), np.nan)


@dataclass(frozen=True, eq=False)
class PcdCurve:
    norm_alphas: np.ndarray
    cumulative: np.ndarray


def batch_perturbed_accuracy(
    net: Network,
    inputs: np.ndarray,
    labels: np.ndarray,
    spec: PerturbationSpec,
    alpha: float,
    rng: np.random.Generator,
) -> Tuple[int, int]:
    """Returns (correct, kept) for one batch: tap x^(l), perturb, resume f_l.

    Interpolation kinds pair the batch first; points keep the label of their first endpoint.
    """
    hidden = net.forward_tap(inputs, spec.layer)
    if spec.is_mixup:
        pairs = pair_intra(hidden, labels) if spec.kind == "mixup_intra" else pair_inter(hidden, labels, rng)
        if pairs.is_empty:
            return 0, 0
        perturbed = interpolate(pairs.x1, pairs.x2, alpha)
        kept_labels = pairs.y1
    else:
        perturbed = perturb(spec.kind, hidden, alpha, rng)
        kept_labels = labels
    predictions = np.argmax(net.forward_from(spec.layer, perturbed), axis=-1)
    return int(np.sum(predictions == kept_labels)), int(len(kept_labels))


def perturbed_accuracy(
    net: Network, dataset: Dataset, spec: PerturbationSpec, alpha: float, n_b: int, b_s: int, rng: np.random.Generator
) -> Tuple[int, int]:
    """Reshuffles the dataset and aggregates n_b consecutive batches of size b_s."""
    order = rng.permutation(len(dataset))
    correct = kept = 0
    for batch in range(n_b):
        indices = order[batch * b_s : (batch + 1) * b_s]
        batch_correct, batch_kept = batch_perturbed_accuracy(
            net, dataset.inputs[indices], dataset.labels[indices], spec, alpha, rng
        )
        if batch_kept == 0:
            logger.debug(f"Batch {batch} kept no pairs at alpha={alpha:.6g}")
        correct += batch_correct
        kept += batch_kept
    return correct, kept


def alpha_stream(seed: int, model_id: str, index: int) -> np.random.Generator:
    return substream(seed, zlib.crc32(model_id.encode("utf-8")), index)


def effective_batch_count(dataset_size: int, n_b: int, b_s: int) -> int:
    available = dataset_size // b_s
    if available < 1:
        raise InvalidDatasetError(f"Dataset of {dataset_size} samples is smaller than one batch of {b_s}")
    if n_b > available:
        logger.warning(f"Requested {n_b} batches of {b_s} but only {available} fit in {dataset_size} samples")
        return available
    return n_b


def build_pr_curve(
    net: Network,
    dataset: Dataset,
    spec: PerturbationSpec,
    n_p: int = 11,
    n_b: int = 16,
    b_s: int = 128,
    seed: int = 0,
    model_id: str = "",
    workers: int = 1,
) -> PrCurve:
    """Accuracy at every magnitude of the perturbation grid, weighted by kept samples.

    Each magnitude reshuffles the dataset with its own stream derived from (seed, model_id, index),
    so the result does not depend on how magnitudes are scheduled.
    """
    if n_b < 1 or b_s < 2:
        raise InvalidDatasetError(f"Need n_b >= 1 and b_s >= 2, got n_b={n_b}, b_s={b_s}")
    batches = effective_batch_count(len(dataset), n_b, b_s)
    alphas = spec.grid(n_p)

    def _point(index: int) -> Tuple[int, int]:
        rng = alpha_stream(seed, model_id, index)
        return perturbed_accuracy(net, dataset, spec, float(alphas[index]), batches, b_s, rng)

    counts: List[Tuple[int, int]] = map_ordered(_point, list(range(len(alphas))), workers)
    accuracies = np.empty(len(alphas))
    kept_counts = np.empty(len(alphas), dtype=np.int64)
    for index, (correct, kept) in enumerate(counts):
        if kept == 0:
            raise EmptyCurvePointError(float(alphas[index]))
        accuracies[index] = correct / kept
        kept_counts[index] = kept
    curve = PrCurve(
        alphas=alphas,
        accuracies=accuracies,
        kept_counts=kept_counts,
        spec=spec,
        model_id=model_id,
        seed=seed,
        n_b=batches,
        b_s=b_s,
    )
    return normalize(curve)


def normalize(curve: PrCurve) -> PrCurve:
    """Maps magnitudes affinely onto [0, 1] using the first and last grid values."""
    low, high = float(curve.alphas[0]), float(curve.alphas[-1])
    if not high > low:
        raise InvalidCurveError(f"Degenerate magnitude range [{low}, {high}]")
    norm = (curve.alphas - low) / (high - low)
    norm[0], norm[-1] = 0.0, 1.0
    return replace(curve, norm_alphas=norm)


def pcd(curve: PrCurve) -> PcdCurve:
    """Cumulative trapezoidal integral of accuracy over normalized magnitude."""
    if curve.norm_alphas is None:
        raise InvalidCurveError("PCD needs a normalized curve")
    cumulative = cumulative_trapezoid(curve.accuracies, curve.norm_alphas, initial=0.0)
    return PcdCurve(norm_alphas=curve.norm_alphas, cumulative=cumulative)
