from typing import Literal
from typing import Optional
from typing import Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.integrate import trapezoid

from prgauge.datasets import Dataset
from prgauge.entities import PerturbationSpec
from prgauge.errors import DegeneratePalError
from prgauge.errors import InvalidCurveError
from prgauge.errors import InvalidDatasetError
from prgauge.errors import InvalidPerturbationError
from prgauge.errors import OffGridError
from prgauge.errors import PalNotApplicableError
from prgauge.network import Network
from prgauge.perturbations import perturb_per_sample
from prgauge.prcurve import PrCurve
from prgauge.prcurve import perturbed_accuracy
from prgauge.seeding import substream

PalMode = Literal["literal", "cumulative"]

PAL_TOP_FRACTION = 0.6
PAL_BOTTOM_FRACTION = 0.1
PAL_MIN_POINTS = 11
GRID_TOLERANCE = 1e-12


def _normalized(curve: PrCurve) -> np.ndarray:
    if curve.norm_alphas is None:
        raise InvalidCurveError("Scores need a normalized curve; call prcurve.normalize first")
    return curve.norm_alphas


def gi_score(curve: PrCurve) -> float:
    """Area between the idealized (45 degree) PCD and the actual PCD, over the area under the idealized one.

    0 for a model unaffected by the perturbation, 1 for a model that is always wrong.
    """
    norm = _normalized(curve)
    cumulative = cumulative_trapezoid(curve.accuracies, norm, initial=0.0)
    gap = norm - cumulative
    score = trapezoid(gap, norm) / (0.5 * norm[-1] ** 2)
    return float(np.clip(score, 0.0, 1.0))


def _fraction_index(fraction: float, n: int) -> int:
    return int(np.floor(fraction * (n - 1) + 1e-9))


def pal_indices(n: int) -> Tuple[int, int]:
    return _fraction_index(PAL_TOP_FRACTION, n), max(1, _fraction_index(PAL_BOTTOM_FRACTION, n))


def pal_score(curve: PrCurve, mode: PalMode = "literal", force: bool = False) -> float:
    """Ratio of trapezoid area near the 60% magnitude position to the area near the 10% position.

    `literal` compares the single segments ending at those indices. `cumulative` compares the PCD
    area over the top 60% of magnitudes with the area over the bottom 10%.
    """
    norm = _normalized(curve)
    spec = curve.spec
    if spec is not None and spec.is_signed_range and not force:
        raise PalNotApplicableError(
            f"Pal is not defined for the signed range [{spec.alpha_min}, {spec.alpha_max}] of {spec.kind}"
        )
    n = len(norm)
    if n < PAL_MIN_POINTS:
        raise InvalidCurveError(f"Pal needs at least {PAL_MIN_POINTS} curve points, got {n}")
    accuracies = curve.accuracies
    top, bottom = pal_indices(n)
    if mode == "literal":
        segments = np.zeros(n)
        segments[1:] = 0.5 * np.diff(norm) * (accuracies[:-1] + accuracies[1:])
        numerator, denominator = segments[top], segments[bottom]
    elif mode == "cumulative":
        cumulative = cumulative_trapezoid(accuracies, norm, initial=0.0)
        numerator = cumulative[-1] - cumulative[n - 1 - top]
        denominator = cumulative[bottom]
    else:
        raise ValueError(f"Unknown pal mode '{mode}'")
    if denominator <= 0:
        raise DegeneratePalError(f"Pal denominator is zero at index {bottom} ({mode} mode)")
    return float(numerator / denominator)


def point_score(
    curve: PrCurve,
    alpha: float,
    net: Optional[Network] = None,
    dataset: Optional[Dataset] = None,
    n_b: int = 16,
    b_s: int = 128,
    seed: int = 0,
) -> float:
    """Accuracy at a single magnitude, read off the grid or measured fresh when a model is given."""
    matches = np.flatnonzero(np.abs(curve.alphas - alpha) <= GRID_TOLERANCE)
    if matches.size:
        return float(curve.accuracies[matches[0]])
    if net is None or dataset is None or curve.spec is None:
        raise OffGridError(f"alpha={alpha} is not on the curve grid and no model is available to measure it")
    rng = substream(seed, "point", curve.model_id)
    correct, kept = perturbed_accuracy(net, dataset, curve.spec, alpha, n_b, b_s, rng)
    if kept == 0:
        raise OffGridError(f"No samples survived pairing at alpha={alpha}")
    return correct / kept


def mean_pr_accuracy(curve: PrCurve) -> float:
    return float(np.mean(curve.accuracies))


def augmented_subset_accuracy(
    net: Network,
    dataset: Dataset,
    spec: PerturbationSpec,
    subset_fraction: float = 0.1,
    seed: int = 0,
    magnitude_range: Optional[Tuple[float, float]] = None,
) -> float:
    """Accuracy on a random subset where each sample gets its own magnitude from the full range."""
    if not 0 < subset_fraction <= 1:
        raise InvalidDatasetError(f"subset_fraction must lie in (0, 1], got {subset_fraction}")
    if spec.is_mixup:
        raise InvalidPerturbationError("Augmented-subset accuracy is defined for per-sample perturbations only")
    size = int(round(subset_fraction * len(dataset)))
    if size == 0:
        raise InvalidDatasetError(f"A {subset_fraction} subset of {len(dataset)} samples is empty")
    rng = np.random.default_rng(seed)
    indices = np.sort(rng.choice(len(dataset), size=size, replace=False))
    low, high = magnitude_range if magnitude_range is not None else (spec.alpha_min, spec.alpha_max)
    alphas = rng.uniform(low, high, size=size) if high > low else np.full(size, low)
    hidden = net.forward_tap(dataset.inputs[indices], spec.layer)
    perturbed = perturb_per_sample(spec.kind, hidden, alphas, rng)
    predictions = np.argmax(net.forward_from(spec.layer, perturbed), axis=-1)
    return float(np.mean(predictions == dataset.labels[indices]))
