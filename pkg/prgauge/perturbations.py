from dataclasses import dataclass
from typing import Callable
from typing import Dict
from typing import Optional
from typing import Tuple

import numpy as np
from scipy.ndimage import map_coordinates

from prgauge.entities import IMAGE_KINDS
from prgauge.entities import MIXUP_KINDS
from prgauge.entities import PerturbationSpec
from prgauge.errors import InvalidPerturbationError
from prgauge.errors import PerturbationModalityError
from prgauge.errors import ShapeMismatchError

GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])
MAX_TRANSLATE_FRACTION = 0.5
MAX_COLOR_JITTER = 0.25

# Magnitude ranges for the image perturbations of the invariance experiment.
PERTURBATION_PRESETS: Dict[str, Dict[str, Tuple[float, float]]] = {
    "cifar_like": {
        "rotate": (-180.0, 179.0),
        "translate_h": (-0.5, 0.5),
        "translate_v": (-0.5, 0.5),
        "color_jitter": (-0.25, 0.25),
    },
    "svhn_like": {
        "rotate": (-90.0, 90.0),
        "translate_h": (-0.5, 0.5),
        "translate_v": (-0.5, 0.5),
        "color_jitter": (-0.25, 0.25),
    },
}
_DEFAULT_RANGES: Dict[str, Tuple[float, float]] = {
    "mixup_intra": (0.0, 0.5),
    "mixup_inter": (0.0, 0.5),
    "gaussian_noise": (0.0, 1.0),
    "intensity": (0.5, 1.5),
}


def preset_spec(kind: str, layer: int = 0, preset: str = "cifar_like") -> PerturbationSpec:
    if preset not in PERTURBATION_PRESETS:
        raise InvalidPerturbationError(f"Unknown perturbation preset '{preset}'")
    ranges = {**_DEFAULT_RANGES, **PERTURBATION_PRESETS[preset]}
    if kind not in ranges:
        raise InvalidPerturbationError(f"Unknown perturbation kind '{kind}'")
    alpha_min, alpha_max = ranges[kind]
    return PerturbationSpec(kind=kind, alpha_min=alpha_min, alpha_max=alpha_max, layer=layer)  # type: ignore[arg-type]


@dataclass(frozen=True, eq=False)
class PairedBatch:
    x1: np.ndarray
    x2: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    original_pairs: int

    @property
    def kept_count(self) -> int:
        return int(len(self.y1))

    @property
    def is_empty(self) -> bool:
        return self.kept_count == 0


def pair_intra(x: np.ndarray, y: np.ndarray) -> PairedBatch:
    """Sorts by label, pairs even with odd positions and keeps the same-class pairs."""
    _check_pairable(x, y)
    order = np.argsort(y, kind="stable")
    return _keep_pairs(x[order], y[order], same_class=True)


def pair_inter(x: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> PairedBatch:
    """Shuffles into consecutive pairs and keeps the pairs with different labels."""
    _check_pairable(x, y)
    order = rng.permutation(len(y))
    return _keep_pairs(x[order], y[order], same_class=False)


def _check_pairable(x: np.ndarray, y: np.ndarray) -> None:
    if len(x) != len(y):
        raise ShapeMismatchError(f"{len(x)} representations but {len(y)} labels")
    if len(y) < 2:
        raise InvalidPerturbationError("Pairing needs a batch of at least 2 samples")


def _keep_pairs(x: np.ndarray, y: np.ndarray, same_class: bool) -> PairedBatch:
    pairs = len(y) // 2
    x1, x2 = x[0 : 2 * pairs : 2], x[1 : 2 * pairs : 2]
    y1, y2 = y[0 : 2 * pairs : 2], y[1 : 2 * pairs : 2]
    keep = (y1 == y2) if same_class else (y1 != y2)
    return PairedBatch(x1=x1[keep], x2=x2[keep], y1=y1[keep], y2=y2[keep], original_pairs=pairs)


def interpolate(x1: np.ndarray, x2: np.ndarray, alpha: float) -> np.ndarray:
    """(1 - alpha) * x1 + alpha * x2; points keep the label of x1."""
    if not 0.0 <= alpha <= 0.5:
        raise InvalidPerturbationError(f"Interpolation magnitude must lie in [0, 0.5], got {alpha}")
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.shape != x2.shape:
        raise ShapeMismatchError(f"Cannot interpolate shapes {x1.shape} and {x2.shape}")
    if alpha == 0.0:
        return x1.copy()
    return (1.0 - alpha) * x1 + alpha * x2


def rotate(image: np.ndarray, degrees: float) -> np.ndarray:
    """Counter-clockwise rotation about the image center, bilinear, zero fill."""
    image = _as_image(image, "rotate")
    if degrees == 0:
        return image.copy()
    channels, height, width = image.shape
    theta = np.deg2rad(degrees)
    cos, sin = np.cos(theta), np.sin(theta)
    center_row, center_col = (height - 1) / 2.0, (width - 1) / 2.0
    rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    # Output coordinates with y pointing up, mapped back to their source location.
    x_out = cols - center_col
    y_out = center_row - rows
    x_src = x_out * cos + y_out * sin
    y_src = -x_out * sin + y_out * cos
    coords = np.round(np.stack([center_row - y_src, center_col + x_src]), 9)
    rotated = np.stack(
        [map_coordinates(image[c], coords, order=1, mode="constant", cval=0.0) for c in range(channels)]
    )
    return np.clip(rotated, 0.0, 1.0)


def translate(image: np.ndarray, fraction: float, axis: str) -> np.ndarray:
    """Shifts by round(fraction * extent) pixels; positive moves right (h) or down (v)."""
    if abs(fraction) > MAX_TRANSLATE_FRACTION:
        raise InvalidPerturbationError(f"Translation fraction must satisfy |f| <= 0.5, got {fraction}")
    if axis not in ("h", "v"):
        raise InvalidPerturbationError(f"Translation axis must be 'h' or 'v', got '{axis}'")
    image = _as_image(image, f"translate_{axis}")
    dim = 2 if axis == "h" else 1
    shift = _round_half_away(fraction * image.shape[dim])
    if shift == 0:
        return image.copy()
    shifted = np.zeros_like(image)
    source = [slice(None)] * 3
    target = [slice(None)] * 3
    if shift > 0:
        source[dim], target[dim] = slice(None, -shift), slice(shift, None)
    else:
        source[dim], target[dim] = slice(-shift, None), slice(None, shift)
    shifted[tuple(target)] = image[tuple(source)]
    return shifted


def _round_half_away(value: float) -> int:
    return int(np.sign(value) * np.floor(abs(value) + 0.5))


def gray(image: np.ndarray) -> np.ndarray:
    return np.tensordot(GRAY_WEIGHTS, image, axes=(0, 0))


def adjust_brightness(image: np.ndarray, factor: float) -> np.ndarray:
    return image * factor


def adjust_contrast(image: np.ndarray, factor: float) -> np.ndarray:
    mean = gray(image).mean()
    return mean + (image - mean) * factor


def adjust_saturation(image: np.ndarray, factor: float) -> np.ndarray:
    luminance = gray(image)[None]
    return luminance + (image - luminance) * factor


def adjust_hue(image: np.ndarray, shift: float) -> np.ndarray:
    """Rotates hue by `shift` of the full circle.

    Works on the per-pixel max and min channel directly, so values outside [0, 1] keep their
    value and chroma.
    """
    red, green, blue = image
    high = image.max(axis=0)
    low = image.min(axis=0)
    chroma = high - low
    safe = np.where(chroma > 0, chroma, 1.0)
    hue = np.where(
        high == red,
        (green - blue) / safe,
        np.where(high == green, 2.0 + (blue - red) / safe, 4.0 + (red - green) / safe),
    )
    sector = np.mod(hue / 6.0 + shift, 1.0) * 6.0
    index = np.floor(sector).astype(int) % 6
    fraction = sector - np.floor(sector)
    rising = low + chroma * fraction
    falling = high - chroma * fraction
    return np.stack(
        [
            np.choose(index, [high, falling, low, low, rising, high]),
            np.choose(index, [rising, high, high, falling, low, low]),
            np.choose(index, [low, low, rising, high, high, falling]),
        ]
    )


def color_jitter(image: np.ndarray, amount: float) -> np.ndarray:
    """Brightness, contrast, saturation, then hue, all driven by the same amount, clamped once at the end."""
    if abs(amount) > MAX_COLOR_JITTER:
        raise InvalidPerturbationError(f"Color jitter amount must satisfy |a| <= 0.25, got {amount}")
    image = _as_image(image, "color_jitter")
    if image.shape[0] != 3:
        raise PerturbationModalityError(f"color_jitter needs 3-channel images, got {image.shape[0]} channels")
    if amount == 0:
        return image.copy()
    factor = 1.0 + amount
    jittered = adjust_brightness(image, factor)
    jittered = adjust_contrast(jittered, factor)
    jittered = adjust_saturation(jittered, factor)
    return np.clip(adjust_hue(jittered, amount), 0.0, 1.0)


def gaussian_noise(x: np.ndarray, alpha: float, rng: np.random.Generator) -> np.ndarray:
    if alpha < 0:
        raise InvalidPerturbationError(f"Noise scale must be non-negative, got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    if alpha == 0:
        return x.copy()
    return x + alpha * rng.standard_normal(x.shape)


def intensity(x: np.ndarray, alpha: float) -> np.ndarray:
    if alpha < 0:
        raise InvalidPerturbationError(f"Intensity factor must be non-negative, got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    if alpha == 1:
        return x.copy()
    return alpha * x


_IMAGE_OPS: Dict[str, Callable[[np.ndarray, float], np.ndarray]] = {
    "rotate": rotate,
    "translate_h": lambda image, alpha: translate(image, alpha, "h"),
    "translate_v": lambda image, alpha: translate(image, alpha, "v"),
    "color_jitter": color_jitter,
}


def check_modality(kind: str, x: np.ndarray) -> None:
    """Image perturbations need (N, C, H, W) batches; color jitter needs three channels."""
    if kind not in IMAGE_KINDS:
        return
    if x.ndim != 4:
        raise PerturbationModalityError(f"{kind} requires image batches shaped (N, C, H, W), got shape {x.shape}")
    if kind == "color_jitter" and x.shape[1] != 3:
        raise PerturbationModalityError(f"color_jitter needs 3-channel images, got {x.shape[1]} channels")


def perturb(kind: str, x: np.ndarray, alpha: float, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Applies one magnitude to every sample of a batch. Interpolation kinds go through the pairing helpers."""
    return perturb_per_sample(kind, x, np.full(len(x), alpha, dtype=np.float64), rng)


def perturb_per_sample(
    kind: str, x: np.ndarray, alphas: np.ndarray, rng: Optional[np.random.Generator] = None
) -> np.ndarray:
    if kind in MIXUP_KINDS:
        raise InvalidPerturbationError(f"{kind} pairs samples; use pair_intra/pair_inter with interpolate")
    x = np.asarray(x, dtype=np.float64)
    alphas = np.asarray(alphas, dtype=np.float64)
    if alphas.shape != (len(x),):
        raise ShapeMismatchError(f"Expected {len(x)} magnitudes, got shape {alphas.shape}")
    check_modality(kind, x)
    broadcast = alphas.reshape((-1,) + (1,) * (x.ndim - 1))
    if kind == "gaussian_noise":
        if np.any(alphas < 0):
            raise InvalidPerturbationError("Noise scale must be non-negative")
        if not np.any(alphas):
            return x.copy()
        if rng is None:
            raise InvalidPerturbationError("gaussian_noise needs an rng stream")
        return x + broadcast * rng.standard_normal(x.shape)
    if kind == "intensity":
        if np.any(alphas < 0):
            raise InvalidPerturbationError("Intensity factor must be non-negative")
        return broadcast * x
    if kind not in _IMAGE_OPS:
        raise InvalidPerturbationError(f"Unknown perturbation kind '{kind}'")
    op = _IMAGE_OPS[kind]
    return np.stack([op(image, float(alpha)) for image, alpha in zip(x, alphas)])


def _as_image(image: np.ndarray, kind: str) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise PerturbationModalityError(f"{kind} requires a (C, H, W) image, got shape {image.shape}")
    return image
