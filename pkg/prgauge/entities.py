import itertools
from enum import Enum
from typing import Any
from typing import Dict
from typing import List
from typing import Literal
from typing import Optional
from typing import Tuple
from typing import Union

import numpy as np
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import computed_field
from pydantic import field_validator
from pydantic import model_validator

CONFIG_FORMAT_VERSION = 1

PerturbationKind = Literal[
    "mixup_intra",
    "mixup_inter",
    "gaussian_noise",
    "rotate",
    "translate_h",
    "translate_v",
    "color_jitter",
    "intensity",
]
RangeClosure = Literal["closed", "half_open_upper"]
AugmentLevel = Literal["none", "partial", "full"]
HyperparamValue = Union[int, float, str]

MIXUP_KINDS = ("mixup_intra", "mixup_inter")
IMAGE_KINDS = ("rotate", "translate_h", "translate_v", "color_jitter")

# Magnitude limits per kind; None means unbounded on that side.
_KIND_LIMITS: Dict[str, Tuple[Optional[float], Optional[float]]] = {
    "mixup_intra": (0.0, 0.5),
    "mixup_inter": (0.0, 0.5),
    "gaussian_noise": (0.0, None),
    "intensity": (0.0, None),
    "rotate": (-360.0, 360.0),
    "translate_h": (-0.5, 0.5),
    "translate_v": (-0.5, 0.5),
    "color_jitter": (-0.25, 0.25),
}


class Orientation(str, Enum):
    HIGHER_BETTER = "higher_better"
    LOWER_BETTER = "lower_better"


class TrainConfig(BaseModel):
    optimizer: Literal["sgd", "adam"] = "adam"
    learning_rate: float = Field(default=1e-2, gt=0)
    batch_size: int = Field(default=32, ge=1)
    epochs: int = Field(default=100, ge=0)
    seed: int = 0
    label_noise_fraction: float = Field(default=0.0, ge=0, le=1)
    weight_decay: float = Field(default=0.0, ge=0)


class PerturbationSpec(BaseModel):
    """Parametric perturbation T_alpha applied to the output of stage `layer`.

    The magnitude grid spans [alpha_min, alpha_max]; `half_open_upper` grids never reach alpha_max.
    """

    model_config = ConfigDict(frozen=True)

    kind: PerturbationKind
    alpha_min: float
    alpha_max: float
    layer: int = Field(default=0, ge=0)
    range_closure: RangeClosure = "closed"

    @model_validator(mode="before")
    @classmethod
    def _default_closure(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("range_closure") is None:
            data = dict(data)
            data["range_closure"] = "half_open_upper" if data.get("kind") == "mixup_inter" else "closed"
        return data

    @model_validator(mode="after")
    def _check_range(self) -> "PerturbationSpec":
        if not self.alpha_min < self.alpha_max:
            raise ValueError(f"alpha_min ({self.alpha_min}) must be smaller than alpha_max ({self.alpha_max})")
        if self.kind == "mixup_intra" and self.range_closure != "closed":
            raise ValueError("mixup_intra uses a closed magnitude range")
        if self.kind == "mixup_inter" and self.range_closure != "half_open_upper":
            raise ValueError("mixup_inter uses a half-open magnitude range")
        if self.kind in IMAGE_KINDS and self.layer != 0:
            raise ValueError(f"{self.kind} is only defined on input images (layer 0)")
        low, high = _KIND_LIMITS[self.kind]
        if low is not None and self.alpha_min < low:
            raise ValueError(f"{self.kind} magnitudes must be >= {low}")
        if high is not None and self.alpha_max > high:
            raise ValueError(f"{self.kind} magnitudes must be <= {high}")
        return self

    @property
    def is_mixup(self) -> bool:
        return self.kind in MIXUP_KINDS

    @property
    def is_image_kind(self) -> bool:
        return self.kind in IMAGE_KINDS

    @property
    def identity_magnitude(self) -> float:
        return 1.0 if self.kind == "intensity" else 0.0

    @property
    def is_signed_range(self) -> bool:
        """True when the range extends on both sides of the identity magnitude."""
        return self.alpha_min < self.identity_magnitude < self.alpha_max

    def grid(self, n_p: int) -> np.ndarray:
        if n_p < 2:
            raise ValueError("A magnitude grid needs at least 2 points")
        if self.range_closure == "closed":
            return np.linspace(self.alpha_min, self.alpha_max, n_p)
        return self.alpha_min + (self.alpha_max - self.alpha_min) * np.arange(n_p) / n_p


class AugmentRegime(BaseModel):
    model_config = ConfigDict(frozen=True)

    level: AugmentLevel = "none"
    perturbation: Optional[PerturbationSpec] = None

    @model_validator(mode="after")
    def _check_perturbation(self) -> "AugmentRegime":
        if self.level != "none" and self.perturbation is None:
            raise ValueError(f"Augmentation level '{self.level}' needs a perturbation")
        if self.perturbation is not None and self.perturbation.is_mixup:
            raise ValueError("Interpolation perturbations are not available as training augmentation")
        return self

    def magnitude_range(self) -> Tuple[float, float]:
        """Magnitudes drawn by this regime.

        Partial scales the full range by one half about the identity magnitude,
        e.g. rotation (-180, 179) becomes (-90, 89.5).
        """
        if self.perturbation is None:
            return 0.0, 0.0
        spec = self.perturbation
        center = spec.identity_magnitude
        if self.level == "none":
            return center, center
        if self.level == "partial":
            return center + 0.5 * (spec.alpha_min - center), center + 0.5 * (spec.alpha_max - center)
        return spec.alpha_min, spec.alpha_max


class EpochStats(BaseModel):
    epoch: int
    loss: float
    train_accuracy: float
    validation_accuracy: Optional[float] = None


class TrainingLog(BaseModel):
    epochs: List[EpochStats] = Field(default_factory=list)
    final_train_accuracy: float


class AugmentationInfo(BaseModel):
    level: AugmentLevel
    kind: PerturbationKind


class ModelRecord(BaseModel):
    model_config = ConfigDict(extra="ignore")

    id: str
    hyperparams: Dict[str, HyperparamValue]
    train_acc: float = Field(ge=0, le=1)
    test_acc: float = Field(ge=0, le=1)
    augmentation: Optional[AugmentationInfo] = None
    model_file: Optional[str] = None
    train_data: Optional[str] = None
    checksum: Optional[str] = None
    model_sha256: Optional[str] = None

    @computed_field  # type: ignore[misc]
    @property
    def gap(self) -> float:
        return self.train_acc - self.test_acc


class MeasureValue(BaseModel):
    model_id: str
    measure: str
    value: Optional[float]
    orientation: Orientation


class GroupReport(BaseModel):
    key: Dict[str, str]
    size: int
    pairs: int
    tied_pairs: int
    counts: Dict[str, int]
    mutual_information: float
    entropy: float


class SubsetReport(BaseModel):
    axes: List[str]
    groups: List[GroupReport] = Field(default_factory=list)
    contributing_groups: int = 0
    skipped_groups: int = 0
    tied_pairs: int = 0
    mutual_information: float = 0.0
    entropy: float = 0.0
    normalized: float = 0.0
    degenerate: bool = False
    diagnostic: Optional[str] = None


class CmiReport(BaseModel):
    measure: str
    num_models: int
    subsets: List[SubsetReport]
    cmi: float
    cmi_pairs_only: Optional[float] = None
    kendall_tau: Optional[float] = None
    diagnostics: List[str] = Field(default_factory=list)


SUPPORTED_AXES = ("depth", "width", "learning_rate", "batch_size", "label_noise", "weight_decay", "optimizer")


class DatasetConfig(BaseModel):
    kind: Literal["blobs", "glyphs"] = "blobs"
    num_classes: int = Field(default=4, ge=2)
    num_samples: int = Field(default=2400, ge=4)
    dims: int = Field(default=16, ge=1)
    spread: float = Field(default=1.0, ge=0)
    image_size: int = Field(default=12, ge=8)
    test_fraction: float = Field(default=0.25, gt=0, lt=1)
    validation_fraction: float = Field(default=0.05, ge=0, lt=1)


class CorpusConfig(BaseModel):
    architecture: Literal["mlp", "conv"] = "mlp"
    axes: Dict[str, List[HyperparamValue]] = Field(default_factory=lambda: {"depth": [1, 2]})
    optimizer: Literal["sgd", "adam"] = "adam"
    learning_rate: float = Field(default=1e-2, gt=0)
    batch_size: int = Field(default=32, ge=1)
    epochs: int = Field(default=100, ge=0)
    depth: int = Field(default=2, ge=1)
    width: int = Field(default=64, ge=1)
    weight_decay: float = Field(default=0.0, ge=0)
    label_noise: float = Field(default=0.0, ge=0, le=1)
    conv_channels: int = Field(default=8, ge=1)
    kernel_size: int = Field(default=3, ge=1)
    stride: int = Field(default=1, ge=1)
    augmentation_levels: List[AugmentLevel] = Field(default_factory=lambda: ["none"])
    augmentation_kinds: List[PerturbationKind] = Field(default_factory=list)

    @field_validator("axes")
    @classmethod
    def _check_axes(cls, axes: Dict[str, List[HyperparamValue]]) -> Dict[str, List[HyperparamValue]]:
        if not axes:
            raise ValueError("A corpus needs at least one hyperparameter axis")
        for name, values in axes.items():
            if name not in SUPPORTED_AXES:
                raise ValueError(f"Unknown corpus axis '{name}', expected one of {', '.join(SUPPORTED_AXES)}")
            if not values:
                raise ValueError(f"Corpus axis '{name}' has no values")
            if len(set(map(str, values))) != len(values):
                raise ValueError(f"Corpus axis '{name}' repeats a value")
        return axes

    @model_validator(mode="after")
    def _check_augmentation(self) -> "CorpusConfig":
        if any(level != "none" for level in self.augmentation_levels) and not self.augmentation_kinds:
            raise ValueError("augmentation_levels other than 'none' need augmentation_kinds")
        for kind in self.augmentation_kinds:
            if kind in MIXUP_KINDS:
                raise ValueError(f"{kind} cannot be used as a training augmentation")
        return self

    def grid(self) -> List[Dict[str, HyperparamValue]]:
        names = list(self.axes)
        return [dict(zip(names, values)) for values in itertools.product(*(self.axes[name] for name in names))]

    def settings_for(self, cell: Dict[str, HyperparamValue]) -> Dict[str, HyperparamValue]:
        settings: Dict[str, HyperparamValue] = {
            "optimizer": self.optimizer,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "depth": self.depth,
            "width": self.width,
            "weight_decay": self.weight_decay,
            "label_noise": self.label_noise,
        }
        settings.update(cell)
        return settings


class CurveConfig(BaseModel):
    n_p: int = Field(default=11, ge=2)
    n_b: int = Field(default=16, ge=1)
    b_s: int = Field(default=128, ge=2)
    pal_mode: Literal["literal", "cumulative"] = "literal"

    @model_validator(mode="before")
    @classmethod
    def _apply_preset(cls, data: Any) -> Any:
        if isinstance(data, dict) and "preset" in data:
            data = dict(data)
            preset = data.pop("preset")
            if preset not in CURVE_PRESETS:
                raise ValueError(f"Unknown curve preset '{preset}', expected one of {', '.join(CURVE_PRESETS)}")
            data = {**CURVE_PRESETS[preset], **data}
        return data


CURVE_PRESETS: Dict[str, Dict[str, int]] = {
    "desk": {"n_b": 16, "b_s": 128},
    "reference": {"n_b": 180, "b_s": 128},
}


class CmiConfig(BaseModel):
    max_subset_size: int = Field(default=2, ge=1)


class InvarianceConfig(BaseModel):
    kinds: List[PerturbationKind] = Field(default_factory=list)
    measures: List[Literal["aug_subset_acc", "mean_pr", "gi", "pal"]] = Field(
        default_factory=lambda: ["aug_subset_acc", "mean_pr", "gi"]
    )
    train_accuracy_floor: float = Field(default=0.8, ge=0, le=1)
    min_models: int = Field(default=6, ge=2)
    subset_fraction: float = Field(default=0.1, gt=0, le=1)
    force_pal: bool = False


class TimingConfig(BaseModel):
    batch_counts: List[int] = Field(default_factory=lambda: [4, 8, 16, 32])
    repeats: int = Field(default=20, ge=2)
    measure: str = "gi_intra_l0"
    model_id: Optional[str] = None
    include_cmi: bool = True

    @field_validator("batch_counts")
    @classmethod
    def _check_batch_counts(cls, counts: List[int]) -> List[int]:
        if not counts or any(count < 1 for count in counts):
            raise ValueError("batch_counts must be a non-empty list of positive integers")
        return sorted(set(counts))


class RunConfig(BaseModel):
    format_version: Literal[1] = CONFIG_FORMAT_VERSION
    seed: int = Field(ge=0)
    output_dir: str = "runs/default"
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    corpus: CorpusConfig = Field(default_factory=CorpusConfig)
    perturbations: List[PerturbationSpec] = Field(default_factory=list)
    perturbation_preset: Literal["cifar_like", "svhn_like"] = "cifar_like"
    curve: CurveConfig = Field(default_factory=CurveConfig)
    measures: List[str] = Field(default_factory=lambda: ["gi_intra_l0", "pal_intra_l0", "mixup_l0"])
    combinations: List[str] = Field(default_factory=list)
    cmi: CmiConfig = Field(default_factory=CmiConfig)
    invariance: InvarianceConfig = Field(default_factory=InvarianceConfig)
    timing: TimingConfig = Field(default_factory=TimingConfig)

    @model_validator(mode="after")
    def _check_names(self) -> "RunConfig":
        # Lazy imports: measures and combine build on the entities defined here.
        from prgauge.combine import parse_combination
        from prgauge.measures import parse_measure_name

        for name in self.measures:
            parse_measure_name(name)
        for label in self.combinations:
            combination = parse_combination(label)
            missing = [column for column in combination.columns if column not in self.measures]
            if missing:
                raise ValueError(f"Combination '{label}' uses measures missing from the measure list: {missing}")
        pal_measures = [name for name in self.measures if parse_measure_name(name).statistic in ("pal", "pal_cum")]
        if pal_measures and self.curve.n_p < 11:
            raise ValueError(f"Pal measures {pal_measures} need curve.n_p >= 11, got {self.curve.n_p}")
        if not parse_measure_name(self.timing.measure).needs_curve:
            raise ValueError(f"Timing measure '{self.timing.measure}' is not computed from a PR curve")
        if self.dataset.kind == "blobs":
            image_kinds = [kind for kind in self.corpus.augmentation_kinds if kind in IMAGE_KINDS]
            if image_kinds:
                raise ValueError(f"Image perturbations {image_kinds} need the glyphs dataset")
        if self.corpus.architecture == "conv" and self.dataset.kind != "glyphs":
            raise ValueError("The conv architecture needs the glyphs dataset")
        return self

    def perturbation_spec(self, kind: str, layer: int = 0) -> PerturbationSpec:
        for spec in self.perturbations:
            if spec.kind == kind and spec.layer == layer:
                return spec
        from prgauge.perturbations import preset_spec

        return preset_spec(kind, layer=layer, preset=self.perturbation_preset)

    def invariance_kinds(self) -> List[str]:
        return list(self.invariance.kinds or self.corpus.augmentation_kinds)
