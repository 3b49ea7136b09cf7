import re
from dataclasses import dataclass
from typing import Dict
from typing import Iterable
from typing import List
from typing import Mapping
from typing import Optional
from typing import Tuple

from prgauge.entities import MeasureValue
from prgauge.entities import Orientation
from prgauge.errors import ConfigError
from prgauge.errors import DegeneratePalError
from prgauge.errors import InvalidCurveError
from prgauge.errors import PalNotApplicableError
from prgauge.logging_utils import get_logger
from prgauge.prcurve import PrCurve
from prgauge.scores import PalMode
from prgauge.scores import gi_score
from prgauge.scores import mean_pr_accuracy
from prgauge.scores import pal_score
from prgauge.scores import point_score
from prgauge.seeding import substream

logger = get_logger()

KIND_TOKENS: Dict[str, str] = {
    "intra": "mixup_intra",
    "inter": "mixup_inter",
    "noise": "gaussian_noise",
    "rotate": "rotate",
    "translate_h": "translate_h",
    "translate_v": "translate_v",
    "color_jitter": "color_jitter",
    "intensity": "intensity",
}
TOKEN_BY_KIND = {kind: token for token, kind in KIND_TOKENS.items()}

STATISTICS = ("gi", "pal", "pal_cum", "mean_pr", "aug_subset_acc")
HIGHER_BETTER = ("mean_pr", "aug_subset_acc", "mixup", "random")
RANDOM_BASELINE = "random_baseline"
MIXUP_ALPHA = 0.5

_MEASURE_PATTERN = re.compile(
    r"^(gi|pal_cum|pal|mean_pr|aug_subset_acc)_(intra|inter|noise|rotate|translate_h|translate_v|color_jitter|intensity)_l(\d+)$"
)
_MIXUP_PATTERN = re.compile(r"^mixup_l(\d+)$")

CurveKey = Tuple[str, int]


@dataclass(frozen=True)
class MeasureKey:
    """A parsed measure name such as gi_intra_l0, pal_cum_rotate_l0, mixup_l1 or random_baseline."""

    name: str
    statistic: str
    kind: Optional[str] = None
    layer: int = 0

    @property
    def orientation(self) -> Orientation:
        if self.statistic in HIGHER_BETTER:
            return Orientation.HIGHER_BETTER
        return Orientation.LOWER_BETTER

    @property
    def needs_curve(self) -> bool:
        return self.statistic in ("gi", "pal", "pal_cum", "mean_pr", "mixup")

    @property
    def curve_key(self) -> Optional[CurveKey]:
        if not self.needs_curve or self.kind is None:
            return None
        return self.kind, self.layer


def parse_measure_name(name: str) -> MeasureKey:
    if name == RANDOM_BASELINE:
        return MeasureKey(name=name, statistic="random")
    mixup = _MIXUP_PATTERN.match(name)
    if mixup:
        return MeasureKey(name=name, statistic="mixup", kind="mixup_intra", layer=int(mixup.group(1)))
    match = _MEASURE_PATTERN.match(name)
    if not match:
        raise ConfigError(
            f"Unknown measure '{name}'; expected <{'|'.join(STATISTICS)}>_<perturbation>_l<layer>, "
            f"mixup_l<layer> or {RANDOM_BASELINE}"
        )
    statistic, token, layer = match.groups()
    return MeasureKey(name=name, statistic=statistic, kind=KIND_TOKENS[token], layer=int(layer))


def measure_name(statistic: str, kind: str, layer: int) -> str:
    return f"{statistic}_{TOKEN_BY_KIND[kind]}_l{layer}"


def required_curves(names: Iterable[str]) -> List[CurveKey]:
    keys = {parse_measure_name(name).curve_key for name in names}
    return sorted(key for key in keys if key is not None)


def random_baseline(seed: int, model_id: str) -> float:
    return float(substream(seed, "random_baseline", model_id).uniform())


def evaluate_curve_measure(key: MeasureKey, curve: PrCurve, pal_mode: PalMode = "literal", force_pal: bool = False) -> float:
    if key.statistic == "gi":
        return gi_score(curve)
    if key.statistic == "pal":
        return pal_score(curve, mode=pal_mode, force=force_pal)
    if key.statistic == "pal_cum":
        return pal_score(curve, mode="cumulative", force=force_pal)
    if key.statistic == "mean_pr":
        return mean_pr_accuracy(curve)
    if key.statistic == "mixup":
        return point_score(curve, MIXUP_ALPHA)
    raise ConfigError(f"Measure '{key.name}' is not computed from a PR curve")


def evaluate_measures(
    model_id: str,
    names: Iterable[str],
    curves: Mapping[CurveKey, PrCurve],
    seed: int,
    pal_mode: PalMode = "literal",
    force_pal: bool = False,
    subset_accuracy: Optional[Mapping[CurveKey, float]] = None,
) -> List[MeasureValue]:
    """Scores one model. Degenerate or refused Pal values are recorded as missing (None)."""
    values = []
    for name in names:
        key = parse_measure_name(name)
        value: Optional[float]
        if key.statistic == "random":
            value = random_baseline(seed, model_id)
        elif key.statistic == "aug_subset_acc":
            if subset_accuracy is None or (key.kind, key.layer) not in subset_accuracy:
                raise ConfigError(f"Measure '{name}' needs the model and its training data")
            value = subset_accuracy[(key.kind, key.layer)]  # type: ignore[index]
        else:
            curve_key = key.curve_key
            if curve_key not in curves:
                raise InvalidCurveError(f"No {curve_key} curve available for model {model_id}")
            try:
                value = evaluate_curve_measure(key, curves[curve_key], pal_mode, force_pal)  # type: ignore[index]
            except (DegeneratePalError, PalNotApplicableError) as e:
                logger.warning(f"{model_id}: {name} recorded as missing: {e}")
                value = None
        values.append(MeasureValue(model_id=model_id, measure=name, value=value, orientation=key.orientation))
    return values
