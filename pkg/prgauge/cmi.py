import itertools
from dataclasses import dataclass
from typing import Dict
from typing import List
from typing import Mapping
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np
from scipy.special import entr
from scipy.stats import kendalltau

from prgauge.entities import CmiReport
from prgauge.entities import GroupReport
from prgauge.entities import ModelRecord
from prgauge.entities import SubsetReport
from prgauge.errors import ConfigError
from prgauge.errors import NoComparablePairsError
from prgauge.logging_utils import get_logger
from prgauge.parallel import map_ordered

logger = get_logger()

SIGN_LABELS = {(-1, -1): "-/-", (-1, 1): "-/+", (1, -1): "+/-", (1, 1): "+/+"}


@dataclass(frozen=True)
class PairSigns:
    signs: List[Tuple[int, int]]
    ties: int


def pair_signs(records: Sequence[ModelRecord], values: Mapping[str, float]) -> PairSigns:
    """(sign of gap difference, sign of measure difference) for every unordered pair, lower id first.

    Pairs with an exactly equal gap or measure are dropped and counted as ties.
    """
    ordered = sorted(records, key=lambda record: record.id)
    signs = []
    ties = 0
    for first, second in itertools.combinations(ordered, 2):
        gap_delta = first.gap - second.gap
        measure_delta = values[first.id] - values[second.id]
        if gap_delta == 0 or measure_delta == 0:
            ties += 1
            continue
        signs.append((int(np.sign(gap_delta)), int(np.sign(measure_delta))))
    return PairSigns(signs=signs, ties=ties)


def _group_information(signs: Sequence[Tuple[int, int]]) -> Tuple[float, float, Dict[str, int]]:
    joint = np.zeros((2, 2))
    for gap_sign, measure_sign in signs:
        joint[int(gap_sign > 0), int(measure_sign > 0)] += 1
    p = joint / joint.sum()
    gap_entropy = float(entr(p.sum(axis=1)).sum())
    measure_entropy = float(entr(p.sum(axis=0)).sum())
    joint_entropy = float(entr(p).sum())
    information = max(gap_entropy + measure_entropy - joint_entropy, 0.0)
    counts = {label: int(joint[int(g > 0), int(m > 0)]) for (g, m), label in SIGN_LABELS.items()}
    return information, gap_entropy, counts


def group_records(records: Sequence[ModelRecord], axes: Sequence[str]) -> Dict[Tuple[str, ...], List[ModelRecord]]:
    groups: Dict[Tuple[str, ...], List[ModelRecord]] = {}
    for record in records:
        key = tuple(str(record.hyperparams[axis]) for axis in axes)
        groups.setdefault(key, []).append(record)
    return dict(sorted(groups.items()))


def conditional_mi(records: Sequence[ModelRecord], values: Mapping[str, float], axes: Sequence[str]) -> SubsetReport:
    """Normalized conditional mutual information between gap ordering and measure ordering.

    Models are grouped by their values on `axes`; every group with at least one untied pair
    contributes with equal weight.
    """
    groups = []
    informations, entropies = [], []
    skipped = tied = 0
    for key, members in group_records(records, axes).items():
        result = pair_signs(members, values)
        tied += result.ties
        if not result.signs:
            skipped += 1
            continue
        information, entropy, counts = _group_information(result.signs)
        informations.append(information)
        entropies.append(entropy)
        groups.append(
            GroupReport(
                key=dict(zip(axes, key)),
                size=len(members),
                pairs=len(result.signs),
                tied_pairs=result.ties,
                counts=counts,
                mutual_information=information,
                entropy=entropy,
            )
        )
    if not groups:
        raise NoComparablePairsError(f"No group under {list(axes)} has a comparable pair of models")
    information = float(np.mean(informations))
    entropy = float(np.mean(entropies))
    report = SubsetReport(
        axes=list(axes),
        groups=groups,
        contributing_groups=len(groups),
        skipped_groups=skipped,
        tied_pairs=tied,
        mutual_information=information,
        entropy=entropy,
    )
    if entropy > 0:
        report.normalized = float(min(information / entropy, 1.0))
    else:
        report.degenerate = True
        report.diagnostic = "Gap ordering is fully determined by the hyperparameters in every group"
    return report


def axis_subsets(axes: Sequence[str], max_subset_size: int) -> List[Tuple[str, ...]]:
    subsets = [
        subset for size in range(1, min(max_subset_size, len(axes)) + 1) for subset in itertools.combinations(axes, size)
    ]
    if tuple(axes) not in subsets:
        subsets.append(tuple(axes))
    return subsets


def kendall_tau(records: Sequence[ModelRecord], values: Mapping[str, float]) -> Optional[float]:
    tau, _ = kendalltau([values[record.id] for record in records], [record.gap for record in records])
    return None if tau is None or np.isnan(tau) else float(tau)


def cmi_score(
    records: Sequence[ModelRecord],
    values: Mapping[str, Optional[float]],
    measure: str = "",
    max_subset_size: int = 2,
    workers: Optional[int] = 1,
) -> CmiReport:
    """Minimum normalized conditional mutual information over axis subsets up to `max_subset_size` plus the full set."""
    diagnostics = []
    usable = [record for record in records if values.get(record.id) is not None]
    if len(usable) < len(records):
        diagnostics.append(f"Excluded {len(records) - len(usable)} models without a {measure or 'measure'} value")
    if len(usable) < 2:
        diagnostics.append("Fewer than 2 models have a value; CMI reported as 0")
        logger.warning(f"CMI of '{measure}': fewer than 2 models have a value")
        return CmiReport(measure=measure, num_models=len(usable), subsets=[], cmi=0.0, diagnostics=diagnostics)
    axes = sorted({axis for record in usable for axis in record.hyperparams})
    if not axes:
        raise ConfigError("CMI needs at least one hyperparameter axis")
    incomplete = [record.id for record in usable if set(record.hyperparams) != set(axes)]
    if incomplete:
        raise ConfigError(f"Models {incomplete} do not carry every corpus axis {axes}")
    clean: Dict[str, float] = {record.id: float(values[record.id]) for record in usable}  # type: ignore[arg-type]

    def _evaluate(subset: Tuple[str, ...]) -> SubsetReport:
        try:
            return conditional_mi(usable, clean, subset)
        except NoComparablePairsError as e:
            return SubsetReport(axes=list(subset), degenerate=True, diagnostic=str(e))

    subsets = map_ordered(_evaluate, axis_subsets(axes, max_subset_size), workers)
    eligible = [report for report in subsets if not report.degenerate]
    if eligible:
        cmi = min(report.normalized for report in eligible)
    else:
        cmi = 0.0
        diagnostics.append("Every conditioning subset is degenerate; CMI reported as 0")
        logger.warning(f"CMI of '{measure}': every conditioning subset is degenerate")
    pairs_only = [report.normalized for report in eligible if len(report.axes) == 2]
    return CmiReport(
        measure=measure,
        num_models=len(usable),
        subsets=subsets,
        cmi=cmi,
        cmi_pairs_only=min(pairs_only) if pairs_only else None,
        kendall_tau=kendall_tau(usable, clean) if len(usable) >= 2 else None,
        diagnostics=diagnostics,
    )
