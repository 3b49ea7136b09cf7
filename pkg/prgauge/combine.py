import re
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from typing import Dict
from typing import FrozenSet
from typing import Iterable
from typing import Iterator
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np
from scipy.stats import rankdata

from prgauge.entities import MeasureValue
from prgauge.entities import Orientation
from prgauge.errors import ConfigError
from prgauge.errors import InvalidScoreMatrixError
from prgauge.errors import PcaConvergenceError

METHODS = ("pca", "npca", "avg", "prod", "prod_avg", "avg_rank")
PAIR_METHODS = ("prod", "prod_avg")
POWER_ITERATION_STEPS = 10_000
POWER_ITERATION_TOLERANCE = 1e-12
POWER_ITERATION_SEED = 0
POWER_ITERATION_NUDGE = 1e-3

_COMBINATION_PATTERN = re.compile(r"^([a-z_]+):([A-Za-z0-9_]+(?:\+[A-Za-z0-9_]+)+)$")


@dataclass(frozen=True)
class Combination:
    method: str
    columns: Tuple[str, ...]

    @property
    def label(self) -> str:
        return f"{self.method}:{'+'.join(self.columns)}"


def parse_combination(label: str) -> Combination:
    match = _COMBINATION_PATTERN.match(label)
    if not match:
        raise ConfigError(f"Combination '{label}' must look like method:measure_a+measure_b")
    method, columns = match.group(1), tuple(match.group(2).split("+"))
    if method not in METHODS:
        raise ConfigError(f"Unknown combination method '{method}', expected one of {', '.join(METHODS)}")
    if method in PAIR_METHODS and len(columns) != 2:
        raise ConfigError(f"{method} combines exactly two measures, got {len(columns)}")
    if len(set(columns)) != len(columns) and method in ("pca", "npca"):
        raise ConfigError(f"{method} needs distinct measures")
    return Combination(method=method, columns=columns)


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Measure columns over the models of one corpus, without missing values."""

    model_ids: Tuple[str, ...]
    columns: Dict[str, np.ndarray]
    orientations: Dict[str, Orientation]
    negated: FrozenSet[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if len(self.model_ids) < 2:
            raise InvalidScoreMatrixError(f"A score matrix needs at least 2 models, got {len(self.model_ids)}")
        if not self.columns:
            raise InvalidScoreMatrixError("A score matrix needs at least one column")
        for name, values in self.columns.items():
            if name not in self.orientations:
                raise InvalidScoreMatrixError(f"Column '{name}' has no orientation")
            if values.shape != (len(self.model_ids),):
                raise InvalidScoreMatrixError(f"Column '{name}' has {values.shape} values for {len(self.model_ids)} models")
            if not np.all(np.isfinite(values)):
                raise InvalidScoreMatrixError(f"Column '{name}' has missing or non-finite values")

    @property
    def names(self) -> List[str]:
        return list(self.columns)

    def values(self) -> np.ndarray:
        return np.column_stack([self.columns[name] for name in self.columns])


def build_score_matrix(values: Iterable[MeasureValue], columns: Iterable[str]) -> Tuple[ScoreMatrix, List[str]]:
    """Collects the requested columns; models missing any of them are excluded and returned."""
    columns = list(columns)
    table: Dict[str, Dict[str, Optional[float]]] = {}
    orientations: Dict[str, Orientation] = {}
    for value in values:
        if value.measure in columns:
            table.setdefault(value.model_id, {})[value.measure] = value.value
            orientations[value.measure] = value.orientation
    missing_columns = [name for name in columns if name not in orientations]
    if missing_columns:
        raise InvalidScoreMatrixError(f"No scores recorded for {missing_columns}")
    kept, excluded = [], []
    for model_id in sorted(table):
        row = table[model_id]
        if all(row.get(name) is not None for name in columns):
            kept.append(model_id)
        else:
            excluded.append(model_id)
    matrix = ScoreMatrix(
        model_ids=tuple(kept),
        columns={name: np.array([table[m][name] for m in kept], dtype=np.float64) for name in columns},
        orientations={name: orientations[name] for name in columns},
    )
    return matrix, excluded


def _family(name: str) -> str:
    if name.startswith("pal_"):
        return "pal"
    if name.startswith("gi_"):
        return "gi"
    return "other"


def orient(matrix: ScoreMatrix) -> ScoreMatrix:
    """Negates Pal columns when they are combined with Gi columns, so all share Gi's direction. Idempotent."""
    families = {name: _family(name) for name in matrix.columns}
    if "gi" not in families.values():
        return matrix
    to_negate = [name for name, family in families.items() if family == "pal" and name not in matrix.negated]
    if not to_negate:
        return matrix
    columns = {name: (-values if name in to_negate else values) for name, values in matrix.columns.items()}
    return replace(matrix, columns=columns, negated=matrix.negated | frozenset(to_negate))


def _centered(matrix: ScoreMatrix, standardize: bool) -> np.ndarray:
    data = matrix.values()
    centered = data - data.mean(axis=0)
    if not standardize:
        return centered
    std = data.std(axis=0)
    for name, deviation in zip(matrix.names, std):
        if deviation == 0:
            raise InvalidScoreMatrixError(f"Column '{name}' has zero variance and cannot be standardized")
    return centered / std


def _start_vectors(covariance: np.ndarray) -> Iterator[np.ndarray]:
    """The column with the largest variance, nudged by a fixed random direction, then each basis vector."""
    size = covariance.shape[0]
    column = covariance[:, int(np.argmax(np.diag(covariance)))]
    nudge = np.random.default_rng(POWER_ITERATION_SEED).standard_normal(size)
    start = column / np.linalg.norm(column) + POWER_ITERATION_NUDGE * nudge
    yield start / np.linalg.norm(start)
    yield from np.eye(size)


def first_component(covariance: np.ndarray) -> np.ndarray:
    """Unit leading eigenvector of a symmetric PSD matrix: closed form for 2x2, power iteration otherwise."""
    if covariance.shape == (2, 2):
        a, b, d = covariance[0, 0], covariance[0, 1], covariance[1, 1]
        top = 0.5 * (a + d) + np.sqrt((0.5 * (a - d)) ** 2 + b * b)
        candidates = [np.array([top - d, b]), np.array([b, top - a])]
        vector = max(candidates, key=np.linalg.norm)
        norm = np.linalg.norm(vector)
        return vector / norm if norm > 0 else np.array([1.0, 0.0])
    if not np.any(covariance):
        # Every direction carries zero variance.
        return np.eye(covariance.shape[0])[0]
    for vector in _start_vectors(covariance):
        for _ in range(POWER_ITERATION_STEPS):
            product = covariance @ vector
            norm = np.linalg.norm(product)
            if norm == 0:
                break
            candidate = product / norm
            rayleigh = float(candidate @ covariance @ candidate)
            if np.linalg.norm(covariance @ candidate - rayleigh * candidate) <= POWER_ITERATION_TOLERANCE * max(1.0, norm):
                return candidate
            vector = candidate
        else:
            raise PcaConvergenceError(f"Power iteration did not converge after {POWER_ITERATION_STEPS} steps")
    raise PcaConvergenceError("Power iteration found no start vector outside the null space")


def pca_combine(matrix: ScoreMatrix, standardize: bool = False) -> np.ndarray:
    """Projection on the first principal component, signed to correlate non-negatively with the first column."""
    centered = _centered(matrix, standardize)
    covariance = centered.T @ centered / len(centered)
    component = first_component(covariance)
    projection = centered @ component
    if float(projection @ centered[:, 0]) < 0:
        projection = -projection
    return projection


def avg(matrix: ScoreMatrix) -> np.ndarray:
    return matrix.values().mean(axis=1)


def prod(matrix: ScoreMatrix) -> np.ndarray:
    _check_pair(matrix, "prod")
    return matrix.values().prod(axis=1)


def prod_plus_avg(matrix: ScoreMatrix) -> np.ndarray:
    _check_pair(matrix, "prod_avg")
    data = matrix.values()
    return data.prod(axis=1) + data.mean(axis=1)


def avg_rank(matrix: ScoreMatrix) -> np.ndarray:
    """Mean over columns of ranks 1..m, the smallest value getting rank 1 and ties the average rank."""
    data = matrix.values()
    ranks = np.column_stack([rankdata(data[:, j], method="average") for j in range(data.shape[1])])
    return ranks.mean(axis=1)


def _check_pair(matrix: ScoreMatrix, method: str) -> None:
    if len(matrix.columns) != 2:
        raise InvalidScoreMatrixError(f"{method} combines exactly two columns, got {len(matrix.columns)}")


def combine(matrix: ScoreMatrix, combination: Combination) -> Tuple[np.ndarray, Orientation]:
    """Orients, then applies the combination method over its columns in the given order."""
    columns = {name: matrix.columns[name] for name in combination.columns}
    selected = orient(
        ScoreMatrix(
            model_ids=matrix.model_ids,
            columns=columns,
            orientations={name: matrix.orientations[name] for name in combination.columns},
            negated=matrix.negated & frozenset(columns),
        )
    )
    methods = {
        "pca": lambda m: pca_combine(m, standardize=False),
        "npca": lambda m: pca_combine(m, standardize=True),
        "avg": avg,
        "prod": prod,
        "prod_avg": prod_plus_avg,
        "avg_rank": avg_rank,
    }
    return methods[combination.method](selected), selected.orientations[combination.columns[0]]
