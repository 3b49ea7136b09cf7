import csv
import json
import os
from typing import Dict
from typing import List
from typing import Optional

import numpy as np
from pydantic import ValidationError

from prgauge.entities import PerturbationSpec
from prgauge.errors import ArtifactFormatError
from prgauge.errors import InvalidCurveError
from prgauge.errors import MissingPrerequisiteError
from prgauge.prcurve import PrCurve
from prgauge.prcurve import normalize

CURVE_COLUMNS = ["alpha", "norm_alpha", "accuracy", "kept_count"]
_TITLE = "# prgauge pr-curve"


def save_curve(path: str, curve: PrCurve) -> None:
    """CSV with a `#` comment header recording spec, seed, n_b, b_s and standard errors."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    if curve.norm_alphas is None:
        curve = normalize(curve)
    header = [_TITLE, f"# model_id: {curve.model_id}"]
    if curve.spec is not None:
        header.append(f"# spec: {curve.spec.model_dump_json()}")
    for name in ("seed", "n_b", "b_s"):
        if getattr(curve, name) is not None:
            header.append(f"# {name}: {getattr(curve, name)}")
    errors = curve.standard_errors
    if errors is not None:
        header.append("# std_err: " + ",".join(_format(value) for value in errors))
    with open(path, "w", encoding="utf-8", newline="") as file:
        file.write("\n".join(header) + "\n")
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        kept = [""] * len(curve.alphas) if curve.kept_counts is None else [str(int(c)) for c in curve.kept_counts]
        for alpha, norm, accuracy, count in zip(curve.alphas, curve.norm_alphas, curve.accuracies, kept):  # type: ignore[arg-type]
            writer.writerow([_format(alpha), _format(norm), _format(accuracy), count])


def load_curve(path: str) -> PrCurve:
    if not os.path.exists(path):
        raise MissingPrerequisiteError(path, "run `prgauge prcurve` first")
    meta: Dict[str, str] = {}
    rows: List[List[str]] = []
    line_numbers: List[int] = []
    header_seen = False
    with open(path, "r", encoding="utf-8") as file:
        for number, line in enumerate(file, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                key, sep, value = stripped[1:].partition(":")
                if sep:
                    meta[key.strip()] = value.strip()
                continue
            cells = next(csv.reader([stripped]))
            if not header_seen:
                if cells != CURVE_COLUMNS:
                    raise ArtifactFormatError(path, f"expected header {','.join(CURVE_COLUMNS)}", number)
                header_seen = True
                continue
            if len(cells) != len(CURVE_COLUMNS):
                raise ArtifactFormatError(path, f"expected {len(CURVE_COLUMNS)} columns, got {len(cells)}", number)
            rows.append(cells)
            line_numbers.append(number)
    if not header_seen:
        raise ArtifactFormatError(path, "missing CSV header row")
    alphas, norms, accuracies, kept = [], [], [], []
    for cells, number in zip(rows, line_numbers):
        try:
            alphas.append(float(cells[0]))
            norms.append(float(cells[1]))
            accuracies.append(float(cells[2]))
            kept.append(int(cells[3]) if cells[3] != "" else None)
        except ValueError as e:
            raise ArtifactFormatError(path, f"unparseable value: {e}", number)
    spec = _parse_spec(path, meta.get("spec"))
    try:
        return PrCurve(
            alphas=np.array(alphas),
            accuracies=np.array(accuracies),
            kept_counts=None if any(count is None for count in kept) else np.array(kept, dtype=np.int64),
            norm_alphas=np.array(norms),
            spec=spec,
            model_id=meta.get("model_id", ""),
            seed=_optional_int(meta.get("seed")),
            n_b=_optional_int(meta.get("n_b")),
            b_s=_optional_int(meta.get("b_s")),
        )
    except InvalidCurveError as e:
        raise ArtifactFormatError(path, str(e))


def _parse_spec(path: str, raw: Optional[str]) -> Optional[PerturbationSpec]:
    if raw is None:
        return None
    try:
        return PerturbationSpec.model_validate(json.loads(raw))
    except (json.JSONDecodeError, ValidationError) as e:
        raise ArtifactFormatError(path, f"invalid spec header: {e}")


def _optional_int(raw: Optional[str]) -> Optional[int]:
    return int(raw) if raw not in (None, "") else None


def _format(value: float) -> str:
    return repr(float(value))
