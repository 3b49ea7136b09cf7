import csv
import json
import os
from typing import List

from prgauge.entities import MeasureValue
from prgauge.entities import Orientation
from prgauge.errors import ArtifactFormatError
from prgauge.errors import MissingPrerequisiteError

SCORE_COLUMNS = ["model_id", "measure", "value", "orientation"]


def save_scores(csv_path: str, json_path: str, values: List[MeasureValue]) -> None:
    """Writes the score table as CSV plus a JSON mirror, rows sorted by (model_id, measure)."""
    rows = sorted(values, key=lambda value: (value.model_id, value.measure))
    os.makedirs(os.path.dirname(csv_path) or ".", exist_ok=True)
    with open(csv_path, "w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(SCORE_COLUMNS)
        for row in rows:
            value = "" if row.value is None else repr(float(row.value))
            writer.writerow([row.model_id, row.measure, value, row.orientation.value])
    with open(json_path, "w", encoding="utf-8") as file:
        json.dump([row.model_dump(mode="json") for row in rows], file, indent=2, sort_keys=True)
        file.write("\n")


def load_scores(csv_path: str) -> List[MeasureValue]:
    if not os.path.exists(csv_path):
        raise MissingPrerequisiteError(csv_path, "run `prgauge score` first")
    values = []
    with open(csv_path, "r", encoding="utf-8", newline="") as file:
        reader = csv.reader(file)
        header = next(reader, None)
        if header != SCORE_COLUMNS:
            raise ArtifactFormatError(csv_path, f"expected header {','.join(SCORE_COLUMNS)}", 1)
        for number, cells in enumerate(reader, start=2):
            if len(cells) != len(SCORE_COLUMNS):
                raise ArtifactFormatError(csv_path, f"expected {len(SCORE_COLUMNS)} columns, got {len(cells)}", number)
            model_id, measure, raw, orientation = cells
            try:
                values.append(
                    MeasureValue(
                        model_id=model_id,
                        measure=measure,
                        value=None if raw == "" else float(raw),
                        orientation=Orientation(orientation),
                    )
                )
            except ValueError as e:
                raise ArtifactFormatError(csv_path, str(e), number)
    return values
