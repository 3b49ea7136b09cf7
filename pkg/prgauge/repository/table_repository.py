import csv
import os
from typing import Any
from typing import List
from typing import Sequence


def save_table(path: str, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    """Plain CSV with a header row; floats are written with repr so reruns compare byte for byte."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(value) for value in row])


def load_table(path: str) -> List[List[str]]:
    with open(path, "r", encoding="utf-8", newline="") as file:
        return [row for row in csv.reader(file)]


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)
