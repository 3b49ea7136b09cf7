import json
import os
from typing import Any
from typing import Dict
from typing import List

from pydantic import ValidationError

from prgauge.entities import ModelRecord
from prgauge.errors import ArtifactFormatError
from prgauge.errors import MissingPrerequisiteError
from prgauge.measures import TOKEN_BY_KIND
from prgauge.repository.model_repository import ModelRepository


class CorpusRepository:
    """File layout of one run directory."""

    def __init__(self, output_dir: str):
        self.root = output_dir
        self.models = ModelRepository(os.path.join(output_dir, "models"))

    def path(self, *parts: str) -> str:
        return os.path.join(self.root, *parts)

    @property
    def manifest_path(self) -> str:
        return self.path("manifest.json")

    @property
    def failures_path(self) -> str:
        return self.path("failures.json")

    @property
    def scores_csv(self) -> str:
        return self.path("scores.csv")

    @property
    def scores_json(self) -> str:
        return self.path("scores.json")

    def data_path(self, name: str) -> str:
        return self.path("data", f"{name}.prgd")

    def curve_path(self, model_id: str, kind: str, layer: int) -> str:
        return self.path("curves", f"{model_id}__{TOKEN_BY_KIND[kind]}_l{layer}.csv")

    def has_manifest(self) -> bool:
        return os.path.exists(self.manifest_path)

    def load_records(self) -> List[ModelRecord]:
        if not self.has_manifest():
            raise MissingPrerequisiteError(self.manifest_path, "run `prgauge gen-corpus` first")
        with open(self.manifest_path, "r", encoding="utf-8") as file:
            try:
                rows = json.load(file)
            except json.JSONDecodeError as e:
                raise ArtifactFormatError(self.manifest_path, f"invalid JSON: {e.msg}", e.lineno)
        try:
            return [ModelRecord.model_validate(row) for row in rows]
        except ValidationError as e:
            raise ArtifactFormatError(self.manifest_path, f"invalid model record: {e}")

    def save_records(self, records: List[ModelRecord]) -> None:
        self.write_json(self.manifest_path, [record.model_dump(mode="json") for record in records])

    def save_failures(self, failures: List[Dict[str, Any]]) -> None:
        if failures:
            self.write_json(self.failures_path, failures)
        elif os.path.exists(self.failures_path):
            os.remove(self.failures_path)

    def write_json(self, path: str, document: Any) -> None:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", encoding="utf-8") as file:
            json.dump(document, file, indent=2, sort_keys=True)
            file.write("\n")

    def read_json(self, path: str, hint: str) -> Any:
        if not os.path.exists(path):
            raise MissingPrerequisiteError(path, hint)
        with open(path, "r", encoding="utf-8") as file:
            try:
                return json.load(file)
            except json.JSONDecodeError as e:
                raise ArtifactFormatError(path, f"invalid JSON: {e.msg}", e.lineno)
