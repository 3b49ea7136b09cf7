import base64
import hashlib
import json
import os
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np

from prgauge.errors import ArtifactFormatError
from prgauge.errors import MissingPrerequisiteError
from prgauge.layers import layer_from_description
from prgauge.network import Network

MODEL_FORMAT_VERSION = 1


class ModelRepository:
    def __init__(self, directory: str):
        self.directory = directory

    def path_for(self, model_id: str) -> str:
        return os.path.join(self.directory, f"{model_id}.json")

    def exists(self, model_id: str) -> bool:
        return os.path.exists(self.path_for(model_id))

    def save(self, model_id: str, net: Network, seed: int, hyperparams: Dict[str, Any]) -> str:
        """
        Write a model file.

        Returns:
            str: sha256 of the written file.
        """
        os.makedirs(self.directory, exist_ok=True)
        document = encode_network(net, seed, hyperparams)
        payload = json.dumps(document, sort_keys=True, indent=1)
        with open(self.path_for(model_id), "w", encoding="utf-8") as file:
            file.write(payload)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def load(self, model_id: str) -> Tuple[Network, Dict[str, Any]]:
        path = self.path_for(model_id)
        if not os.path.exists(path):
            raise MissingPrerequisiteError(path, "run `prgauge gen-corpus` first")
        with open(path, "r", encoding="utf-8") as file:
            try:
                document = json.load(file)
            except json.JSONDecodeError as e:
                raise ArtifactFormatError(path, f"invalid JSON: {e.msg}", e.lineno)
        return decode_network(document, path), document


def encode_network(net: Network, seed: int, hyperparams: Dict[str, Any]) -> Dict[str, Any]:
    weights: List[Optional[List[str]]] = []
    for layer in net.layers:
        if layer.params:
            weights.append([_encode_array(param) for param in layer.params])
        else:
            weights.append(None)
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "arch": net.describe(),
        "k": net.num_classes,
        "dims": list(net.input_shape),
        "seed": seed,
        "hyperparams": hyperparams,
        "weights": weights,
    }


def decode_network(document: Dict[str, Any], path: str = "<model>") -> Network:
    if document.get("format_version") != MODEL_FORMAT_VERSION:
        raise ArtifactFormatError(path, f"unsupported model format_version {document.get('format_version')}")
    try:
        layers = []
        for description, encoded in zip(document["arch"], document["weights"]):
            params = [] if encoded is None else _decode_params(description, encoded)
            layers.append(layer_from_description(description, params))
        return Network(layers, document["k"], document["dims"])
    except (KeyError, ValueError, TypeError) as e:
        raise ArtifactFormatError(path, f"malformed model file: {e}")


def _encode_array(array: np.ndarray) -> str:
    return base64.b64encode(np.asarray(array, dtype="<f4").tobytes()).decode("ascii")


def _decode_params(description: Dict[str, Any], encoded: List[str]) -> List[np.ndarray]:
    weights = np.frombuffer(base64.b64decode(encoded[0]), dtype="<f4").astype(np.float64)
    bias = np.frombuffer(base64.b64decode(encoded[1]), dtype="<f4").astype(np.float64)
    if description["kind"] == "dense":
        weights = weights.reshape(description["d_in"], description["d_out"])
    else:
        k = description["kernel_size"]
        weights = weights.reshape(description["out_channels"], description["in_channels"], k, k)
    return [weights, bias]
