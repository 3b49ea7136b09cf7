import numpy as np
import pytest

from prgauge.datasets import Dataset
from prgauge.datasets import gen_blobs
from prgauge.entities import ModelRecord
from prgauge.entities import PerturbationSpec
from prgauge.network import build_mlp
from prgauge.prcurve import PrCurve
from prgauge.prcurve import normalize

INTRA = PerturbationSpec(kind="mixup_intra", alpha_min=0.0, alpha_max=0.5)


def _curve(accuracies, spec: PerturbationSpec = INTRA, model_id: str = "m000") -> PrCurve:
    accuracies = np.asarray(accuracies, dtype=np.float64)
    alphas = np.linspace(spec.alpha_min, spec.alpha_max, len(accuracies))
    return normalize(PrCurve(alphas=alphas, accuracies=accuracies, spec=spec, model_id=model_id))


def _record(model_id: str, gap: float, **hyperparams) -> ModelRecord:
    return ModelRecord(id=model_id, hyperparams=hyperparams, train_acc=1.0, test_acc=1.0 - gap)


@pytest.fixture
def make_curve():
    return _curve


@pytest.fixture
def make_record():
    return _record


@pytest.fixture
def blobs() -> Dataset:
    return gen_blobs(k=3, n=240, d=4, spread=0.3, seed=3, separation=3.0)


@pytest.fixture
def mlp():
    return build_mlp(input_dim=4, hidden=[8, 6], num_classes=3, seed=5)


@pytest.fixture
def toy_records():
    """Two depth groups of three models each."""
    return [
        _record("a", 0.10, depth=1),
        _record("b", 0.20, depth=1),
        _record("c", 0.15, depth=1),
        _record("e", 0.30, depth=2),
        _record("f", 0.10, depth=2),
        _record("g", 0.20, depth=2),
    ]


@pytest.fixture
def toy_values():
    return {"a": 1.0, "b": 3.0, "c": 2.0, "e": 1.0, "f": 2.0, "g": 3.0}


@pytest.fixture(autouse=True)
def _single_thread(monkeypatch):
    monkeypatch.setenv("PRGAUGE_THREADS", "1")


@pytest.fixture
def tiny_config(tmp_path):
    """A corpus small enough to train inside a unit test."""
    from prgauge.entities import RunConfig

    return RunConfig.model_validate(
        {
            "seed": 3,
            "output_dir": str(tmp_path / "run"),
            "dataset": {"kind": "blobs", "num_classes": 3, "num_samples": 160, "dims": 4, "spread": 0.5},
            "corpus": {
                "architecture": "mlp",
                "axes": {"depth": [1, 2], "learning_rate": [0.01, 0.003]},
                "width": 8,
                "epochs": 3,
            },
            "curve": {"n_p": 11, "n_b": 2, "b_s": 32},
            "measures": ["gi_intra_l0", "pal_intra_l0", "mixup_l0", "gi_noise_l0", "random_baseline"],
            "combinations": ["avg_rank:gi_intra_l0+mixup_l0"],
            "timing": {"batch_counts": [1, 2], "repeats": 2, "measure": "gi_intra_l0"},
        }
    )
