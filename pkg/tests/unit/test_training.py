import numpy as np
import pytest

from prgauge.entities import AugmentRegime
from prgauge.entities import PerturbationSpec
from prgauge.entities import TrainConfig
from prgauge.errors import TrainingDivergedError
from prgauge.network import accuracy
from prgauge.training import train


def test_zero_epochs_returns_same_network(mlp, blobs):
    run = train(mlp, blobs, TrainConfig(epochs=0))
    assert run.network is mlp
    assert run.log.epochs == []


def test_learns_separable_blobs(mlp, blobs):
    run = train(mlp, blobs, TrainConfig(epochs=30, learning_rate=0.01, batch_size=16, seed=1))
    assert run.log.final_train_accuracy >= 0.95
    assert run.log.final_train_accuracy == accuracy(run.network, blobs.inputs, blobs.labels)
    assert len(run.log.epochs) == 30


def test_training_is_deterministic(mlp, blobs):
    config = TrainConfig(epochs=3, optimizer="sgd", learning_rate=0.1, seed=9)
    first = train(mlp, blobs, config).network
    second = train(mlp, blobs, config).network
    for a, b in zip(first.params, second.params):
        assert np.array_equal(a, b)


def test_validation_accuracy_is_logged(mlp, blobs):
    run = train(mlp, blobs, TrainConfig(epochs=2, seed=1), validation=blobs)
    assert all(stats.validation_accuracy is not None for stats in run.log.epochs)


def test_divergence_raises(mlp, blobs):
    with pytest.raises(TrainingDivergedError):
        train(mlp, blobs, TrainConfig(epochs=20, optimizer="sgd", learning_rate=1.0, weight_decay=1e6, seed=1))


def test_input_is_not_mutated(mlp, blobs):
    before = [p.copy() for p in mlp.params]
    train(mlp, blobs, TrainConfig(epochs=2, seed=1))
    for a, b in zip(before, mlp.params):
        assert np.array_equal(a, b)


def test_noise_augmentation_trains(mlp, blobs):
    regime = AugmentRegime(level="full", perturbation=PerturbationSpec(kind="gaussian_noise", alpha_min=0.0, alpha_max=0.2))
    run = train(mlp, blobs, TrainConfig(epochs=5, seed=2), regime=regime)
    assert 0.0 <= run.log.final_train_accuracy <= 1.0
