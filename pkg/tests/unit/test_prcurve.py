import numpy as np
import pytest

from prgauge.datasets import Dataset
from prgauge.entities import TrainConfig
from prgauge.entities import PerturbationSpec
from prgauge.errors import EmptyCurvePointError
from prgauge.errors import InvalidCurveError
from prgauge.layers import Dense
from prgauge.layers import Softmax
from prgauge.network import Network
from prgauge.prcurve import PrCurve
from prgauge.prcurve import batch_perturbed_accuracy
from prgauge.prcurve import build_pr_curve
from prgauge.prcurve import effective_batch_count
from prgauge.prcurve import normalize
from prgauge.prcurve import pcd
from prgauge.scores import gi_score
from prgauge.training import train

INTRA = PerturbationSpec(kind="mixup_intra", alpha_min=0.0, alpha_max=0.5)
NOISE = PerturbationSpec(kind="gaussian_noise", alpha_min=0.0, alpha_max=2.0)


def _constant_network(num_classes: int = 2) -> Network:
    bias = np.zeros(num_classes)
    bias[0] = 1.0
    return Network([Dense(weights=np.zeros((2, num_classes)), bias=bias), Softmax()], num_classes, (2,))


def test_invariant_model_has_flat_curve():
    dataset = Dataset(inputs=np.random.default_rng(0).standard_normal((64, 2)), labels=np.zeros(64, dtype=int), num_classes=2)
    curve = build_pr_curve(_constant_network(), dataset, INTRA, n_p=6, n_b=4, b_s=16, seed=1)
    assert np.allclose(curve.accuracies, 1.0)
    assert gi_score(curve) == pytest.approx(0.0, abs=1e-12)
    assert curve.norm_alphas[0] == 0.0 and curve.norm_alphas[-1] == 1.0


def test_curve_is_deterministic_and_schedule_independent(mlp, blobs):
    first = build_pr_curve(mlp, blobs, NOISE, n_p=5, n_b=3, b_s=32, seed=7, model_id="m001")
    second = build_pr_curve(mlp, blobs, NOISE, n_p=5, n_b=3, b_s=32, seed=7, model_id="m001", workers=4)
    assert np.array_equal(first.accuracies, second.accuracies)
    assert np.array_equal(first.kept_counts, second.kept_counts)


def test_intra_curve_at_layer_one(mlp, blobs):
    spec = PerturbationSpec(kind="mixup_intra", alpha_min=0.0, alpha_max=0.5, layer=1)
    curve = build_pr_curve(mlp, blobs, spec, n_p=3, n_b=2, b_s=32, seed=0)
    assert len(curve.accuracies) == 3
    assert np.all(curve.kept_counts > 0)


def test_all_batches_dropped_raises():
    dataset = Dataset(inputs=np.zeros((4, 2)), labels=np.arange(4), num_classes=4)
    with pytest.raises(EmptyCurvePointError):
        build_pr_curve(_constant_network(4), dataset, INTRA, n_p=3, n_b=1, b_s=4, seed=0)


def test_batch_count_is_capped(mocker):
    warning = mocker.patch("prgauge.prcurve.logger.warning")
    assert effective_batch_count(100, 8, 32) == 3
    warning.assert_called_once()
    assert effective_batch_count(100, 2, 32) == 2


def test_curve_validation():
    with pytest.raises(InvalidCurveError):
        PrCurve(alphas=np.array([0.0, 0.0]), accuracies=np.array([1.0, 1.0]))
    with pytest.raises(InvalidCurveError):
        PrCurve(alphas=np.array([0.0, 1.0]), accuracies=np.array([1.0, 1.2]))


def test_normalize_and_pcd():
    curve = normalize(PrCurve(alphas=np.array([0.5, 1.0, 1.5]), accuracies=np.array([1.0, 1.0, 1.0])))
    assert np.allclose(curve.norm_alphas, [0.0, 0.5, 1.0])
    density = pcd(curve)
    assert np.allclose(density.cumulative, curve.norm_alphas)


def test_standard_errors():
    curve = PrCurve(
        alphas=np.array([0.0, 1.0]), accuracies=np.array([0.5, 1.0]), kept_counts=np.array([100, 10])
    )
    assert np.allclose(curve.standard_errors, [0.05, 0.0])


def _per_sample_intra(net, inputs, labels, layer, alpha):
    """One pair at a time: sort by label, pair neighbours, tap, interpolate, resume."""
    order = sorted(range(len(labels)), key=lambda index: labels[index])
    correct = kept = 0
    for position in range(0, len(order) - 1, 2):
        first, second = order[position], order[position + 1]
        if labels[first] != labels[second]:
            continue
        h1 = net.forward_tap(inputs[first][None], layer)[0]
        h2 = net.forward_tap(inputs[second][None], layer)[0]
        mixed = [(1.0 - alpha) * a + alpha * b for a, b in zip(h1, h2)]
        probabilities = net.forward_from(layer, np.array([mixed]))[0]
        correct += int(np.argmax(probabilities) == labels[first])
        kept += 1
    return correct, kept


def test_batch_accuracy_matches_per_sample_loop(mlp, blobs):
    net = train(mlp, blobs, TrainConfig(epochs=5, learning_rate=0.01, seed=2)).network
    inputs, labels = blobs.inputs[:48], blobs.labels[:48]
    spec = PerturbationSpec(kind="mixup_intra", alpha_min=0.0, alpha_max=0.5, layer=1)

    result = batch_perturbed_accuracy(net, inputs, labels, spec, 0.25, np.random.default_rng(0))

    assert result == _per_sample_intra(net, inputs, labels, 1, 0.25)
    assert result[1] > 0


def test_pcd_of_linear_decay_is_one_half(make_curve):
    curve = make_curve(1.0 - np.linspace(0.0, 1.0, 1001))
    assert pcd(curve).cumulative[-1] == pytest.approx(0.5, abs=1e-4)


def test_few_batches_agree_with_full_pass(mlp, blobs):
    b_s = 8
    full = build_pr_curve(mlp, blobs, NOISE, n_p=3, n_b=len(blobs) // b_s, b_s=b_s, seed=5)
    tenth = build_pr_curve(mlp, blobs, NOISE, n_p=3, n_b=len(blobs) // b_s // 10, b_s=b_s, seed=5)
    p = full.accuracies
    bound = 3.0 * np.sqrt(p * (1.0 - p) / tenth.kept_counts)
    assert np.all(np.abs(full.accuracies - tenth.accuracies) <= bound)
