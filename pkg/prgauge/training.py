from dataclasses import dataclass
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np

from prgauge import datasets
from prgauge.datasets import Dataset
from prgauge.entities import AugmentRegime
from prgauge.entities import EpochStats
from prgauge.entities import TrainConfig
from prgauge.entities import TrainingLog
from prgauge.errors import InvalidDatasetError
from prgauge.errors import InvalidNetworkError
from prgauge.errors import TrainingDivergedError
from prgauge.layers import Layer
from prgauge.logging_utils import get_logger
from prgauge.network import Network
from prgauge.network import accuracy

logger = get_logger()

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


@dataclass(frozen=True)
class TrainingRun:
    network: Network
    log: TrainingLog


def loss_and_gradients(
    net: Network, inputs: np.ndarray, labels: np.ndarray, weight_decay: float = 0.0
) -> Tuple[float, List[np.ndarray]]:
    """Mean cross-entropy (plus 0.5 * weight_decay * |W|^2) and its gradient for every array in `net.params`."""
    loss, grads, _ = _forward_backward(net.layers, np.asarray(inputs, dtype=np.float64), labels, weight_decay)
    return loss, grads


def _forward_backward(
    layers: Sequence[Layer], inputs: np.ndarray, labels: np.ndarray, weight_decay: float
) -> Tuple[float, List[np.ndarray], int]:
    body = layers[:-1]
    activations = [inputs]
    for layer in body:
        activations.append(layer.forward(activations[-1]))
    logits = activations[-1]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    count = len(labels)
    rows = np.arange(count)
    loss = float(-log_probs[rows, labels].mean())
    correct = int(np.sum(np.argmax(logits, axis=1) == labels))

    grad = np.exp(log_probs)
    grad[rows, labels] -= 1.0
    grad /= count
    per_layer: List[Tuple[np.ndarray, ...]] = []
    for layer, layer_input in zip(reversed(body), reversed(activations[:-1])):
        grad, param_grads = layer.backward(layer_input, grad)
        if layer.has_params:
            per_layer.append(param_grads)
    per_layer.reverse()

    grads: List[np.ndarray] = []
    param_layers = [layer for layer in body if layer.has_params]
    for layer, (grad_weights, grad_bias) in zip(param_layers, per_layer):
        weights = layer.params[0]
        if weight_decay:
            loss += 0.5 * weight_decay * float(np.sum(weights * weights))
            grad_weights = grad_weights + weight_decay * weights
        grads += [grad_weights, grad_bias]
    return loss, grads, correct


class _Sgd:
    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]) -> None:
        for param, grad in zip(params, grads):
            param -= self.learning_rate * grad


class _Adam:
    def __init__(self, learning_rate: float, params: List[np.ndarray]):
        self.learning_rate = learning_rate
        self.first = [np.zeros_like(p) for p in params]
        self.second = [np.zeros_like(p) for p in params]
        self.steps = 0

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]) -> None:
        self.steps += 1
        correction1 = 1.0 - ADAM_BETA1**self.steps
        correction2 = 1.0 - ADAM_BETA2**self.steps
        for param, grad, m, v in zip(params, grads, self.first, self.second):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * grad
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * grad * grad
            param -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + ADAM_EPSILON)


def train(
    net: Network,
    dataset: Dataset,
    cfg: TrainConfig,
    validation: Optional[Dataset] = None,
    regime: Optional[AugmentRegime] = None,
) -> TrainingRun:
    """Minibatch cross-entropy training. Deterministic given `cfg.seed`.

    Labels are used as given; label noise is applied beforehand with `datasets.with_label_noise`.
    """
    if len(dataset) == 0:
        raise InvalidDatasetError("Cannot train on an empty dataset")
    if cfg.epochs == 0:
        final = accuracy(net, dataset.inputs, dataset.labels)
        return TrainingRun(network=net, log=TrainingLog(epochs=[], final_train_accuracy=final))

    rng = np.random.default_rng(cfg.seed)
    params = [np.array(p, dtype=np.float64, copy=True) for p in net.params]
    optimizer = _Adam(cfg.learning_rate, params) if cfg.optimizer == "adam" else _Sgd(cfg.learning_rate)
    layer_sizes = [len(layer.params) for layer in net.layers]
    augmenting = regime is not None and regime.level != "none"
    history: List[EpochStats] = []

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(dataset))
        losses = []
        correct = 0
        for batch_index, start in enumerate(range(0, len(order), cfg.batch_size)):
            indices = order[start : start + cfg.batch_size]
            inputs = dataset.inputs[indices]
            if augmenting:
                inputs = datasets.augment(inputs, regime, rng)
            layers = _bind(net.layers, layer_sizes, params)
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads, batch_correct = _forward_backward(
                    layers, inputs, dataset.labels[indices], cfg.weight_decay
                )
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"Loss became {loss} at epoch {epoch}, batch {batch_index} "
                    f"(optimizer={cfg.optimizer}, learning_rate={cfg.learning_rate})"
                )
            optimizer.step(params, grads)
            losses.append(loss)
            correct += batch_correct
        stats = EpochStats(epoch=epoch, loss=float(np.mean(losses)), train_accuracy=correct / len(order))
        if validation is not None:
            candidate = _network_or_diverged(net, params)
            stats.validation_accuracy = accuracy(candidate, validation.inputs, validation.labels)
        history.append(stats)
        logger.debug(f"epoch {epoch}: loss={stats.loss:.4f} train_acc={stats.train_accuracy:.3f}")

    trained = _network_or_diverged(net, params)
    final = accuracy(trained, dataset.inputs, dataset.labels)
    logger.debug(f"Training finished after {cfg.epochs} epochs with train accuracy {final:.4f}")
    return TrainingRun(network=trained, log=TrainingLog(epochs=history, final_train_accuracy=final))


def _bind(layers: Sequence[Layer], sizes: Sequence[int], params: Sequence[np.ndarray]) -> List[Layer]:
    bound = []
    cursor = 0
    for layer, size in zip(layers, sizes):
        bound.append(layer.with_params(params[cursor : cursor + size]) if size else layer)
        cursor += size
    return bound


def _network_or_diverged(net: Network, params: Sequence[np.ndarray]) -> Network:
    try:
        return net.with_params([p.copy() for p in params])
    except InvalidNetworkError as e:
        raise TrainingDivergedError(f"Training produced an invalid network: {e}")
