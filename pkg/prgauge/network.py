from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np

from prgauge.errors import InvalidDatasetError
from prgauge.errors import InvalidNetworkError
from prgauge.errors import ShapeMismatchError
from prgauge.layers import Conv2d
from prgauge.layers import Dense
from prgauge.layers import Flatten
from prgauge.layers import Layer
from prgauge.layers import Relu
from prgauge.layers import Shape
from prgauge.layers import Softmax


class Network:
    """Immutable layered classifier f: R^d -> simplex over k classes.

    Tap index l counts parameterised stages. Stage l groups the l-th dense/conv layer with any
    flatten right before it and the activations right after it, so x^(0) is the input and
    x^(depth) are the logits. The softmax is never part of a stage; `forward_from` always ends with it.
    """

    def __init__(self, layers: Sequence[Layer], num_classes: int, input_shape: Sequence[int]):
        self.layers: Tuple[Layer, ...] = tuple(layers)
        self.num_classes = int(num_classes)
        self.input_shape: Shape = tuple(int(d) for d in input_shape)
        self._validate()
        self._stage_bounds = self._compute_stage_bounds()
        self._stage_shapes = self._compute_stage_shapes()

    def _validate(self) -> None:
        if not self.layers or not isinstance(self.layers[-1], Softmax):
            raise InvalidNetworkError("A network must end with a softmax output layer")
        if any(isinstance(layer, Softmax) for layer in self.layers[:-1]):
            raise InvalidNetworkError("Softmax is only allowed as the final layer")
        if self.num_classes < 2 or any(d < 1 for d in self.input_shape):
            raise InvalidNetworkError("A network needs k >= 2 classes and positive input dims")
        shape = self.input_shape
        for position, layer in enumerate(self.layers):
            try:
                shape = layer.output_shape(shape)
            except ShapeMismatchError as e:
                raise InvalidNetworkError(f"Layer {position} ({layer.kind}) is incompatible with its input: {e}")
            for param in layer.params:
                if not np.all(np.isfinite(param)):
                    raise InvalidNetworkError(f"Layer {position} ({layer.kind}) has non-finite weights")
        if shape != (self.num_classes,):
            raise InvalidNetworkError(f"Network output shape {shape} does not match k={self.num_classes}")

    def _compute_stage_bounds(self) -> List[Tuple[int, int]]:
        body = self.layers[:-1]
        positions = [i for i, layer in enumerate(body) if layer.has_params]
        if not positions:
            raise InvalidNetworkError("A network needs at least one dense or conv layer")
        bounds = []
        start = 0
        for position in positions:
            if any(layer.has_params or not isinstance(layer, Flatten) for layer in body[start:position]):
                raise InvalidNetworkError(f"Only a flatten may precede the parameterised layer at position {position}")
            end = position + 1
            while end < len(body) and isinstance(body[end], Relu):
                end += 1
            bounds.append((start, end))
            start = end
        if start != len(body):
            raise InvalidNetworkError("Layers after the last parameterised stage must be activations")
        return bounds

    def _compute_stage_shapes(self) -> List[Shape]:
        shapes = [self.input_shape]
        shape = self.input_shape
        for start, end in self._stage_bounds:
            for layer in self.layers[start:end]:
                shape = layer.output_shape(shape)
            shapes.append(shape)
        return shapes

    @property
    def depth(self) -> int:
        return len(self._stage_bounds)

    def stage_shape(self, layer: int) -> Shape:
        self._check_layer(layer)
        return self._stage_shapes[layer]

    @property
    def params(self) -> List[np.ndarray]:
        return [param for layer in self.layers for param in layer.params]

    def with_params(self, params: Sequence[np.ndarray]) -> "Network":
        params = list(params)
        layers = []
        for layer in self.layers:
            count = len(layer.params)
            chunk, params = params[:count], params[count:]
            layers.append(layer.with_params(chunk) if count else layer)
        if params:
            raise InvalidNetworkError(f"{len(params)} parameter arrays left over")
        return Network(layers, self.num_classes, self.input_shape)

    def describe(self) -> List[Dict[str, Any]]:
        return [layer.describe() for layer in self.layers]

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.forward_from(0, x)

    def forward_tap(self, x: np.ndarray, layer: int) -> np.ndarray:
        """x^(layer): the representation after `layer` stages. Layer 0 returns x untouched."""
        self._check_layer(layer)
        if layer == 0:
            self._as_batch(x, self.input_shape)
            return x
        batch, single = self._as_batch(x, self.input_shape)
        end = self._stage_bounds[layer - 1][1]
        for layer_map in self.layers[:end]:
            batch = layer_map.forward(batch)
        return batch[0] if single else batch

    def forward_from(self, layer: int, hidden: np.ndarray) -> np.ndarray:
        """f_layer: resumes the network from x^(layer) and returns class probabilities."""
        self._check_layer(layer)
        batch, single = self._as_batch(hidden, self._stage_shapes[layer])
        start = self._stage_bounds[layer - 1][1] if layer > 0 else 0
        for layer_map in self.layers[start:]:
            batch = layer_map.forward(batch)
        return batch[0] if single else batch

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Argmax class; ties go to the lowest class index."""
        return np.argmax(self.forward(x), axis=-1)

    def _check_layer(self, layer: int) -> None:
        if not 0 <= layer <= self.depth:
            raise InvalidNetworkError(f"Layer index {layer} is out of range [0, {self.depth}]")

    @staticmethod
    def _as_batch(x: np.ndarray, expected: Shape) -> Tuple[np.ndarray, bool]:
        array = np.asarray(x, dtype=np.float64)
        if array.shape == expected:
            return array[None], True
        if array.shape[1:] == expected:
            return array, False
        raise ShapeMismatchError(f"Expected shape {expected} or (N, *{expected}), got {array.shape}")


def accuracy(net: Network, inputs: np.ndarray, labels: np.ndarray, batch_size: int = 4096) -> float:
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise InvalidDatasetError("Accuracy needs at least one labeled sample")
    if len(inputs) != len(labels):
        raise InvalidDatasetError(f"{len(inputs)} inputs but {len(labels)} labels")
    if labels.min() < 0 or labels.max() >= net.num_classes:
        raise InvalidDatasetError(f"Labels must lie in [0, {net.num_classes})")
    correct = 0
    for start in range(0, len(labels), batch_size):
        predictions = net.predict(inputs[start : start + batch_size])
        correct += int(np.sum(predictions == labels[start : start + batch_size]))
    return correct / len(labels)


def quantize_float32(net: Network) -> Network:
    """Rounds every weight to float32 precision, the precision model files store."""
    return net.with_params([param.astype(np.float32).astype(np.float64) for param in net.params])


def build_mlp(input_dim: int, hidden: Sequence[int], num_classes: int, seed: int) -> Network:
    rng = np.random.default_rng(seed)
    layers: List[Layer] = []
    d_in = input_dim
    for width in hidden:
        layers += [_init_dense(d_in, width, rng), Relu()]
        d_in = width
    layers += [_init_dense(d_in, num_classes, rng), Softmax()]
    return Network(layers, num_classes, (input_dim,))


def build_convnet(
    input_shape: Sequence[int],
    channels: Sequence[int],
    kernel_size: int,
    num_classes: int,
    seed: int,
    stride: int = 1,
    hidden: Optional[Sequence[int]] = None,
) -> Network:
    rng = np.random.default_rng(seed)
    layers: List[Layer] = []
    shape: Shape = tuple(input_shape)
    for out_channels in channels:
        in_channels = shape[0]
        bound = 1.0 / np.sqrt(in_channels * kernel_size * kernel_size)
        conv = Conv2d(
            weights=rng.uniform(-bound, bound, (out_channels, in_channels, kernel_size, kernel_size)),
            bias=rng.uniform(-bound, bound, out_channels),
            stride=stride,
        )
        layers += [conv, Relu()]
        shape = conv.output_shape(shape)
    layers.append(Flatten())
    d_in = int(np.prod(shape))
    for width in hidden or ():
        layers += [_init_dense(d_in, width, rng), Relu()]
        d_in = width
    layers += [_init_dense(d_in, num_classes, rng), Softmax()]
    return Network(layers, num_classes, input_shape)


def _init_dense(d_in: int, d_out: int, rng: np.random.Generator) -> Dense:
    bound = 1.0 / np.sqrt(d_in)
    return Dense(weights=rng.uniform(-bound, bound, (d_in, d_out)), bias=rng.uniform(-bound, bound, d_out))
