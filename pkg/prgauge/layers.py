from abc import ABC
from abc import abstractmethod
from dataclasses import dataclass
from math import prod
from typing import Any
from typing import ClassVar
from typing import Dict
from typing import Sequence
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from prgauge.errors import InvalidNetworkError
from prgauge.errors import ShapeMismatchError

Shape = Tuple[int, ...]


class Layer(ABC):
    """A single map in a network. Layers act on batches: the leading axis is the sample axis."""

    kind: ClassVar[str]
    has_params: ClassVar[bool] = False

    @property
    def params(self) -> Tuple[np.ndarray, ...]:
        return ()

    def with_params(self, params: Sequence[np.ndarray]) -> "Layer":
        if params:
            raise InvalidNetworkError(f"{self.kind} layers carry no parameters")
        return self

    @abstractmethod
    def output_shape(self, input_shape: Shape) -> Shape:
        raise RuntimeError("Function not implemented")

    @abstractmethod
    def forward(self, x: np.ndarray) -> np.ndarray:
        raise RuntimeError("Function not implemented")

    @abstractmethod
    def backward(self, x: np.ndarray, grad_output: np.ndarray) -> Tuple[np.ndarray, Tuple[np.ndarray, ...]]:
        """Returns the gradient with respect to the input and to each parameter, in `params` order."""
        raise RuntimeError("Function not implemented")

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind}


@dataclass(frozen=True, eq=False)
class Dense(Layer):
    weights: np.ndarray  # (d_in, d_out)
    bias: np.ndarray  # (d_out,)

    kind: ClassVar[str] = "dense"
    has_params: ClassVar[bool] = True

    def __post_init__(self):
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[1],):
            raise InvalidNetworkError(
                f"Dense weights {self.weights.shape} and bias {self.bias.shape} do not describe a d_in -> d_out map"
            )

    @property
    def d_in(self) -> int:
        return int(self.weights.shape[0])

    @property
    def d_out(self) -> int:
        return int(self.weights.shape[1])

    @property
    def params(self) -> Tuple[np.ndarray, ...]:
        return self.weights, self.bias

    def with_params(self, params: Sequence[np.ndarray]) -> "Dense":
        weights, bias = params
        return Dense(weights=weights, bias=bias)

    def output_shape(self, input_shape: Shape) -> Shape:
        if tuple(input_shape) != (self.d_in,):
            raise ShapeMismatchError(f"Dense layer expects inputs of shape ({self.d_in},), got {tuple(input_shape)}")
        return (self.d_out,)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights + self.bias

    def backward(self, x: np.ndarray, grad_output: np.ndarray) -> Tuple[np.ndarray, Tuple[np.ndarray, ...]]:
        grad_input = grad_output @ self.weights.T
        return grad_input, (x.T @ grad_output, grad_output.sum(axis=0))

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "d_in": self.d_in, "d_out": self.d_out}


@dataclass(frozen=True, eq=False)
class Conv2d(Layer):
    """Valid (unpadded) 2-D convolution over (N, C, H, W) batches."""

    weights: np.ndarray  # (out_channels, in_channels, k, k)
    bias: np.ndarray  # (out_channels,)
    stride: int = 1

    kind: ClassVar[str] = "conv2d"
    has_params: ClassVar[bool] = True

    def __post_init__(self):
        if self.weights.ndim != 4 or self.weights.shape[2] != self.weights.shape[3]:
            raise InvalidNetworkError(f"Conv2d weights must be (out, in, k, k), got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise InvalidNetworkError(f"Conv2d bias {self.bias.shape} does not match {self.weights.shape[0]} channels")
        if self.stride < 1:
            raise InvalidNetworkError("Conv2d stride must be positive")

    @property
    def in_channels(self) -> int:
        return int(self.weights.shape[1])

    @property
    def out_channels(self) -> int:
        return int(self.weights.shape[0])

    @property
    def kernel_size(self) -> int:
        return int(self.weights.shape[2])

    @property
    def params(self) -> Tuple[np.ndarray, ...]:
        return self.weights, self.bias

    def with_params(self, params: Sequence[np.ndarray]) -> "Conv2d":
        weights, bias = params
        return Conv2d(weights=weights, bias=bias, stride=self.stride)

    def output_shape(self, input_shape: Shape) -> Shape:
        if len(input_shape) != 3 or input_shape[0] != self.in_channels:
            raise ShapeMismatchError(
                f"Conv2d layer expects inputs of shape ({self.in_channels}, H, W), got {tuple(input_shape)}"
            )
        _, height, width = input_shape
        k = self.kernel_size
        if height < k or width < k:
            raise ShapeMismatchError(f"Conv2d kernel {k} does not fit a {height}x{width} input")
        return self.out_channels, (height - k) // self.stride + 1, (width - k) // self.stride + 1

    def _windows(self, x: np.ndarray) -> np.ndarray:
        k = self.kernel_size
        return sliding_window_view(x, (k, k), axis=(2, 3))[:, :, :: self.stride, :: self.stride]

    def forward(self, x: np.ndarray) -> np.ndarray:
        windows = self._windows(x)
        out = np.einsum("nchwij,ocij->nohw", windows, self.weights, optimize=True)
        return out + self.bias[None, :, None, None]

    def backward(self, x: np.ndarray, grad_output: np.ndarray) -> Tuple[np.ndarray, Tuple[np.ndarray, ...]]:
        windows = self._windows(x)
        grad_weights = np.einsum("nchwij,nohw->ocij", windows, grad_output, optimize=True)
        grad_bias = grad_output.sum(axis=(0, 2, 3))
        grad_windows = np.einsum("nohw,ocij->nchwij", grad_output, self.weights, optimize=True)
        grad_input = np.zeros_like(x)
        s = self.stride
        out_h, out_w = grad_output.shape[2:]
        for i in range(self.kernel_size):
            for j in range(self.kernel_size):
                grad_input[:, :, i : i + s * out_h : s, j : j + s * out_w : s] += grad_windows[..., i, j]
        return grad_input, (grad_weights, grad_bias)

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_size": self.kernel_size,
            "stride": self.stride,
        }


@dataclass(frozen=True, eq=False)
class Relu(Layer):
    kind: ClassVar[str] = "relu"

    def output_shape(self, input_shape: Shape) -> Shape:
        return tuple(input_shape)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x, 0.0)

    def backward(self, x: np.ndarray, grad_output: np.ndarray) -> Tuple[np.ndarray, Tuple[np.ndarray, ...]]:
        return grad_output * (x > 0), ()


@dataclass(frozen=True, eq=False)
class Flatten(Layer):
    kind: ClassVar[str] = "flatten"

    def output_shape(self, input_shape: Shape) -> Shape:
        return (prod(input_shape),)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x.reshape(len(x), -1)

    def backward(self, x: np.ndarray, grad_output: np.ndarray) -> Tuple[np.ndarray, Tuple[np.ndarray, ...]]:
        return grad_output.reshape(x.shape), ()


@dataclass(frozen=True, eq=False)
class Softmax(Layer):
    kind: ClassVar[str] = "softmax"

    def output_shape(self, input_shape: Shape) -> Shape:
        if len(input_shape) != 1:
            raise ShapeMismatchError(f"Softmax expects flat logits, got shape {tuple(input_shape)}")
        return tuple(input_shape)

    def forward(self, x: np.ndarray) -> np.ndarray:
        shifted = x - x.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        return exp / exp.sum(axis=1, keepdims=True)

    def backward(self, x: np.ndarray, grad_output: np.ndarray) -> Tuple[np.ndarray, Tuple[np.ndarray, ...]]:
        probs = self.forward(x)
        inner = (grad_output * probs).sum(axis=1, keepdims=True)
        return probs * (grad_output - inner), ()


def layer_from_description(description: Dict[str, Any], params: Sequence[np.ndarray]) -> Layer:
    kind = description.get("kind")
    if kind == Dense.kind:
        layer: Layer = Dense(weights=params[0], bias=params[1])
        if (layer.d_in, layer.d_out) != (description["d_in"], description["d_out"]):
            raise InvalidNetworkError(f"Dense weights {params[0].shape} disagree with description {description}")
        return layer
    if kind == Conv2d.kind:
        return Conv2d(weights=params[0], bias=params[1], stride=int(description.get("stride", 1)))
    simple = {Relu.kind: Relu, Flatten.kind: Flatten, Softmax.kind: Softmax}
    if kind in simple:
        return simple[kind]()
    raise InvalidNetworkError(f"Unknown layer kind '{kind}'")
