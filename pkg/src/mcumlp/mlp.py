"""Matrix-form multilayer perceptron trained by backpropagation with momentum.

Data flows column-wise: an input batch is a ``P x N`` matrix whose columns are
samples. Every layer owns a weight matrix of shape ``H[k] x (H[k-1] + 1)``
whose column 0 multiplies the constant -1 bias input.

The pipeline mirrors the embedded decomposition: ``irpm`` (input permutation),
``ffm`` (one layer forward), ``em`` (output error), ``backprop_gradients`` and
``bpm`` (per-layer weight update), with ``mse`` as the training monitor.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError, TrainingDiverged
from .matrix import (
    DTYPE,
    augment_bias,
    hadamard,
    layer_forward,
    layer_hidden_delta,
    layer_update,
    mat_product,
    mat_sub,
    matrix,
    sigmoid_derivative_from_output,
    trace_product,
    transpose,
)

ACTIVATIONS = ("sigmoid", "linear")
DIVERGENCE_LIMIT = 1e6


def _check_widths(widths):
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2 or any(w < 1 for w in widths):
        raise ConfigError(f"invalid layer widths {widths!r}: need >= 2 positive entries")
    if any(w > 0xFFFF for w in widths):
        raise ConfigError(f"layer width above 65535 in {widths!r}")
    return widths


@dataclass
class MlpNetwork:
    widths: tuple
    weights: list
    momentum: list
    activations: tuple = None

    def __post_init__(self):
        self.widths = _check_widths(self.widths)
        n_layers = len(self.widths) - 1
        if self.activations is None:
            self.activations = ("sigmoid",) * n_layers
        self.activations = tuple(self.activations)
        if len(self.activations) != n_layers:
            raise ConfigError("one activation per layer required")
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {act!r}")
        if len(self.weights) != n_layers or len(self.momentum) != n_layers:
            raise ShapeError("weights/momentum count does not match layer count")
        self.weights = [matrix(w) for w in self.weights]
        self.momentum = [matrix(m) for m in self.momentum]
        for k, (w, m) in enumerate(zip(self.weights, self.momentum), start=1):
            expected = (self.widths[k], self.widths[k - 1] + 1)
            if w.shape != expected or m.shape != expected:
                raise ShapeError(
                    f"layer {k}: expected {expected}, got weights {w.shape} "
                    f"and momentum {m.shape}"
                )

    @property
    def n_layers(self):
        return len(self.widths) - 1

    def copy(self):
        return MlpNetwork(
            self.widths,
            [w.copy() for w in self.weights],
            [m.copy() for m in self.momentum],
            self.activations,
        )


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.9
    alpha: float = 0.8
    batch_size: int = 4
    max_epochs: int = 2000
    mode: str = "batch"
    seed: int = 0
    mse_stop: float = None

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigError(f"eta must be > 0, got {self.eta}")
        if not 0 <= self.alpha < 1:
            raise ConfigError(f"alpha must be in [0, 1), got {self.alpha}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 0:
            raise ConfigError("max_epochs must be >= 0")
        if self.mode not in ("batch", "online"):
            raise ConfigError(f"mode must be 'batch' or 'online', got {self.mode!r}")


@dataclass
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    names: tuple = field(default=None)

    def __post_init__(self):
        self.inputs = matrix(self.inputs)
        self.targets = matrix(self.targets)
        if self.inputs.shape[1] != self.targets.shape[1]:
            raise ShapeError(
                f"inputs have {self.inputs.shape[1]} samples, "
                f"targets have {self.targets.shape[1]}"
            )
        if self.names is not None:
            self.names = tuple(self.names)
            if len(self.names) != self.n_inputs + self.n_outputs:
                raise ShapeError("one name per input and output row required")

    @property
    def n_samples(self):
        return self.inputs.shape[1]

    @property
    def n_inputs(self):
        return self.inputs.shape[0]

    @property
    def n_outputs(self):
        return self.targets.shape[0]

    def columns(self, index):
        index = np.asarray(index)
        return Dataset(self.inputs[:, index], self.targets[:, index], self.names)


def init_weights(widths, seed=0, activations=None):
    """Uniform [-0.5, 0.5] weights from a seeded generator, zero momentum."""
    widths = _check_widths(widths)
    rng = np.random.default_rng(seed)
    weights, momentum = [], []
    for k in range(1, len(widths)):
        shape = (widths[k], widths[k - 1] + 1)
        weights.append(rng.uniform(-0.5, 0.5, size=shape).astype(DTYPE))
        momentum.append(np.zeros(shape, dtype=DTYPE))
    return MlpNetwork(widths, weights, momentum, activations)


def _activation_derivative(y, activation):
    if activation == "sigmoid":
        return sigmoid_derivative_from_output(y)
    return np.ones_like(y)


def ffm(weights, y_prev, activation="sigmoid"):
    """One layer forward: ``phi(W @ [-1; Y_prev])``."""
    return layer_forward(weights, y_prev, activation == "sigmoid")


def forward(net, inputs):
    """Propagate ``inputs`` through every layer.

    Returns the list ``[Y0, Y1, ..., YL]``; ``[-1]`` is the network output and
    the rest is the cache the backward pass needs.
    """
    inputs = matrix(inputs)
    if inputs.shape[0] != net.widths[0]:
        raise ShapeError(f"network expects {net.widths[0]} input rows, got {inputs.shape[0]}")
    outputs = [inputs]
    for w, act in zip(net.weights, net.activations):
        outputs.append(ffm(w, outputs[-1], act))
    return outputs


def predict(net, inputs):
    return forward(net, inputs)[-1]


def em(y_out, desired):
    """Output error ``E = D - Y``."""
    return mat_sub(desired, y_out)


def output_delta(y_out, error, activation="sigmoid"):
    return hadamard(_activation_derivative(y_out, activation), error)


def hidden_delta(next_weights, next_delta, y_hidden, activation="sigmoid"):
    """Local gradient of a hidden layer from the layer above it.

    ``W_next.T @ g_next`` has one extra leading row for the bias input; that
    row carries no gradient back and is split off before the element-wise
    product with the activation derivative.
    """
    return layer_hidden_delta(next_weights, next_delta, y_hidden, activation == "sigmoid")


def backprop_gradients(net, outputs, error):
    """Local gradients ``[g1, ..., gL]`` for a cached forward pass."""
    error = matrix(error)
    if error.shape != outputs[-1].shape:
        raise ShapeError(f"error shape {error.shape} != output shape {outputs[-1].shape}")
    deltas = [None] * net.n_layers
    deltas[-1] = output_delta(outputs[-1], error, net.activations[-1])
    for k in range(net.n_layers - 2, -1, -1):
        deltas[k] = hidden_delta(
            net.weights[k + 1], deltas[k + 1], outputs[k + 1], net.activations[k]
        )
    return deltas


def loss_gradients(outputs, deltas):
    """Gradient of the MSE monitor w.r.t. each weight matrix.

    The update rule moves along ``+g [-1; Y].T``, i.e. against this gradient.
    """
    n = outputs[0].shape[1]
    return [
        -mat_product(g, transpose(augment_bias(y_prev))) / DTYPE(n)
        for g, y_prev in zip(deltas, outputs[:-1])
    ]


def update_layer(weights, prev_delta_w, delta, y_prev, eta, alpha):
    """Return ``(W + dW, dW)`` with ``dW = eta/N g [-1; Y].T + alpha dW_prev``."""
    return layer_update(weights, prev_delta_w, delta, y_prev, eta, alpha)


def bpm(net, deltas, outputs, eta, alpha):
    """Apply one momentum update to every layer of ``net`` in place."""
    if len(deltas) != net.n_layers:
        raise ShapeError(f"expected {net.n_layers} local gradients, got {len(deltas)}")
    for k, g in enumerate(deltas):
        net.weights[k], net.momentum[k] = update_layer(
            net.weights[k], net.momentum[k], g, outputs[k], eta, alpha
        )


def mse(error, n_samples):
    """``trace(E.T E) / (2 N)``."""
    error = matrix(error)
    if error.shape[1] != n_samples:
        raise ShapeError(f"mse: error has {error.shape[1]} columns, N={n_samples}")
    return float(trace_product(error, error)) / (2 * n_samples)


def irpm(dataset, seed):
    """Jointly permute the sample columns of ``dataset``.

    ``seed`` may be an int or an existing ``numpy.random.Generator``.
    """
    rng = np.random.default_rng(seed)
    return dataset.columns(rng.permutation(dataset.n_samples))


def _check_fit(net, dataset):
    if dataset.n_inputs != net.widths[0] or dataset.n_outputs != net.widths[-1]:
        raise ShapeError(
            f"dataset is {dataset.n_inputs} -> {dataset.n_outputs}, "
            f"network is {net.widths[0]} -> {net.widths[-1]}"
        )


def train(net, dataset, config):
    """Train a copy of ``net``; return ``(trained_net, mse_per_epoch)``.

    Batch mode walks the samples in stored order in chunks of
    ``config.batch_size``; online mode first reshuffles them each epoch.
    The recorded epoch MSE is computed from the errors seen before each update.
    """
    _check_fit(net, dataset)
    net = net.copy()
    rng = np.random.default_rng(config.seed)
    n = dataset.n_samples
    # None or a non-finite threshold means "run every epoch".
    stop = config.mse_stop
    if stop is not None and not math.isfinite(stop):
        stop = None
    trace = []
    for epoch in range(config.max_epochs):
        data = irpm(dataset, rng) if config.mode == "online" else dataset
        sq_error = 0.0
        for start in range(0, n, config.batch_size):
            cols = slice(start, start + config.batch_size)
            outputs = forward(net, data.inputs[:, cols])
            error = em(outputs[-1], data.targets[:, cols])
            sq_error += float(trace_product(error, error))
            deltas = backprop_gradients(net, outputs, error)
            bpm(net, deltas, outputs, config.eta, config.alpha)
        epoch_mse = sq_error / (2 * n)
        if not math.isfinite(epoch_mse) or epoch_mse > DIVERGENCE_LIMIT:
            raise TrainingDiverged(epoch, epoch_mse)
        trace.append(epoch_mse)
        if stop is not None and epoch_mse <= stop:
            break
    return net, trace


def evaluate(net, dataset):
    """Forward the whole dataset; return ``(outputs, mse)``."""
    _check_fit(net, dataset)
    outputs = predict(net, dataset.inputs)
    return outputs, mse(em(outputs, dataset.targets), dataset.n_samples)
