"""Dense feedforward networks with a softmax head.

Weights of layer ``i`` are stored as a ``(fan_in, fan_out)`` array, so the
pre-activation of a batch is ``g = f_prev @ W + b``.  Column ``n`` of ``W`` is
the weight vector of neuron ``n``, i.e. one outcome of the layer's sample
space.
"""

from __future__ import annotations

import enum
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

LOG_FLOOR = 1e-300


class Activation(enum.IntEnum):
    LINEAR = 0
    RELU = 1
    TANH = 2
    SIGMOID = 3

    @classmethod
    def parse(cls, name: str | "Activation") -> "Activation":
        if isinstance(name, Activation):
            return name
        return cls[name.strip().upper()]


# Code written to weight files for the softmax head.
SOFTMAX_CODE = 255


def activate(kind: Activation, g: np.ndarray) -> np.ndarray:
    if kind is Activation.LINEAR:
        return g.copy()
    if kind is Activation.RELU:
        return np.maximum(g, 0.0)
    if kind is Activation.TANH:
        return np.tanh(g)
    if kind is Activation.SIGMOID:
        # split by sign so exp never overflows
        out = np.empty_like(g)
        pos = g >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-g[pos]))
        e = np.exp(g[~pos])
        out[~pos] = e / (1.0 + e)
        return out
    raise ValueError(f"unknown activation {kind!r}")


def activation_derivative(kind: Activation, g: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Derivative of the activation at ``g`` given ``f = activation(g)``.

    The ReLU subgradient at 0 is taken to be 0.
    """
    if kind is Activation.LINEAR:
        return np.ones_like(g)
    if kind is Activation.RELU:
        return (g > 0).astype(g.dtype)
    if kind is Activation.TANH:
        return 1.0 - f * f
    if kind is Activation.SIGMOID:
        return f * (1.0 - f)
    raise ValueError(f"unknown activation {kind!r}")


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-subtracted softmax; safe for logits of any finite magnitude."""
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


@dataclass(frozen=True)
class LayerSpec:
    fan_in: int
    fan_out: int
    activation: Activation

    def __post_init__(self):
        if self.fan_in < 1 or self.fan_out < 1:
            raise ValueError(f"layer dimensions must be >= 1, got {self.fan_in}x{self.fan_out}")


@dataclass
class Dense:
    weights: np.ndarray
    biases: np.ndarray
    activation: Activation | None  # None marks the softmax head

    @property
    def fan_in(self) -> int:
        return self.weights.shape[0]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[1]


@dataclass
class Mlp:
    """Hidden layers followed by a softmax output layer (``layers[-1]``)."""

    layers: list[Dense]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("an Mlp needs at least the output layer")
        for i, layer in enumerate(self.layers):
            if layer.weights.ndim != 2 or layer.biases.shape != (layer.fan_out,):
                raise ValueError(
                    f"layer {i}: weights {layer.weights.shape} and biases "
                    f"{layer.biases.shape} are inconsistent")
            if i + 1 < len(self.layers) and layer.activation is None:
                raise ValueError(f"hidden layer {i} has no activation")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.fan_out != b.fan_in:
                raise ValueError(
                    f"layer {i} fan_out={a.fan_out} does not chain into "
                    f"layer {i + 1} fan_in={b.fan_in}")
        self.layers[-1].activation = None

    @classmethod
    def from_sizes(cls, sizes: Sequence[int], activation: Activation | str) -> "Mlp":
        """Zero-initialised network, e.g. ``Mlp.from_sizes([1024, 8, 6, 2], "relu")``."""
        act = Activation.parse(activation)
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        layers = []
        for i, (a, b) in enumerate(zip(sizes, sizes[1:])):
            LayerSpec(a, b, act)
            is_head = i == len(sizes) - 2
            layers.append(Dense(np.zeros((a, b)), np.zeros(b), None if is_head else act))
        return cls(layers)

    @property
    def sizes(self) -> list[int]:
        return [self.layers[0].fan_in] + [layer.fan_out for layer in self.layers]

    @property
    def specs(self) -> list[LayerSpec]:
        return [LayerSpec(l.fan_in, l.fan_out, l.activation if l.activation is not None
                          else Activation.LINEAR) for l in self.layers]

    @property
    def hidden_activation(self) -> Activation | None:
        return self.layers[0].activation if len(self.layers) > 1 else None

    def copy(self) -> "Mlp":
        return Mlp([Dense(l.weights.copy(), l.biases.copy(), l.activation) for l in self.layers])

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend([layer.weights, layer.biases])
        return out

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


@dataclass
class ForwardTrace:
    inputs: np.ndarray
    pre: list[np.ndarray]  # g_i per layer, last entry holds the output logits
    post: list[np.ndarray]  # f_i per layer, last entry holds softmax outputs

    @property
    def outputs(self) -> np.ndarray:
        return self.post[-1]


def forward(mlp: Mlp, inputs: np.ndarray) -> ForwardTrace:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != mlp.layers[0].fan_in:
        raise ValueError(
            f"input shape {np.shape(inputs)} does not match first layer fan_in="
            f"{mlp.layers[0].fan_in}")
    pre, post = [], []
    f = x
    for layer in mlp.layers:
        g = f @ layer.weights + layer.biases
        f = softmax(g) if layer.activation is None else activate(layer.activation, g)
        pre.append(g)
        post.append(f)
    return ForwardTrace(x, pre, post)


def predict(mlp: Mlp, inputs: np.ndarray, batch_size: int = 4096) -> np.ndarray:
    """Class probabilities for ``inputs``, evaluated in batches."""
    inputs = np.asarray(inputs, dtype=np.float64)
    chunks = [forward(mlp, inputs[i:i + batch_size]).outputs
              for i in range(0, len(inputs), batch_size)]
    return np.concatenate(chunks, axis=0)


def _check_labels(labels, n_rows: int, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (n_rows,):
        raise ValueError(f"expected {n_rows} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    return labels.astype(np.int64)


def cross_entropy(outputs: np.ndarray, labels) -> float:
    """Mean negative log-likelihood of the true class, in nats.

    A zero predicted probability for the true class is clamped at 1e-300 and a
    ``RuntimeWarning`` is issued.
    """
    outputs = np.atleast_2d(np.asarray(outputs, dtype=np.float64))
    labels = _check_labels(labels, outputs.shape[0], outputs.shape[1])
    p = outputs[np.arange(len(labels)), labels]
    if np.any(p < LOG_FLOOR):
        warnings.warn("true-class probability below 1e-300 clamped in cross_entropy",
                      RuntimeWarning, stacklevel=2)
        p = np.maximum(p, LOG_FLOOR)
    return float(-np.mean(np.log(p)))


def one_hot(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def flat(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out


def backward(mlp: Mlp, trace: ForwardTrace, labels) -> Gradients:
    """Batch-mean gradients of the cross-entropy loss.

    The output-layer error is ``f_Y - onehot(y)``; each earlier layer receives
    ``(delta @ W_next.T) * sigma'(g)`` and its weight gradient is
    ``f_prev.T @ delta / batch``.
    """
    if len(trace.pre) != len(mlp.layers):
        raise ValueError("trace was not produced by this network")
    n = trace.inputs.shape[0]
    y = one_hot(_check_labels(labels, n, mlp.layers[-1].fan_out), mlp.layers[-1].fan_out)
    delta = (trace.outputs - y) / n
    grads_w: list[np.ndarray] = [None] * len(mlp.layers)  # type: ignore[list-item]
    grads_b: list[np.ndarray] = [None] * len(mlp.layers)  # type: ignore[list-item]
    for i in range(len(mlp.layers) - 1, -1, -1):
        prev = trace.inputs if i == 0 else trace.post[i - 1]
        grads_w[i] = prev.T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            below = mlp.layers[i - 1]
            delta = (delta @ mlp.layers[i].weights.T) * activation_derivative(
                below.activation, trace.pre[i - 1], trace.post[i - 1])
    return Gradients(grads_w, grads_b)


# -- initialisation ---------------------------------------------------------

@dataclass(frozen=True)
class InitScheme:
    kind: str  # "uniform" or "truncated_normal"
    scale: float  # half-width for uniform, sigma for truncated normal

    def __post_init__(self):
        if self.kind not in ("uniform", "truncated_normal"):
            raise ValueError(f"unknown init scheme {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("init scale must be positive")

    @classmethod
    def uniform(cls, a: float = 0.1) -> "InitScheme":
        return cls("uniform", a)

    @classmethod
    def truncated_normal(cls, sigma: float = 0.1) -> "InitScheme":
        return cls("truncated_normal", sigma)


def _truncated_normal(rng: np.random.Generator, sigma: float, shape) -> np.ndarray:
    out = rng.normal(0.0, sigma, size=shape)
    bad = np.abs(out) > 2 * sigma
    while np.any(bad):
        out[bad] = rng.normal(0.0, sigma, size=int(bad.sum()))
        bad = np.abs(out) > 2 * sigma
    return out


def init_weights(mlp: Mlp, scheme: InitScheme, seed: int) -> Mlp:
    """Draw every weight i.i.d. from ``scheme`` and zero the biases, in place."""
    rng = np.random.default_rng(seed)
    for layer in mlp.layers:
        shape = layer.weights.shape
        if scheme.kind == "uniform":
            layer.weights[...] = rng.uniform(-scheme.scale, scheme.scale, size=shape)
        else:
            layer.weights[...] = _truncated_normal(rng, scheme.scale, shape)
        layer.biases[...] = 0.0
    return mlp


# -- optimisation -----------------------------------------------------------

class SGD:
    def __init__(self, params: list[np.ndarray], learning_rate: float):
        self.params = params
        self.learning_rate = learning_rate

    def step(self, grads: list[np.ndarray]) -> None:
        for p, g in zip(self.params, grads):
            p -= self.learning_rate * g


class Adam:
    def __init__(self, params: list[np.ndarray], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 0.01
    epochs: int = 1000
    batch_size: int = 0  # 0 means full batch
    # epochs=0 is allowed and means "no updates"
    init: InitScheme = field(default_factory=InitScheme.uniform)
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 0:
            raise ValueError("batch_size must be >= 0")

    def replace(self, **changes) -> "TrainConfig":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True)
class EpochReport:
    epoch: int
    loss: float
    train_error: float


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, layer: int):
        super().__init__(f"non-finite values at epoch {epoch}, first in layer {layer}")
        self.epoch = epoch
        self.layer = layer


def evaluate(mlp: Mlp, inputs: np.ndarray, labels) -> tuple[float, float]:
    """Full-dataset ``(loss, error_rate)``."""
    probs = predict(mlp, inputs)
    labels = np.asarray(labels)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        loss = cross_entropy(probs, labels)
    error = float(np.mean(np.argmax(probs, axis=1) != labels))
    return loss, error


def _first_bad_layer(trace: ForwardTrace) -> int | None:
    for i, f in enumerate(trace.post):
        if not np.all(np.isfinite(f)):
            return i
    return None


def train(mlp: Mlp, inputs: np.ndarray, labels, config: TrainConfig,
          callback: Callable[[int, Mlp, EpochReport], bool | None] | None = None,
          ) -> list[EpochReport]:
    """Train ``mlp`` in place and return one report per epoch.

    Loss and error in each report are measured on the full training set after
    that epoch's updates.  ``callback(epoch, mlp, report)`` runs after every
    epoch; returning ``True`` stops training early.
    """
    x = np.asarray(inputs, dtype=np.float64)
    y = _check_labels(labels, x.shape[0], mlp.layers[-1].fan_out)
    if x.shape[0] == 0:
        raise ValueError("empty dataset")
    params = mlp.parameters()
    opt = (Adam if config.optimizer == "adam" else SGD)(params, config.learning_rate)
    shuffle_rng = np.random.default_rng([config.seed, 1])
    batch = config.batch_size or x.shape[0]
    reports = []
    for epoch in range(1, config.epochs + 1):
        order = np.arange(x.shape[0]) if batch >= x.shape[0] else shuffle_rng.permutation(x.shape[0])
        for start in range(0, x.shape[0], batch):
            idx = order[start:start + batch]
            trace = forward(mlp, x[idx])
            bad = _first_bad_layer(trace)
            if bad is not None:
                raise TrainingDiverged(epoch, bad)
            opt.step(backward(mlp, trace, y[idx]).flat())
        loss, error = evaluate(mlp, x, y)
        if not np.isfinite(loss):
            bad = _first_bad_layer(forward(mlp, x))
            raise TrainingDiverged(epoch, -1 if bad is None else bad)
        report = EpochReport(epoch, loss, error)
        reports.append(report)
        if callback is not None and callback(epoch, mlp, report):
            break
    return reports


# -- gradient check ---------------------------------------------------------

GRAD_FLOOR = 1e-5


def grad_check(mlp: Mlp, inputs: np.ndarray, labels, epsilon: float = 1e-5,
               skip_kinks: bool = True) -> float:
    """Largest relative error between ``backward`` and central differences.

    Relative error per parameter is ``|a - n| / max(|a|, |n|, GRAD_FLOOR)``.  The
    floor sits near the round-off noise of a central difference at
    ``epsilon = 1e-5``, below which relative error is meaningless.  With
    ``skip_kinks``, parameters whose ``±epsilon`` perturbation flips the sign
    of any ReLU pre-activation are excluded, since the loss is not
    differentiable there.
    """
    x = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels)
    trace = forward(mlp, x)
    analytic = backward(mlp, trace, labels).flat()
    base_masks = [g > 0 for g in trace.pre]

    def loss_and_masks():
        t = forward(mlp, x)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return cross_entropy(t.outputs, labels), [g > 0 for g in t.pre]

    relu_layers = [i for i, l in enumerate(mlp.layers) if l.activation is Activation.RELU]
    worst = 0.0
    for p, a in zip(mlp.parameters(), analytic):
        flat_p, flat_a = p.reshape(-1), a.reshape(-1)
        for k in range(flat_p.size):
            orig = flat_p[k]
            flat_p[k] = orig + epsilon
            up, m_up = loss_and_masks()
            flat_p[k] = orig - epsilon
            down, m_down = loss_and_masks()
            flat_p[k] = orig
            if skip_kinks and any(
                    not (np.array_equal(m_up[i], base_masks[i])
                         and np.array_equal(m_down[i], base_masks[i]))
                    for i in relu_layers):
                continue
            numeric = (up - down) / (2 * epsilon)
            denom = max(abs(flat_a[k]), abs(numeric), GRAD_FLOOR)
            worst = max(worst, abs(flat_a[k] - numeric) / denom)
    return worst


# -- weight snapshots -------------------------------------------------------

WEIGHT_MAGIC = b"MLPW"
WEIGHT_VERSION = 1


def save_weights(mlp: Mlp, path: str | Path) -> None:
    """Write ``mlp`` as a flat little-endian binary snapshot."""
    parts = [WEIGHT_MAGIC, struct.pack("<II", WEIGHT_VERSION, len(mlp.layers))]
    for layer in mlp.layers:
        code = SOFTMAX_CODE if layer.activation is None else int(layer.activation)
        parts.append(struct.pack("<IIB", layer.fan_in, layer.fan_out, code))
    for layer in mlp.layers:
        parts.append(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(layer.biases, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_weights(path: str | Path) -> Mlp:
    data = Path(path).read_bytes()
    if data[:4] != WEIGHT_MAGIC:
        raise ValueError(f"{path}: not an MLPW weight file")
    version, count = struct.unpack_from("<II", data, 4)
    if version != WEIGHT_VERSION:
        raise ValueError(f"{path}: unsupported weight file version {version}")
    offset = 12
    shapes = []
    for _ in range(count):
        fan_in, fan_out, code = struct.unpack_from("<IIB", data, offset)
        offset += 9
        shapes.append((fan_in, fan_out, None if code == SOFTMAX_CODE else Activation(code)))
    layers = []
    for fan_in, fan_out, act in shapes:
        nw, nb = fan_in * fan_out * 8, fan_out * 8
        if offset + nw + nb > len(data):
            raise ValueError(f"{path}: truncated weight payload")
        w = np.frombuffer(data, dtype="<f8", count=fan_in * fan_out, offset=offset)
        b = np.frombuffer(data, dtype="<f8", count=fan_out, offset=offset + nw)
        offset += nw + nb
        layers.append(Dense(w.reshape(fan_in, fan_out).astype(np.float64),
                            b.astype(np.float64), act))
    if offset != len(data):
        raise ValueError(f"{path}: trailing bytes after weight payload")
    return Mlp(layers)
