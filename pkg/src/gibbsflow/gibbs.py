"""Per-layer Gibbs probability tables and the information quantities built on them.

For a layer with activations ``f(x)`` over ``N`` neurons, the probability that
input ``x`` selects neuron ``n`` is ``softmax(f(x))[n]``.  Stacking these rows
over a dataset gives a ``J x N`` table from which the layer entropy and its
mutual information with the input and with the label follow directly, with
``P(X = x^j) = 1/J``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, fields

import numpy as np

from .nn import Mlp, forward, softmax

LOG_FLOOR = 1e-300


def layer_conditional(activations: np.ndarray) -> np.ndarray:
    """Softmax over the last axis; one row per input."""
    a = np.asarray(activations, dtype=np.float64)
    if a.shape[-1] == 0:
        raise ValueError("a layer needs at least one neuron")
    if not np.all(np.isfinite(a)):
        raise ValueError("activations must be finite")
    return softmax(a, axis=-1)


@dataclass
class LayerGibbs:
    conditional: np.ndarray  # J x N, row j is P(F = n | x^j)
    layer_index: int = 0

    def __post_init__(self):
        self.conditional = np.atleast_2d(np.asarray(self.conditional, dtype=np.float64))
        if self.conditional.shape[0] < 1:
            raise ValueError("table has no rows")
        if np.any(self.conditional < 0) or not np.allclose(
                self.conditional.sum(axis=1), 1.0, rtol=0, atol=1e-9):
            raise ValueError(f"layer {self.layer_index}: rows are not probability vectors")

    @classmethod
    def from_activations(cls, activations: np.ndarray, layer_index: int = 0) -> "LayerGibbs":
        return cls(layer_conditional(np.atleast_2d(activations)), layer_index)

    @property
    def neuron_count(self) -> int:
        return self.conditional.shape[1]

    @property
    def num_samples(self) -> int:
        return self.conditional.shape[0]


def _plogp(p: np.ndarray) -> np.ndarray:
    return np.where(p > 0, p * np.log2(np.maximum(p, LOG_FLOOR)), 0.0)


def _row_entropies(table: np.ndarray) -> np.ndarray:
    return -np.sum(_plogp(table), axis=-1)


def entropy(p) -> float:
    """Shannon entropy in bits, with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("entropy expects a non-empty probability vector")
    if np.any(p < 0):
        raise ValueError("probabilities must be non-negative")
    if abs(p.sum() - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {p.sum()}, not 1")
    return max(float(-np.sum(_plogp(p))), 0.0) + 0.0


def marginal(layer: LayerGibbs) -> np.ndarray:
    return layer.conditional.mean(axis=0)


def label_conditional(layer: LayerGibbs, labels, label: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (layer.num_samples,):
        raise ValueError(f"{labels.shape} labels for a {layer.num_samples}-row table")
    rows = labels == label
    if not np.any(rows):
        raise ValueError(f"no samples carry label {label}")
    return layer.conditional[rows].mean(axis=0)


def conditional_entropy_given_x(layer: LayerGibbs) -> float:
    return float(np.mean(_row_entropies(layer.conditional)))


def conditional_entropy_given_y(layer: LayerGibbs, labels) -> float:
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    weights = counts / labels.size
    return float(sum(w * entropy(label_conditional(layer, labels, c))
                     for c, w in zip(classes, weights)))


def mi_x(layer: LayerGibbs) -> float:
    """``I(X, F) = H(F) - H(F|X)`` in bits."""
    return max(entropy(marginal(layer)) - conditional_entropy_given_x(layer), 0.0)


def mi_y(layer: LayerGibbs, labels) -> float:
    """``I(Y, F) = H(F) - H(F|Y)`` in bits."""
    return max(entropy(marginal(layer)) - conditional_entropy_given_y(layer, labels), 0.0)


def mi_xbar(i_x: float, i_y: float) -> float:
    """Information about the input that is not about the label; left unclamped."""
    if not (np.isfinite(i_x) and np.isfinite(i_y)):
        raise ValueError("both terms must be finite")
    return i_x - i_y


@dataclass(frozen=True)
class MiSummary:
    layer: int
    H_F: float
    H_F_given_X: float
    H_F_given_Y: float
    I_X: float
    I_Y: float
    I_Xbar: float


def summarize(layer: LayerGibbs, labels) -> MiSummary:
    h = entropy(marginal(layer))
    hx = conditional_entropy_given_x(layer)
    hy = conditional_entropy_given_y(layer, labels)
    # Jensen guarantees h >= hx, hy; clamp only round-off
    hx, hy = min(hx, h), min(hy, h)
    i_x, i_y = h - hx, h - hy
    return MiSummary(layer.layer_index, h, hx, hy, i_x, i_y, mi_xbar(i_x, i_y))


def layer_tables(mlp: Mlp, inputs: np.ndarray, batch_size: int = 4096) -> list[LayerGibbs]:
    """One table per layer, output layer last (its rows are the softmax outputs)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    per_layer: list[list[np.ndarray]] = [[] for _ in mlp.layers]
    for start in range(0, len(inputs), batch_size):
        trace = forward(mlp, inputs[start:start + batch_size])
        for i, f in enumerate(trace.post):
            per_layer[i].append(f)
    tables = []
    for i, chunks in enumerate(per_layer):
        f = np.concatenate(chunks, axis=0)
        # the head already holds softmax(g_Y); re-normalising keeps it unchanged up to round-off
        cond = f / f.sum(axis=1, keepdims=True) if i == len(mlp.layers) - 1 \
            else layer_conditional(f)
        tables.append(LayerGibbs(cond, i + 1))
    return tables


def flow_summary(mlp: Mlp, inputs: np.ndarray, labels) -> list[MiSummary]:
    """``MiSummary`` for every layer; layer ``k`` is the k-th layer after the input."""
    return [summarize(t, labels) for t in layer_tables(mlp, inputs)]


def marginal_chain_check(mlp: Mlp, x: np.ndarray) -> float:
    """Largest gap between the chained layer marginals and the direct output.

    Each neuron of a layer is connected to every neuron of the layer above, so
    ``P(F_{i+1} = k | F_i = t)`` does not depend on ``t``.  Summing the chain
    ``P(F_Y|F_2) P(F_2|F_1) P(F_1|x)`` explicitly must reproduce the softmax
    output exactly.
    """
    if len(mlp.layers) != 3:
        raise ValueError("the chain check expects two hidden layers and an output layer")
    trace = forward(mlp, np.atleast_2d(x))
    worst = 0.0
    for row in range(trace.inputs.shape[0]):
        p1 = layer_conditional(trace.post[0][row])
        p2 = layer_conditional(trace.post[1][row])
        py = trace.post[2][row]
        n1, n2 = p1.size, p2.size
        p2_given_1 = np.tile(p2[:, None], (1, n1))  # [k, t]
        py_given_2 = np.tile(py[:, None], (1, n2))  # [l, k]
        chained = np.zeros(py.size)
        for l in range(py.size):
            total = 0.0
            for k in range(n2):
                inner = 0.0
                for t in range(n1):
                    inner += p2_given_1[k, t] * p1[t]
                total += py_given_2[l, k] * inner
            chained[l] = total
        worst = max(worst, float(np.max(np.abs(chained - py))))
    return worst


def label_determinism_check(inputs: np.ndarray, labels) -> float:
    """``H(Y|X)`` in bits, grouping identical input rows."""
    inputs = np.asarray(inputs)
    labels = np.asarray(labels)
    _, group = np.unique(inputs.reshape(len(inputs), -1), axis=0, return_inverse=True)
    group = group.reshape(-1)
    total = 0.0
    for g in np.unique(group):
        members = labels[group == g]
        _, counts = np.unique(members, return_counts=True)
        total += members.size / labels.size * entropy(counts / members.size)
    return total


def summaries_to_csv(summaries: list[MiSummary]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f.name for f in fields(MiSummary)])
    for s in summaries:
        writer.writerow([s.layer] + [repr(float(v)) for v in astuple(s)[1:]])
    return buf.getvalue()
