"""Reference mutual-information estimators: activation binning and Gaussian KDE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .nn import Activation

LOG2E = np.log2(np.e)


@dataclass(frozen=True)
class BinningConfig:
    num_bins: int = 30
    # None means per-layer min/max; otherwise a fixed (lo, hi) range
    value_range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.num_bins < 2:
            raise ValueError("num_bins must be >= 2")
        if self.value_range is not None and not self.value_range[1] >= self.value_range[0]:
            raise ValueError(f"bad binning range {self.value_range}")

    @classmethod
    def for_activation(cls, activation: Activation | None, activations: np.ndarray,
                       num_bins: int = 30) -> "BinningConfig":
        """Fixed [-1, 1] for Tanh, [0, max] for ReLU, per-layer min/max otherwise."""
        if activation is Activation.TANH:
            return cls(num_bins, (-1.0, 1.0))
        if activation is Activation.RELU:
            return cls(num_bins, (0.0, float(np.max(activations))))
        return cls(num_bins, None)


@dataclass(frozen=True)
class KdeConfig:
    noise_variance: float = 0.1

    def __post_init__(self):
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be > 0")


@dataclass(frozen=True)
class BaselineMi:
    H_T: float
    I_X: float
    I_Y: float


def _discrete_entropy(states: np.ndarray) -> float:
    _, counts = np.unique(states, axis=0, return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log2(p)))


def quantize(activations: np.ndarray, config: BinningConfig) -> np.ndarray:
    """Bin index in ``[0, num_bins)`` for every activation."""
    a = np.asarray(activations, dtype=np.float64)
    lo, hi = config.value_range if config.value_range is not None else (a.min(), a.max())
    if hi <= lo:
        return np.zeros(a.shape, dtype=np.int64)
    edges = np.linspace(lo, hi, config.num_bins + 1)
    return np.clip(np.digitize(a, edges[1:-1]), 0, config.num_bins - 1)


def binned_mi(activations: np.ndarray, labels, config: BinningConfig = BinningConfig()
              ) -> BaselineMi:
    """Treat each sample's vector of bin indices as one discrete state."""
    a = np.atleast_2d(np.asarray(activations, dtype=np.float64))
    labels = np.asarray(labels)
    if a.shape[0] < 1 or labels.shape != (a.shape[0],):
        raise ValueError("need one label per activation row")
    states = quantize(a, config)
    h = _discrete_entropy(states)
    h_given_y = 0.0
    for c in np.unique(labels):
        rows = labels == c
        h_given_y += rows.mean() * _discrete_entropy(states[rows])
    return BaselineMi(h, h, max(h - h_given_y, 0.0))


def _pairwise_sq_dists(a: np.ndarray) -> np.ndarray:
    sq = np.sum(a * a, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * a @ a.T
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def _kde_excess(sq_dists: np.ndarray, variance: float) -> float:
    """``-(1/J) sum_i log2 (1/J) sum_j exp(-d_ij / 2 var)``.

    This is the mixture-entropy upper bound minus the entropy of a single
    Gaussian kernel, i.e. the bound on ``H(T) - H(T|X)``.
    """
    n = sq_dists.shape[0]
    lse = logsumexp(-sq_dists / (2.0 * variance), axis=1) - np.log(n)
    return float(-np.mean(lse) * LOG2E)


def kde_mi(activations: np.ndarray, labels, config: KdeConfig = KdeConfig()) -> BaselineMi:
    """Pairwise-distance upper bound on the mutual information of a noisy layer.

    The layer is modelled as ``T = h(X) + N(0, var I)``.  ``H_T`` is the
    mixture-entropy bound; ``I_X`` subtracts the kernel entropy and ``I_Y``
    repeats the bound inside every class.
    """
    a = np.atleast_2d(np.asarray(activations, dtype=np.float64))
    labels = np.asarray(labels)
    if a.shape[0] < 2 or labels.shape != (a.shape[0],):
        raise ValueError("need at least two rows and one label per row")
    var = config.noise_variance
    n_dim = a.shape[1]
    kernel_bits = 0.5 * n_dim * np.log2(2 * np.pi * np.e * var)
    d = _pairwise_sq_dists(a)
    i_x = _kde_excess(d, var)
    within = 0.0
    for c in np.unique(labels):
        rows = np.flatnonzero(labels == c)
        within += rows.size / labels.size * _kde_excess(d[np.ix_(rows, rows)], var)
    return BaselineMi(kernel_bits + i_x, i_x, max(i_x - within, 0.0))
