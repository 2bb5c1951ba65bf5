"""Diagnostics for whether layer activations behave like i.i.d. samples."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def sample_correlation(a, b) -> float:
    """Pearson correlation between two equal-length vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("need two 1-D vectors of equal length >= 2")
    da, db = a - a.mean(), b - b.mean()
    na, nb = np.sqrt(da @ da), np.sqrt(db @ db)
    if na == 0 or nb == 0:
        raise ValueError("correlation is undefined for a constant vector")
    return float(np.clip((da @ db) / (na * nb), -1.0, 1.0))


def _standardize_rows(activations: np.ndarray) -> np.ndarray:
    a = np.asarray(activations, dtype=np.float64)
    centered = a - a.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1, keepdims=True)
    bad = np.flatnonzero(norms[:, 0] == 0)
    if bad.size:
        raise ValueError(f"rows {bad[:5].tolist()} are constant; correlation undefined")
    return centered / norms


def correlation_matrix(activations: np.ndarray, labels=None, max_samples: int = 5000,
                       absolute: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """``J x J`` sample correlations between activation vectors.

    Rows are reordered so that equal labels are contiguous; the permutation is
    returned alongside the matrix.
    """
    a = np.atleast_2d(activations)
    if a.shape[0] < 2:
        raise ValueError("need at least two samples")
    if a.shape[0] > max_samples:
        raise ValueError(f"{a.shape[0]} samples exceeds the cap of {max_samples}")
    order = np.arange(a.shape[0]) if labels is None else np.argsort(labels, kind="stable")
    z = _standardize_rows(a[order])
    r = np.clip(z @ z.T, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return (np.abs(r) if absolute else r), order


@dataclass(frozen=True)
class AvgCorrelation:
    r_same: float
    r_diff: float


def avg_correlations(activations: np.ndarray, labels) -> AvgCorrelation:
    """Mean signed correlation over same-label and cross-label sample pairs.

    Uses ``sum_{j != j'} z_j . z_j' = |sum_j z_j|^2 - J`` on unit-norm centred
    rows, so no ``J x J`` matrix is formed.
    """
    labels = np.asarray(labels)
    z = _standardize_rows(np.atleast_2d(activations))
    if labels.shape != (z.shape[0],):
        raise ValueError("need one label per row")
    classes, counts = np.unique(labels, return_counts=True)
    same_pairs = float(np.sum(counts * (counts - 1)))
    diff_pairs = float(labels.size ** 2 - np.sum(counts ** 2))
    if same_pairs == 0:
        raise ValueError("no same-label pairs: r_same undefined")
    if diff_pairs == 0:
        raise ValueError("no cross-label pairs: r_diff undefined")
    total_sum = z.sum(axis=0)
    total = total_sum @ total_sum - z.shape[0]
    same = 0.0
    for c in classes:
        s = z[labels == c].sum(axis=0)
        same += s @ s - np.count_nonzero(labels == c)
    return AvgCorrelation(float(same / same_pairs), float((total - same) / diff_pairs))


@dataclass
class WeightConditionReport:
    gram_abs: np.ndarray
    mean_offdiag: float
    id_samples: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    fitted_slope: float | None = None
    expected_slope: float | None = None

    def write_csv(self, prefix: str | Path) -> list[Path]:
        prefix = Path(prefix)
        gram_path = prefix.with_name(prefix.name + "-gram.csv")
        pairs_path = prefix.with_name(prefix.name + "-pairs.csv")
        with open(gram_path, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(
                [[repr(float(v)) for v in row] for row in self.gram_abs])
        with open(pairs_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["weight_sum_diff", "bias_diff"])
            w.writerows([[repr(float(x)), repr(float(y))] for x, y in self.id_samples])
        return [gram_path, pairs_path]


def independence_condition(weights: np.ndarray) -> tuple[np.ndarray, float]:
    """``|W^T W|`` over neuron weight columns and its mean over pairs ``k < k'``."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] < 2:
        raise ValueError("need a weight matrix with at least two columns")
    gram = np.abs(w.T @ w)
    iu = np.triu_indices(w.shape[1], k=1)
    return gram, float(gram[iu].mean())


def identical_condition(weights: np.ndarray, biases: np.ndarray, mean_prev_activation: float
                        ) -> tuple[float | None, float, np.ndarray]:
    """Regress bias differences on summed weight differences over neuron pairs.

    Returns ``(fitted_slope, expected_slope, samples)`` where each sample row is
    ``(sum_n (w_nk - w_nk'), b_k - b_k')``.  The fit is through the origin since
    both coordinates flip sign together under ``k <-> k'``.  The slope is
    ``None`` when every abscissa is zero.
    """
    w = np.asarray(weights, dtype=np.float64)
    b = np.asarray(biases, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] < 2 or b.shape != (w.shape[1],):
        raise ValueError("need K >= 2 weight columns and K biases")
    col_sums = w.sum(axis=0)
    k, kp = np.triu_indices(w.shape[1], k=1)
    x = col_sums[k] - col_sums[kp]
    y = b[k] - b[kp]
    denom = x @ x
    slope = None if denom == 0 else float((x @ y) / denom)
    return slope, -float(mean_prev_activation), np.column_stack([x, y])


def weight_conditions(weights: np.ndarray, biases: np.ndarray, mean_prev_activation: float
                      ) -> WeightConditionReport:
    gram, r_f = independence_condition(weights)
    slope, expected, samples = identical_condition(weights, biases, mean_prev_activation)
    return WeightConditionReport(gram, r_f, samples, slope, expected)


def write_pgm(path: str | Path, matrix: np.ndarray, vmin: float = 0.0, vmax: float = 1.0) -> None:
    """Binary 8-bit PGM heatmap; values are mapped linearly from [vmin, vmax]."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("heatmap needs a 2-D matrix")
    scale = (vmax - vmin) or 1.0
    pixels = np.clip(np.rint((m - vmin) / scale * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{m.shape[1]} {m.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + pixels.tobytes())


_PGM_HEADER = re.compile(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s")


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    # a single whitespace byte ends the header; pixels may themselves be whitespace bytes
    m = _PGM_HEADER.match(data)
    if m is None or int(m.group(3)) != 255:
        raise ValueError(f"{path}: not an 8-bit binary PGM")
    width, height = int(m.group(1)), int(m.group(2))
    return np.frombuffer(data, dtype=np.uint8, count=width * height,
                         offset=m.end()).reshape(height, width)
