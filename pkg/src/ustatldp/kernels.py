"""Degree-2 U-statistic kernels and exact (non-private) estimators.

A degree-2 U-statistic of a sample x_1..x_n under a symmetric kernel f is

    U = 2/(n(n-1)) * sum_{i<j} f(x_i, x_j).

Kernels are available both as closures over domain points (``eval_kernel``)
and as explicit matrices on discrete/binned domains; the matrix form is what
the privacy protocols consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

# Row block size for pairwise kernel evaluation, bounds peak memory at
# roughly _BLOCK * n floats.
_BLOCK = 4096


class TooFewPoints(ValueError):
    """Raised when a statistic needs at least two points (or one per class)."""


@dataclass(frozen=True)
class Sample:
    """An ordered collection of user inputs.

    kind is one of "scalar" (values shape (n,)), "pair" (shape (n, 2),
    columns y and z), or "scored" (shape (n, 2), columns score and label
    with labels in {-1, +1}).
    """

    kind: str
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def scores(self) -> np.ndarray:
        if self.kind != "scored":
            raise ValueError("scores only defined for scored samples")
        return self.values[:, 0]

    @property
    def labels(self) -> np.ndarray:
        if self.kind != "scored":
            raise ValueError("labels only defined for scored samples")
        return self.values[:, 1]

    @property
    def pos_scores(self) -> np.ndarray:
        return self.scores[self.labels > 0]

    @property
    def neg_scores(self) -> np.ndarray:
        return self.scores[self.labels < 0]


def scalar_sample(xs: Sequence[float]) -> Sample:
    return Sample("scalar", np.asarray(xs, dtype=float))


def pair_sample(ys: Sequence[float], zs: Sequence[float]) -> Sample:
    ys = np.asarray(ys, dtype=float)
    zs = np.asarray(zs, dtype=float)
    if ys.shape != zs.shape:
        raise ValueError("y and z columns must have equal length")
    return Sample("pair", np.column_stack([ys, zs]))


def scored_sample(scores: Sequence[float], labels: Sequence[int]) -> Sample:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if scores.shape != labels.shape:
        raise ValueError("score and label columns must have equal length")
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    return Sample("scored", np.column_stack([scores, labels]))


@dataclass(frozen=True)
class Kernel:
    """A symmetric degree-2 kernel.

    pair_fn evaluates the kernel on two blocks of domain points (vectorized,
    broadcasting a column block against a row block). matrix, when present,
    is the kernel tabulated on a discrete domain of 1-based bins and is the
    canonical form consumed by the privacy protocols.
    """

    name: str
    value_range: tuple[float, float]
    pair_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    matrix: Optional[np.ndarray] = None


def gini_kernel() -> Kernel:
    return Kernel("gini", (0.0, 1.0), lambda a, b: np.abs(a[:, None] - b[None, :]))


def collision_kernel() -> Kernel:
    return Kernel(
        "collision", (0.0, 1.0), lambda a, b: (a[:, None] == b[None, :]).astype(float)
    )


def kendall_kernel() -> Kernel:
    """Concordance sign kernel on (y, z) pairs; ties contribute 0."""

    def pair_fn(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        sy = np.sign(a[:, 0][:, None] - b[:, 0][None, :])
        sz = np.sign(a[:, 1][:, None] - b[:, 1][None, :])
        return sy * sz

    return Kernel("kendall", (-1.0, 1.0), pair_fn)


def auc_indicator_kernel() -> Kernel:
    """Symmetric kernel counting correctly ordered (score, label) pairs.

    f((s,y),(s',y')) = 1[s > s', y > y'] + 1[s < s', y < y']; summed over all
    unordered pairs this is the Mann-Whitney count of positives scored
    strictly above negatives (ties contribute 0).
    """

    def pair_fn(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        s, y = a[:, 0][:, None], a[:, 1][:, None]
        t, w = b[:, 0][None, :], b[:, 1][None, :]
        return ((s > t) & (y > w)).astype(float) + ((s < t) & (y < w)).astype(float)

    return Kernel("auc", (0.0, 1.0), pair_fn)


def matrix_kernel(matrix: np.ndarray, name: str = "matrix") -> Kernel:
    """Kernel tabulated on bins 1..k; matrix[i-1, j-1] = f(bin i, bin j)."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("kernel matrix must be square")

    def pair_fn(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return matrix[a.astype(int)[:, None] - 1, b.astype(int)[None, :] - 1]

    return Kernel(
        name, (float(matrix.min()), float(matrix.max())), pair_fn, matrix
    )


def gini_matrix(centers: Sequence[float]) -> np.ndarray:
    """|c_i - c_j| on the given bin centers (kernel evaluated exactly on bins)."""
    c = np.asarray(centers, dtype=float)
    return np.abs(c[:, None] - c[None, :])


def collision_matrix(k: int) -> np.ndarray:
    return np.eye(k)


def kendall_grid_matrix(y_values: Sequence[float], z_values: Sequence[float]) -> np.ndarray:
    """Kendall kernel on the flattened ky*kz grid; cell index = iy*kz + iz."""
    y = np.asarray(y_values, dtype=float)
    z = np.asarray(z_values, dtype=float)
    yy, zz = np.meshgrid(y, z, indexing="ij")
    fy, fz = yy.ravel(), zz.ravel()
    return np.sign(fy[:, None] - fy[None, :]) * np.sign(fz[:, None] - fz[None, :])


def grid_cell_index(y_bin: np.ndarray, z_bin: np.ndarray, kz: int) -> np.ndarray:
    """1-based flat cell index for 1-based (y_bin, z_bin) on a grid with kz columns."""
    return (np.asarray(y_bin) - 1) * kz + np.asarray(z_bin)


def _points(sample: Sample) -> np.ndarray:
    return sample.values


def eval_kernel(kernel: Kernel, a, b) -> float:
    """Evaluate the kernel on two individual domain points."""
    pa = np.atleast_2d(np.asarray(a, dtype=float))
    pb = np.atleast_2d(np.asarray(b, dtype=float))
    if pa.shape[1] == pa.shape[0] == 1:  # scalar domain
        pa, pb = pa.ravel(), pb.ravel()
    return float(kernel.pair_fn(pa, pb)[0, 0])


def eval_kernel_pairs(kernel: Kernel, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """f(a_t, b_t) for aligned arrays of domain points.

    Kernel closures are cross-product evaluators, so take block diagonals to
    keep memory at O(block^2)."""
    n = len(a)
    out = np.empty(n)
    step = 512
    for lo in range(0, n, step):
        out[lo : lo + step] = np.diagonal(kernel.pair_fn(a[lo : lo + step], b[lo : lo + step]))
    return out


def exact_ustat(kernel: Kernel, sample: Sample) -> float:
    """Exact all-pairs U-statistic, 2/(n(n-1)) * sum_{i<j} f(x_i, x_j).

    Evaluated in row blocks: for a symmetric kernel the off-diagonal sum is
    the full pairwise sum minus the diagonal.
    """
    n = sample.n
    if n < 2:
        raise TooFewPoints(f"need at least 2 points, got {n}")
    pts = _points(sample)
    total = 0.0
    diag = 0.0
    for lo in range(0, n, _BLOCK):
        block = pts[lo : lo + _BLOCK]
        vals = kernel.pair_fn(block, pts)
        total += float(vals.sum())
        diag += float(np.trace(vals, offset=lo))
    return (total - diag) / (n * (n - 1))


def exact_auc(sample: Sample) -> float:
    """Empirical AUC: fraction of (positive, negative) pairs with the positive
    scored strictly higher; ties contribute 0."""
    pos, neg = sample.pos_scores, sample.neg_scores
    if len(pos) == 0 or len(neg) == 0:
        raise TooFewPoints("AUC needs at least one point of each class")
    sneg = np.sort(neg)
    wins = np.searchsorted(sneg, pos, side="left").sum()
    return float(wins) / (len(pos) * len(neg))


def renyi2_entropy(u: float) -> float:
    """H_2 = -ln(U) for a collision probability U in (0, 1]."""
    if u <= 0.0:
        raise ValueError(f"collision probability must be positive, got {u}")
    return -math.log(u)


def validate_distribution(probs: Sequence[float]) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or np.any(p < 0):
        raise ValueError("distribution must be a 1-d array of nonnegative probabilities")
    if abs(p.sum() - 1.0) > 1e-12:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
    return p


def population_moments(matrix: np.ndarray, probs: Sequence[float]) -> tuple[float, float, float]:
    """Population U-value and variance components for a matrix kernel.

    Returns (U, zeta1, zeta2) where U = sum_ij D_i D_j A_ij,
    zeta1 = Var_D(f_1) with f_1(i) = sum_j D_j A_ij, and
    zeta2 = Var_{D x D}(f).
    """
    A = np.asarray(matrix, dtype=float)
    p = validate_distribution(probs)
    if A.shape != (len(p), len(p)):
        raise ValueError("kernel matrix and distribution sizes differ")
    u = float(p @ A @ p)
    f1 = A @ p
    zeta1 = float(p @ (f1 - u) ** 2)
    zeta2 = float(p @ (A - u) ** 2 @ p)
    return u, zeta1, zeta2


def ustat_variance(n: int, zeta1: float, zeta2: float) -> float:
    """Sampling variance of the exact U-statistic on n iid points:
    2/(n(n-1)) * (2(n-2) zeta1 + zeta2)."""
    if n < 2:
        raise TooFewPoints(f"need at least 2 points, got {n}")
    return 2.0 / (n * (n - 1)) * (2.0 * (n - 2) * zeta1 + zeta2)
