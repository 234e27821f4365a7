"""k-ary randomized response protocol for U-statistics on binned inputs.

Each user holds a bin index in 1..k and reports it unchanged with probability
1 - beta, otherwise a uniform bin, where beta = k / (k + e^eps - 1). The
report distribution is P(true) = 1 - beta + beta/k and P(other) = beta/k, so
the worst-case likelihood ratio is exactly e^eps.

With b = (beta/k) * ones, E[e_R - b] = (1 - beta) e_x, so for a kernel matrix
A the de-biased pair estimate

    f_hat = (1 - beta)^(-2) (e_{r1} - b)^T A (e_{r2} - b)

is unbiased for A[x1, x2], and the all-pairs aggregate reduces to vector
algebra on the report histogram: with c = sum_i (e_{r_i} - b),

    U_hat = (c^T A c - sum_i (e_{r_i}-b)^T A (e_{r_i}-b)) / ((1-beta)^2 n(n-1)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ustatldp.kernels import Sample, TooFewPoints
from ustatldp.quantization import QuantScheme, QuantizedKernel, quantize_array


@dataclass(frozen=True)
class RRConfig:
    k: int
    epsilon: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not (self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def beta(self) -> float:
        if math.isinf(self.epsilon):
            return 0.0
        return self.k / (self.k + math.expm1(self.epsilon))


def _check_bins(k: int, bins: np.ndarray) -> np.ndarray:
    bins = np.asarray(bins)
    if bins.size and (bins.min() < 1 or bins.max() > k):
        raise ValueError(f"bin indices must lie in 1..{k}")
    return bins.astype(np.int64)


def rr_randomize(cfg: RRConfig, true_bin: int, rng: np.random.Generator) -> int:
    return int(rr_randomize_array(cfg, np.asarray([true_bin]), rng)[0])


def rr_randomize_array(
    cfg: RRConfig, bins: Sequence[int], rng: np.random.Generator
) -> np.ndarray:
    bins = _check_bins(cfg.k, np.asarray(bins))
    keep = rng.random(bins.shape) >= cfg.beta
    uniform = rng.integers(1, cfg.k + 1, size=bins.shape)
    return np.where(keep, bins, uniform)


def debiased_pair_estimate(cfg: RRConfig, A: np.ndarray, r1: int, r2: int) -> float:
    """Unbiased estimate of A[x1, x2] from two reports.

    Expanding (e_{r1}-b)^T A (e_{r2}-b) with b = (beta/k) ones gives
    A[r1,r2] - (beta/k)(rowsum_{r1} + colsum_{r2}) + (beta/k)^2 totalsum.
    """
    A = np.asarray(A, dtype=float)
    _check_bins(cfg.k, np.asarray([r1, r2]))
    g = cfg.beta / cfg.k
    val = (
        A[r1 - 1, r2 - 1]
        - g * (A[r1 - 1, :].sum() + A[:, r2 - 1].sum())
        + g * g * A.sum()
    )
    return float(val) / (1.0 - cfg.beta) ** 2


@dataclass
class RRAccumulator:
    """Mergeable sufficient statistics of a batch of reports: the histogram."""

    k: int
    counts: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros(self.k, dtype=np.int64)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def add(self, reports: Sequence[int]) -> "RRAccumulator":
        reports = _check_bins(self.k, np.asarray(reports))
        self.counts += np.bincount(reports - 1, minlength=self.k)
        return self

    def merge(self, other: "RRAccumulator") -> "RRAccumulator":
        if other.k != self.k:
            raise ValueError("cannot merge accumulators with different k")
        self.counts += other.counts
        return self


def rr_aggregate_counts(cfg: RRConfig, A: np.ndarray, acc: RRAccumulator) -> float:
    """O(k^2) aggregation from the report histogram."""
    A = np.asarray(A, dtype=float)
    n = acc.n
    if n < 2:
        raise TooFewPoints(f"need at least 2 reports, got {n}")
    g = cfg.beta / cfg.k
    m = acc.counts.astype(float)
    c = m - n * g
    rows, cols, total = A.sum(axis=1), A.sum(axis=0), A.sum()
    # per-bin self terms (e_r - b)^T A (e_r - b), weighted by multiplicity
    d = np.diag(A) - g * (rows + cols) + g * g * total
    cross = c @ A @ c - float(m @ d)
    return cross / ((1.0 - cfg.beta) ** 2 * n * (n - 1))


def rr_aggregate(cfg: RRConfig, A: np.ndarray, reports: Sequence[int]) -> float:
    return rr_aggregate_counts(cfg, A, RRAccumulator(cfg.k).add(reports))


def rr_aggregate_naive(cfg: RRConfig, A: np.ndarray, reports: Sequence[int]) -> float:
    """O(n^2) reference: average the de-biased pair estimate over all pairs."""
    reports = _check_bins(cfg.k, np.asarray(reports))
    n = len(reports)
    if n < 2:
        raise TooFewPoints(f"need at least 2 reports, got {n}")
    acc = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            acc += debiased_pair_estimate(cfg, A, int(reports[i]), int(reports[j]))
    return 2.0 * acc / (n * (n - 1))


def run_rr_protocol(
    cfg: RRConfig,
    qk: QuantizedKernel,
    sample: Sample,
    rng: np.random.Generator,
    scheme: Optional[QuantScheme] = None,
) -> float:
    """Quantize (when a scheme is given), randomize every user, aggregate."""
    if qk.k != cfg.k:
        raise ValueError("kernel and RR config disagree on k")
    if scheme is not None:
        bins = quantize_array(scheme, sample.values)
    else:
        bins = _check_bins(cfg.k, sample.values)
    reports = rr_randomize_array(cfg, bins, rng)
    return rr_aggregate(cfg, qk.matrix, reports)


def rr_variance_bound(cfg: RRConfig, n: int) -> float:
    """Worst-case variance of the aggregate for kernels with values in [0, 1]:
    1/(n (1-beta)^2) + (1+beta)^2 / (2 n (n-1) (1-beta)^4)."""
    if n < 2:
        raise TooFewPoints(f"need at least 2 reports, got {n}")
    b = cfg.beta
    return 1.0 / (n * (1.0 - b) ** 2) + (1.0 + b) ** 2 / (
        2.0 * n * (n - 1) * (1.0 - b) ** 4
    )


def rr_auc_estimate(
    cfg: RRConfig, pos_reports: Sequence[int], neg_reports: Sequence[int]
) -> float:
    """Two-sample AUC from randomized score bins (labels public).

    Unbiased for sum_{i+,j-} 1[s_i > s_j] / (n+ n-); the bilinear form
    c+^T W c- with W[s,s'] = 1[s > s'] collapses to a prefix sum, so
    aggregation is O(n + k) with no k x k matrix.
    """
    pos = _check_bins(cfg.k, np.asarray(pos_reports))
    neg = _check_bins(cfg.k, np.asarray(neg_reports))
    if len(pos) == 0 or len(neg) == 0:
        raise TooFewPoints("need at least one report per class")
    g = cfg.beta / cfg.k
    cp = np.bincount(pos - 1, minlength=cfg.k) - len(pos) * g
    cn = np.bincount(neg - 1, minlength=cfg.k) - len(neg) * g
    below = np.concatenate([[0.0], np.cumsum(cn)[:-1]])  # sum of cn over s' < s
    uauc = float(cp @ below) / (1.0 - cfg.beta) ** 2
    return uauc / (len(pos) * len(neg))
