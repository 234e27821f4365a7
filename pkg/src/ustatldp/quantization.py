"""Uniform quantization of [0, 1] inputs and quantized-kernel construction.

Domain [0, 1] is cut into k equal-width bins [(l-1)/k, l/k) with centers
(2l-1)/(2k), l = 1..k (the last bin closes at 1). A continuous kernel f is
replaced by a k x k matrix; three variants:

- "midpoint": A_ij = (max + min)/2 of f over the closed bin rectangle,
  found by grid search, together with the per-cell squared half-range
  Delta_ij = (max - min)^2 / 4 used for bias accounting;
- "average": A_ij = Monte Carlo mean of f over the rectangle;
- "exact-on-bins": A_ij = f(c_i, c_j) on bin centers (no quantization error
  when inputs are already bin-valued).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ustatldp.kernels import Kernel, eval_kernel_pairs

PairFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class QuantScheme:
    """k bins with their centers; quantize maps x to the nearest center."""

    k: int
    centers: np.ndarray


def uniform_scheme(k: int) -> QuantScheme:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    centers = (2 * np.arange(1, k + 1) - 1) / (2.0 * k)
    return QuantScheme(k, centers)


def quantize(scheme: QuantScheme, x: float) -> int:
    """Nearest-center bin index in 1..k; equidistant points round down."""
    return int(quantize_array(scheme, np.asarray([x]))[0])


def quantize_array(scheme: QuantScheme, xs: Sequence[float]) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if np.any(xs < 0.0) or np.any(xs > 1.0):
        raise ValueError("inputs must lie in [0, 1]")
    mids = (scheme.centers[1:] + scheme.centers[:-1]) / 2.0
    # searchsorted(side="left") sends a point equal to a midpoint to the
    # lower of the two equidistant bins
    return np.searchsorted(mids, xs, side="left").astype(np.int64) + 1


@dataclass(frozen=True)
class QuantizedKernel:
    k: int
    variant: str  # "midpoint" | "average" | "exact-on-bins"
    matrix: np.ndarray
    delta: Optional[np.ndarray] = None  # (max-min)^2/4 per cell, midpoint only


def _as_pair_fn(f: Union[Kernel, PairFn]) -> PairFn:
    if isinstance(f, Kernel):
        if f.pair_fn is None:
            raise ValueError("kernel has no closure form to quantize")
        return f.pair_fn
    return lambda a, b: np.asarray(f(a[:, None], b[None, :]), dtype=float)


def _elementwise_fn(f: Union[Kernel, PairFn]) -> PairFn:
    """f(x_t, y_t) on aligned vectors; raw callables broadcast natively."""
    if not isinstance(f, Kernel):
        return lambda x, y: np.asarray(f(x, y), dtype=float)
    return lambda x, y: eval_kernel_pairs(f, x, y)


def _bin_edges(k: int) -> np.ndarray:
    return np.arange(k + 1) / k


def midpoint_kernel(
    f: Union[Kernel, PairFn], scheme: QuantScheme, grid_points: int = 64
) -> QuantizedKernel:
    """Grid-search midpoint surrogate (max+min)/2 per bin rectangle.

    The grid is grid_points points per axis per bin, endpoints included, so
    bin corners are always evaluated.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    pair_fn = _as_pair_fn(f)
    k = scheme.k
    edges = _bin_edges(k)
    # grids[i] holds the sample points of bin i+1; flattened for one
    # vectorized kernel evaluation per row bin
    grids = np.stack([np.linspace(edges[i], edges[i + 1], grid_points) for i in range(k)])
    flat = grids.ravel()
    A = np.empty((k, k))
    delta = np.empty((k, k))
    for i in range(k):
        vals = pair_fn(grids[i], flat).reshape(grid_points, k, grid_points)
        hi = vals.max(axis=(0, 2))
        lo = vals.min(axis=(0, 2))
        A[i] = (hi + lo) / 2.0
        delta[i] = (hi - lo) ** 2 / 4.0
    return QuantizedKernel(k, "midpoint", A, delta)


def average_kernel(
    f: Union[Kernel, PairFn],
    scheme: QuantScheme,
    mc_samples: int = 20000,
    rng: Optional[np.random.Generator] = None,
) -> QuantizedKernel:
    """Monte Carlo bin-average surrogate E[f(X, Y)], X, Y uniform in the bins.

    One base pair of uniform draws is reused across cells via affine
    rescaling, so per-cell accuracy is std(f)/sqrt(mc_samples) but cell
    errors are correlated.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    elem = _elementwise_fn(f)
    k = scheme.k
    w = 1.0 / k
    u1 = rng.random(mc_samples)
    u2 = rng.random(mc_samples)
    lo = _bin_edges(k)[:-1]
    A = np.empty((k, k))
    for i in range(k):
        x = lo[i] + w * u1
        for j in range(k):
            A[i, j] = float(np.mean(elem(x, lo[j] + w * u2)))
    return QuantizedKernel(k, "average", A)


def exact_on_bins(f: Union[Kernel, PairFn], scheme: QuantScheme) -> QuantizedKernel:
    """Tabulate f on the bin centers (for inputs that are already binned)."""
    pair_fn = _as_pair_fn(f)
    A = np.asarray(pair_fn(scheme.centers, scheme.centers), dtype=float)
    return QuantizedKernel(scheme.k, "exact-on-bins", A)


def estimate_delta(qk: QuantizedKernel, counts: Sequence[int]) -> float:
    """Plug-in quantization-bias proxy sum_ij p_i p_j Delta_ij from observed
    bin counts."""
    if qk.delta is None:
        raise ValueError("delta is only tracked by the midpoint variant")
    c = np.asarray(counts, dtype=float)
    if c.shape != (qk.k,):
        raise ValueError(f"need {qk.k} bin counts")
    total = c.sum()
    if total <= 0:
        raise ValueError("counts must not be all zero")
    p = c / total
    return float(p @ qk.delta @ p)


def recommended_k(n: int, lipschitz: float, epsilon: float) -> int:
    """Bias/variance balancing choice k ~ n^(1/4) sqrt(L eps), at least 1."""
    if n < 1 or lipschitz <= 0 or epsilon <= 0:
        raise ValueError("need n >= 1, lipschitz > 0, epsilon > 0")
    return max(1, int(round(n**0.25 * math.sqrt(lipschitz * epsilon))))


def save_quantized_kernel(qk: QuantizedKernel, path: str) -> None:
    """CSV layout: header "k,variant", its values, then k matrix rows, then
    (midpoint only) a "delta" marker and k more rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "variant"])
        writer.writerow([qk.k, qk.variant])
        for row in qk.matrix:
            writer.writerow([repr(float(v)) for v in row])
        if qk.delta is not None:
            writer.writerow(["delta"])
            for row in qk.delta:
                writer.writerow([repr(float(v)) for v in row])


def load_quantized_kernel(path: str) -> QuantizedKernel:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["k", "variant"]:
        raise ValueError(f"{path}: expected 'k,variant' header")
    k, variant = int(rows[1][0]), rows[1][1]
    matrix = np.array([[float(v) for v in row] for row in rows[2 : 2 + k]])
    delta = None
    if len(rows) > 2 + k and rows[2 + k] == ["delta"]:
        delta = np.array([[float(v) for v in row] for row in rows[3 + k : 3 + 2 * k]])
    return QuantizedKernel(k, variant, matrix, delta)
