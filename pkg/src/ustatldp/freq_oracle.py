"""One-bit Hadamard-sketch frequency oracles and hierarchical histograms.

Each user holding a value x in [0, 2^l) samples a uniform row index j and
computes the Hadamard character y = 2^(-l/2) (-1)^<j, x> (bitwise inner
product over F_2), then reports (j, z) where z = y with probability
e^eps/(1+e^eps) and z = -y otherwise. The count of a value q is estimated by

    c_hat(q) = (e^eps + 1)/(e^eps - 1) * sum_i (-1)^<j_i, q> sign(z_i),

which is unbiased with per-node variance 4 n e^eps/(e^eps-1)^2 + (n - c(q)).
Estimates at distinct nodes are pairwise uncorrelated.

A hierarchical (binary prefix tree) histogram of depth alpha runs one oracle
per level; the privacy budget is either split across levels (basic or
advanced composition) or the users are partitioned so each spends the whole
budget on a single level.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

SPLIT_BASIC = "budget-basic"
SPLIT_ADVANCED = "budget-advanced"
SPLIT_USERS = "users"
SPLITS = (SPLIT_BASIC, SPLIT_ADVANCED, SPLIT_USERS)


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not (0.0 <= self.delta < 1.0):
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")


@dataclass(frozen=True)
class HadamardReport:
    j: int
    z: float  # +-2^(-l/2)


def _parity(v: np.ndarray) -> np.ndarray:
    """Parity of the popcount, vectorized over uint64."""
    v = np.asarray(v, dtype=np.uint64).copy()
    for s in (32, 16, 8, 4, 2, 1):
        v ^= v >> np.uint64(s)
    return (v & np.uint64(1)).astype(np.int64)


def _check_domain(l: int, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values)
    if l < 0 or l > 62:
        raise ValueError(f"level must lie in 0..62, got {l}")
    if values.size and (values.min() < 0 or values.max() >= 2**l):
        raise ValueError(f"values must lie in [0, 2^{l})")
    return values.astype(np.uint64)


def randomize_batch(
    l: int, epsilon: float, values: Sequence[int], rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized local randomizer; returns (j, sign) with sign in {-1, +1}
    and sign * 2^(-l/2) the reported z."""
    values = _check_domain(l, np.asarray(values))
    n = len(values)
    j = rng.integers(0, 2**l, size=n, dtype=np.uint64)
    signs = 1 - 2 * _parity(j & values)
    if not math.isinf(epsilon):
        keep_prob = math.exp(epsilon) / (1.0 + math.exp(epsilon))
        flip = rng.random(n) >= keep_prob
        signs = np.where(flip, -signs, signs)
    return j, signs.astype(np.int8)


def local_randomize(
    l: int, epsilon: float, value: int, rng: np.random.Generator
) -> HadamardReport:
    j, signs = randomize_batch(l, epsilon, np.asarray([value]), rng)
    return HadamardReport(int(j[0]), float(signs[0]) * 2.0 ** (-l / 2.0))


def _debias(epsilon: float) -> float:
    if math.isinf(epsilon):
        return 1.0
    return (math.exp(epsilon) + 1.0) / (math.exp(epsilon) - 1.0)


def estimate_count(
    l: int, epsilon: float, reports: Sequence[HadamardReport], q: int
) -> float:
    """De-biased count estimate at q from individual reports."""
    _check_domain(l, np.asarray([q]))
    j = np.asarray([r.j for r in reports], dtype=np.uint64)
    t = np.sign(np.asarray([r.z for r in reports]))
    s = 1 - 2 * _parity(j & np.uint64(q))
    return _debias(epsilon) * float(np.sum(s * t))


def oracle_mse_bound(n: int, epsilon: float) -> float:
    """Flip-noise part of the estimate variance, 4 n e^eps/(e^eps-1)^2.

    Exact at a node holding all n reports; nodes with count c < n carry an
    extra (n - c) of sketch-sampling variance on top.
    """
    if math.isinf(epsilon):
        return 0.0
    e = math.exp(epsilon)
    return 4.0 * n * e / (e - 1.0) ** 2


class OracleState:
    """One level's reports plus the factors needed to answer queries.

    At epsilon = inf the sketch is bypassed entirely (reports are the exact
    values), matching mse bound 0. subsample_scale de-biases user
    partitioning (n_total / n_level); 1 when every user reports at this
    level. Instances are immutable after construction and safe to query
    concurrently.
    """

    def __init__(
        self,
        level: int,
        epsilon: float,
        j: Optional[np.ndarray] = None,
        signs: Optional[np.ndarray] = None,
        exact_values: Optional[np.ndarray] = None,
        subsample_scale: float = 1.0,
    ):
        self.level = level
        self.epsilon = epsilon
        self.j = j
        self.signs = signs
        self.exact_values = exact_values
        self.subsample_scale = subsample_scale

    @property
    def n_reports(self) -> int:
        src = self.exact_values if self.exact_values is not None else self.j
        return len(src)

    def estimate(self, q: int) -> float:
        _check_domain(self.level, np.asarray([q]))
        if self.exact_values is not None:
            raw = float(np.sum(self.exact_values == np.uint64(q)))
        else:
            s = 1 - 2 * _parity(self.j & np.uint64(q))
            raw = _debias(self.epsilon) * float(np.sum(s * self.signs))
        return raw * self.subsample_scale


def split_budget(alpha: int, budget: PrivacyBudget, split: str) -> float:
    """Per-level epsilon under the chosen composition strategy."""
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    if split == SPLIT_BASIC:
        return budget.epsilon / alpha
    if split == SPLIT_ADVANCED:
        if not (0.0 < budget.delta < 1.0):
            raise ValueError("budget-advanced needs delta in (0, 1)")
        if budget.epsilon > math.sqrt(alpha) * math.log(2.0):
            raise ValueError(
                "budget-advanced composition requires epsilon <= sqrt(alpha) ln 2"
            )
        return budget.epsilon / (
            math.sqrt(alpha) * (1.0 + math.sqrt(2.0 * math.log(1.0 / budget.delta)))
        )
    if split == SPLIT_USERS:
        return budget.epsilon
    raise ValueError(f"unknown split {split!r}; expected one of {SPLITS}")


def level_sizes(n: int, alpha: int) -> np.ndarray:
    """Even partition of n users over alpha levels, remainder to the
    earliest levels."""
    base, extra = divmod(n, alpha)
    return base + (np.arange(alpha) < extra).astype(np.int64)


class HierHistEstimate:
    """Depth-alpha prefix-tree histogram with one oracle per level.

    estimate(m, q) returns the (de-biased) count of values whose m-bit
    prefix is q; the root count estimate(0, 0) is the exact public n.
    v_levels[m-1] bounds the variance of any level-m node estimate.
    """

    def __init__(
        self,
        n: int,
        alpha: int,
        split: str,
        levels: Sequence[OracleState],
        v_levels: np.ndarray,
    ):
        self.n = n
        self.alpha = alpha
        self.split = split
        self.levels = tuple(levels)
        self.v_levels = np.asarray(v_levels, dtype=float)

    @property
    def v(self) -> float:
        return float(self.v_levels.max())

    def estimate(self, depth: int, q: int) -> float:
        if depth == 0:
            if q != 0:
                raise ValueError("root is the only depth-0 node")
            return float(self.n)
        if not (1 <= depth <= self.alpha):
            raise ValueError(f"depth must lie in 0..{self.alpha}")
        return self.levels[depth - 1].estimate(q)


def build_hier_estimate(
    values: Sequence[int],
    alpha: int,
    budget: PrivacyBudget,
    split: str,
    rng: np.random.Generator,
) -> HierHistEstimate:
    """Randomize every user's prefix reports and assemble the level oracles.

    values are integers in [0, 2^alpha); domains that are not a power of two
    should be padded up by the caller (the added leaves simply stay empty).
    """
    values = _check_domain(alpha, np.asarray(values))
    n = len(values)
    eps_level = split_budget(alpha, budget, split)
    states: list[OracleState] = []
    v_levels = np.empty(alpha)
    if split == SPLIT_USERS:
        order = rng.permutation(n)
        bounds = np.concatenate([[0], np.cumsum(level_sizes(n, alpha))])
    for m in range(1, alpha + 1):
        if split == SPLIT_USERS:
            idx = order[bounds[m - 1] : bounds[m]]
            if len(idx) == 0:
                raise ValueError(f"no users left for level {m}; need n >= alpha")
            scale = n / len(idx)
        else:
            idx = np.arange(n)
            scale = 1.0
        prefixes = values[idx] >> np.uint64(alpha - m)
        if math.isinf(eps_level):
            state = OracleState(m, eps_level, exact_values=prefixes,
                                subsample_scale=scale)
        else:
            j, signs = randomize_batch(m, eps_level, prefixes, rng)
            state = OracleState(m, eps_level, j=j, signs=signs,
                                subsample_scale=scale)
        states.append(state)
        v_levels[m - 1] = scale**2 * oracle_mse_bound(len(idx), eps_level)
    return HierHistEstimate(n, alpha, split, states, v_levels)


def pack_reports(level: int, j: np.ndarray, signs: np.ndarray) -> bytes:
    """Wire format: level:u8, count:u64, then count j:u64 little-endian,
    then sign bits packed 8 per byte (1 = +)."""
    if not (0 <= level <= 255):
        raise ValueError("level must fit in a byte")
    j = np.asarray(j, dtype="<u8")
    bits = (np.asarray(signs) > 0).astype(np.uint8)
    head = struct.pack("<BQ", level, len(j))
    return head + j.tobytes() + np.packbits(bits).tobytes()


def unpack_reports(buf: bytes) -> tuple[int, np.ndarray, np.ndarray]:
    level, n = struct.unpack_from("<BQ", buf, 0)
    off = struct.calcsize("<BQ")
    j = np.frombuffer(buf, dtype="<u8", count=n, offset=off).astype(np.uint64)
    bits = np.frombuffer(buf, dtype=np.uint8, offset=off + 8 * n)
    signs = np.where(np.unpackbits(bits, count=n) > 0, 1, -1).astype(np.int8)
    return level, j, signs
