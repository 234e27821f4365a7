"""Pair-subsampled U-statistic estimation with per-pair output perturbation.

The aggregator samples P independent uniform permutations; adjacent positions
(2i-1, 2i) of each permutation define Pn/2 pairs, and every user lands in
exactly P of them. Each pair evaluates the kernel jointly (a simulated
trusted two-party computation) and releases a perturbed value — Laplace noise
of scale P/eps for kernels in [0, 1], or binary randomized response for
{0, 1} kernels. The estimate is (2/(Pn)) * sum of (de-biased) values; each
user's data enters exactly P releases at per-pair budget eps/P, so the whole
protocol costs eps by basic composition.

The exact MSE of the Laplace variant (incomplete-U-statistic variance plus
the average of Pn/2 independent Lap(P/eps) draws) is

    2/(Pn) (2(P-1)(1 - 1/(n-1)) zeta1 + (1 + (P-1)/(n-1)) zeta2) + 4P/(n eps^2).

The all-pairs baseline perturbs every C(n,2) pair instead, splitting the
budget by advanced composition; for large n its per-pair noise sum is drawn
as a difference of two Gamma(M, b) variables (distributionally identical to
summing M iid Laplace(b) draws) so runs stay O(1) in the pair count.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from ustatldp.kernels import Kernel, Sample, TooFewPoints, eval_kernel, eval_kernel_pairs, exact_ustat

# above this many pairs, allpairs_baseline switches to the gamma-difference
# noise path instead of materializing per-pair draws
_GAMMA_PATH_MIN_PAIRS = 200_000


class OddN(ValueError):
    """sample_pairs needs an even number of users."""


class LengthMismatch(ValueError):
    """Number of noisy values disagrees with the pair plan."""


class RangeViolation(ValueError):
    """Kernel value outside the range the mechanism can privatize."""


class BadDelta(ValueError):
    """Advanced composition needs delta in (0, 1)."""


@dataclass(frozen=True)
class PairPlan:
    """Pn/2 index pairs (0-based) drawn from adjacent slots of P permutations."""

    n: int
    P: int
    pairs: np.ndarray  # (P*n/2, 2)
    perm_ids: np.ndarray  # (P*n/2,)


@dataclass(frozen=True)
class LaplaceMechanism:
    scale: float  # P/eps for per-user budget eps over P pairs

    def __post_init__(self):
        if not (self.scale >= 0):
            raise ValueError("scale must be nonnegative")


@dataclass(frozen=True)
class RR2Mechanism:
    epsilon: float  # per-pair budget (total eps / P); flip prob 1/(1+e^eps)

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise ValueError("epsilon must be positive")

    @property
    def keep_prob(self) -> float:
        if math.isinf(self.epsilon):
            return 1.0
        return math.exp(self.epsilon) / (1.0 + math.exp(self.epsilon))


Mechanism = Union[LaplaceMechanism, RR2Mechanism]


@dataclass(frozen=True)
class NoisyKernelValue:
    value: float
    mechanism: Mechanism


def sample_pairs(n: int, P: int, rng: np.random.Generator) -> PairPlan:
    if n % 2 != 0:
        raise OddN(f"n must be even, got {n}; drop one user first")
    if n < 2 or P < 1:
        raise ValueError("need n >= 2 and P >= 1")
    all_pairs = np.empty((P * n // 2, 2), dtype=np.int64)
    for p in range(P):
        perm = rng.permutation(n)
        all_pairs[p * n // 2 : (p + 1) * n // 2] = perm.reshape(n // 2, 2)
    perm_ids = np.repeat(np.arange(P), n // 2)
    return PairPlan(n, P, all_pairs, perm_ids)


def allpairs_plan(n: int) -> PairPlan:
    """Round-robin 1-factorization: n-1 perfect matchings that together cover
    every unordered pair exactly once (n even)."""
    if n % 2 != 0:
        raise OddN(f"n must be even, got {n}")
    rounds = []
    for r in range(n - 1):
        pairs = [(n - 1, r)]
        for k in range(1, n // 2):
            pairs.append(((r + k) % (n - 1), (r - k) % (n - 1)))
        rounds.append(pairs)
    pairs = np.array([p for rnd in rounds for p in rnd], dtype=np.int64)
    perm_ids = np.repeat(np.arange(n - 1), n // 2)
    return PairPlan(n, n - 1, pairs, perm_ids)


def laplace_noise(scale: float, rng: np.random.Generator, size=None) -> np.ndarray:
    """Inverse-CDF Laplace draws: -scale * sgn(u) ln(1 - 2|u|), u ~ U(-1/2, 1/2).

    Pinned to this construction (rather than rng.laplace) so seeded runs are
    reproducible independent of numpy's internal algorithm choices."""
    u = rng.uniform(-0.5, 0.5, size=size)
    m = np.minimum(np.abs(u), 0.5 - 1e-16)  # guard the measure-zero log(0)
    return -scale * np.sign(u) * np.log1p(-2.0 * m)


def perturb_pair(
    kernel: Kernel, xi, xj, mechanism: Mechanism, rng: np.random.Generator
) -> NoisyKernelValue:
    """One pair's private release of f(xi, xj)."""
    f = eval_kernel(kernel, xi, xj)
    if isinstance(mechanism, LaplaceMechanism):
        if not (0.0 <= f <= 1.0):
            raise RangeViolation(f"Laplace mechanism needs f in [0,1], got {f}")
        noise = 0.0 if mechanism.scale == 0.0 else float(laplace_noise(mechanism.scale, rng))
        return NoisyKernelValue(f + noise, mechanism)
    if isinstance(mechanism, RR2Mechanism):
        if f not in (0.0, 1.0):
            raise RangeViolation(f"binary randomized response needs f in {{0,1}}, got {f}")
        bit = int(f)
        if rng.random() >= mechanism.keep_prob:
            bit = 1 - bit
        return NoisyKernelValue(float(bit), mechanism)
    raise TypeError(f"unknown mechanism {mechanism!r}")


def _debias_rr2(values: np.ndarray, mech: RR2Mechanism) -> np.ndarray:
    p = mech.keep_prob
    return (values - (1.0 - p)) / (2.0 * p - 1.0)


def aggregate_pairs(plan: PairPlan, noisy: Sequence[NoisyKernelValue]) -> float:
    """(2/(Pn)) * sum of values, de-biasing randomized-response bits first."""
    if len(noisy) != len(plan.pairs):
        raise LengthMismatch(f"expected {len(plan.pairs)} values, got {len(noisy)}")
    vals = np.array([nv.value for nv in noisy])
    mech = noisy[0].mechanism
    if isinstance(mech, RR2Mechanism):
        vals = _debias_rr2(vals, mech)
    return 2.0 / (plan.P * plan.n) * float(vals.sum())


def run_pairs_protocol(
    kernel: Kernel,
    sample: Sample,
    P: int,
    epsilon: float,
    rng: np.random.Generator,
    mechanism: str = "laplace",
) -> float:
    """Plan, perturb and aggregate in vectorized form (one noise draw per pair)."""
    plan = sample_pairs(sample.n, P, rng)
    pts = sample.values
    vals = eval_kernel_pairs(kernel, pts[plan.pairs[:, 0]], pts[plan.pairs[:, 1]])
    if mechanism == "laplace":
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            raise RangeViolation("Laplace mechanism needs kernel values in [0,1]")
        if not math.isinf(epsilon):
            vals = vals + laplace_noise(P / epsilon, rng, size=len(vals))
    elif mechanism == "rr2":
        if vals.size and not np.all(np.isin(vals, (0.0, 1.0))):
            raise RangeViolation("binary randomized response needs values in {0,1}")
        mech = RR2Mechanism(epsilon / P if not math.isinf(epsilon) else math.inf)
        flip = rng.random(len(vals)) >= mech.keep_prob
        vals = _debias_rr2(np.where(flip, 1.0 - vals, vals), mech)
    else:
        raise ValueError("mechanism must be 'laplace' or 'rr2'")
    return 2.0 / (P * sample.n) * float(vals.sum())


def subsampling_mse(n: int, P: int, epsilon: float, zeta1: float, zeta2: float) -> float:
    """Exact MSE of the Laplace-perturbed subsampled estimator.

    Subsampling part from the incomplete-U-statistic variance; noise part is
    the variance of the mean of Pn/2 iid Lap(P/eps) draws, 4P/(n eps^2)."""
    if n < 2 or P < 1:
        raise ValueError("need n >= 2 and P >= 1")
    sampling = (
        2.0
        / (P * n)
        * (
            2.0 * (P - 1) * (1.0 - 1.0 / (n - 1)) * zeta1
            + (1.0 + (P - 1) / (n - 1)) * zeta2
        )
    )
    noise = 0.0 if math.isinf(epsilon) else 4.0 * P / (n * epsilon**2)
    return sampling + noise


def allpairs_epsilon_per_pair(n: int, epsilon: float, delta: float) -> float:
    """Per-pair budget for n-1 mechanism uses per user under advanced
    composition (conservative closed form); a single use needs no splitting."""
    if not (0.0 < delta < 1.0):
        raise BadDelta(f"delta must lie in (0,1), got {delta}")
    if n == 2:
        return epsilon
    return epsilon / (2.0 * math.sqrt(2.0 * (n - 1) * math.log(1.0 / delta)))


def allpairs_baseline(
    kernel: Kernel,
    sample: Sample,
    epsilon: float,
    delta: float,
    rng: np.random.Generator,
) -> float:
    """Perturb every one of the C(n,2) pairs and average.

    Beyond _GAMMA_PATH_MIN_PAIRS pairs the summed Laplace noise is drawn as
    Gamma(M, b) - Gamma(M, b) (same distribution, O(1) in M)."""
    n = sample.n
    if n < 2:
        raise TooFewPoints(f"need at least 2 users, got {n}")
    if math.isinf(epsilon):
        return exact_ustat(kernel, sample)
    eps_pair = allpairs_epsilon_per_pair(n, epsilon, delta)
    scale = 1.0 / eps_pair
    m = n * (n - 1) // 2
    if m >= _GAMMA_PATH_MIN_PAIRS:
        base = exact_ustat(kernel, sample)
        noise_sum = float(rng.gamma(m, scale) - rng.gamma(m, scale))
        return base + noise_sum / m
    idx = np.triu_indices(n, k=1)
    pts = sample.values
    vals = eval_kernel_pairs(kernel, pts[idx[0]], pts[idx[1]])
    if vals.min() < 0.0 or vals.max() > 1.0:
        raise RangeViolation("Laplace mechanism needs kernel values in [0,1]")
    vals = vals + laplace_noise(scale, rng, size=m)
    return float(vals.mean())


def optimal_P_hint(zeta1: float, zeta2: float, epsilon: float, n: int, P_max: int) -> int:
    """Smallest P in 1..P_max minimizing the closed-form MSE."""
    if P_max < 1:
        raise ValueError("P_max must be >= 1")
    mses = [subsampling_mse(n, P, epsilon, zeta1, zeta2) for P in range(1, P_max + 1)]
    return int(np.argmin(mses)) + 1


def save_pair_plan(plan: PairPlan, path: str) -> None:
    """Audit CSV: pair_id,i,j,perm_id (0-based user indices)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair_id", "i", "j", "perm_id"])
        for pid, ((i, j), perm) in enumerate(zip(plan.pairs, plan.perm_ids)):
            writer.writerow([pid, int(i), int(j), int(perm)])


def load_pair_plan(path: str) -> PairPlan:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["pair_id", "i", "j", "perm_id"]:
        raise ValueError(f"{path}: expected 'pair_id,i,j,perm_id' header")
    body = np.array([[int(v) for v in row] for row in rows[1:]], dtype=np.int64)
    pairs, perm_ids = body[:, 1:3], body[:, 3]
    P = int(perm_ids.max()) + 1
    n = 2 * len(pairs) // P
    return PairPlan(n, P, pairs, perm_ids)
