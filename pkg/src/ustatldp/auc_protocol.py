"""Private AUC from hierarchical histograms of each class's scores.

With integer scores in [0, 2^alpha), the Mann-Whitney numerator decomposes
over the binary prefix tree: for every internal node p, the right child's
positives beat the left child's negatives, so

    UAUC = sum over internal p of  h+(p1) * h-(p0).

The private protocol walks the tree breadth-first on two noisy histograms
(one per class), keeps the exact public class sizes at the root, and prunes
nodes whose (floored) count product falls below a threshold tau = a
sqrt(v+ v-), where v bounds the per-node estimate variance. A pruned node
contributes either half the product of its children's sums ("half" variant)
or nothing ("zero" variant); a recursed node contributes its cross product
and its children stay active. Depth-alpha nodes are leaves and contribute
nothing below depth alpha - 1.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ustatldp.freq_oracle import (
    SPLIT_ADVANCED,
    SPLITS,
    HierHistEstimate,
    PrivacyBudget,
    build_hier_estimate,
)
from ustatldp.kernels import Sample, TooFewPoints

VARIANT_HALF = "half"
VARIANT_ZERO = "zero"
VARIANTS = (VARIANT_HALF, VARIANT_ZERO)


@dataclass(frozen=True)
class AucConfig:
    alpha: int
    epsilon: float
    delta: float = 0.0
    split: str = SPLIT_ADVANCED
    a: Union[str, float] = "auto"
    variant: str = VARIANT_HALF

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")
        if not (self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}")
        if self.a != "auto" and not (float(self.a) > 1.0):
            raise ValueError("a must be 'auto' or a number > 1")


@dataclass
class TraversalStats:
    """Per-level traversal accounting; level m indexes node depth 0..alpha-1."""

    recursed_per_level: list = field(default_factory=list)
    discarded_per_level: list = field(default_factory=list)
    oracle_queries: int = 0


def uauc_exact(pos_scores, neg_scores) -> float:
    """Exact Mann-Whitney numerator: # of (positive, negative) pairs with the
    positive scored strictly higher."""
    pos = np.asarray(pos_scores)
    neg = np.asarray(neg_scores)
    if len(pos) == 0 or len(neg) == 0:
        raise TooFewPoints("need at least one score per class")
    sneg = np.sort(neg)
    return float(np.searchsorted(sneg, pos, side="left").sum())


def threshold_and_floor(a: float, v_plus: float, v_minus: float) -> tuple[float, float, float]:
    """tau = a sqrt(v+ v-) and the per-tree count floors sqrt(a v)/2."""
    tau = a * math.sqrt(v_plus * v_minus)
    return tau, math.sqrt(a * v_plus) / 2.0, math.sqrt(a * v_minus) / 2.0


def uauc_private(
    hp: HierHistEstimate,
    hm: HierHistEstimate,
    a: float,
    variant: str = VARIANT_HALF,
    tau: Optional[float] = None,
) -> tuple[float, TraversalStats]:
    """Thresholded breadth-first traversal of the two class histograms.

    tau defaults to a sqrt(v+ v-) from the built estimators; an explicit
    value is accepted for diagnostics. Ties (product == tau) recurse.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if hp.alpha != hm.alpha:
        raise ValueError("class histograms disagree on depth")
    alpha = hp.alpha
    auto_tau, floor_p, floor_m = threshold_and_floor(a, hp.v, hm.v)
    if tau is None:
        tau = auto_tau
    stats = TraversalStats([0] * alpha, [0] * alpha, 0)
    total = 0.0
    # frontier entries: (q, hat_plus, hat_minus); root counts are exact
    frontier = [(0, float(hp.estimate(0, 0)), float(hm.estimate(0, 0)))]
    for depth in range(alpha):
        nxt = []
        for q, hat_p, hat_m in frontier:
            if max(hat_p, floor_p) * max(hat_m, floor_m) < tau:
                stats.discarded_per_level[depth] += 1
                if variant == VARIANT_HALF:
                    p0 = hp.estimate(depth + 1, 2 * q)
                    p1 = hp.estimate(depth + 1, 2 * q + 1)
                    m0 = hm.estimate(depth + 1, 2 * q)
                    m1 = hm.estimate(depth + 1, 2 * q + 1)
                    stats.oracle_queries += 4
                    total += 0.5 * (p0 + p1) * (m0 + m1)
                # zero variant queries nothing below a discarded node
            else:
                stats.recursed_per_level[depth] += 1
                p0 = hp.estimate(depth + 1, 2 * q)
                p1 = hp.estimate(depth + 1, 2 * q + 1)
                m0 = hm.estimate(depth + 1, 2 * q)
                m1 = hm.estimate(depth + 1, 2 * q + 1)
                stats.oracle_queries += 4
                total += p1 * m0
                if depth + 1 < alpha:  # depth-alpha children are leaves
                    nxt.append((2 * q, p0, m0))
                    nxt.append((2 * q + 1, p1, m1))
        frontier = nxt
    return total, stats


def auto_a(n_plus: int, n_minus: int, alpha: int, c_effective: float, variant: str) -> float:
    """Closed-form threshold multiplier minimizing the MSE bound; > 1 except
    in the degenerate noise-free limit c_effective -> 0 where it tends to 1."""
    n_min = min(n_plus, n_minus)
    if n_min < 1:
        raise ValueError("both classes must be non-empty")
    if c_effective < 0:
        raise ValueError("c_effective must be nonnegative")
    n = n_plus + n_minus
    if variant == VARIANT_HALF:
        return (1.0 + math.sqrt(21.0 / 8.0) * (2.0 * c_effective * n * alpha / n_min**2) ** 0.25) ** 2
    if variant == VARIANT_ZERO:
        return (1.0 + math.sqrt(math.sqrt(2.0 * c_effective * alpha * n) / (16.0 * n_min))) ** 2
    raise ValueError(f"variant must be one of {VARIANTS}")


def auc_mse_bound(
    n_plus: int,
    n_minus: int,
    alpha: int,
    c_effective: float,
    a: float,
    variant: str,
) -> tuple[float, float]:
    """Worst-case MSE of the private UAUC, and the same at AUC scale
    (divided by (n+ n-)^2)."""
    if alpha == 0 or c_effective == 0.0:
        return 0.0, 0.0
    if not (a > 1.0):
        raise ValueError(f"threshold multiplier a must be > 1, got {a}")
    n = n_plus + n_minus
    n_min = min(n_plus, n_minus)
    C = c_effective
    root_a = math.sqrt(a)
    if variant == VARIANT_HALF:
        inner = (
            2.0 * n
            + (4.0 * a + 1.0) * n_min
            + 21.0 * math.sqrt(2.0 * n * C * alpha) / (root_a - 1.0)
        )
    elif variant == VARIANT_ZERO:
        inner = (
            2.0 * n
            + (8.0 * a + 2.0) * n_min
            + math.sqrt(2.0 * C * alpha * n) / (root_a - 1.0)
        )
    else:
        raise ValueError(f"variant must be one of {VARIANTS}")
    bound = C * n_minus * n_plus * alpha**2 * inner
    return bound, bound / (n_plus * n_minus) ** 2


def expected_recursed_bound(n: int, a: float, c_effective: float, alpha: int) -> float:
    """Bound on the expected number of recursed nodes per level:
    sqrt(n / (2 C alpha)) / (sqrt(a) - 1)."""
    if not (a > 1.0) or c_effective <= 0 or alpha < 1:
        raise ValueError("need a > 1, c_effective > 0, alpha >= 1")
    return math.sqrt(n / (2.0 * c_effective * alpha)) / (math.sqrt(a) - 1.0)


def run_auc_protocol(
    sample: Sample, cfg: AucConfig, rng: np.random.Generator
) -> tuple[float, dict]:
    """Build per-class histograms, traverse, and report.

    Scores must be integers in [0, 2^alpha); class labels are public. The
    returned AUC is clamped to [0, 1]; the report keeps the raw value.
    """
    pos = sample.pos_scores.astype(np.int64)
    neg = sample.neg_scores.astype(np.int64)
    n_plus, n_minus = len(pos), len(neg)
    if n_plus == 0 or n_minus == 0:
        raise TooFewPoints("need at least one user per class")
    n = n_plus + n_minus
    if cfg.alpha > math.sqrt(n):
        warnings.warn(
            f"tree depth alpha={cfg.alpha} exceeds sqrt(n)={math.sqrt(n):.1f}; "
            "per-node noise will dominate",
            stacklevel=2,
        )
    budget = PrivacyBudget(cfg.epsilon, cfg.delta)
    hp = build_hier_estimate(pos, cfg.alpha, budget, cfg.split, rng)
    hm = build_hier_estimate(neg, cfg.alpha, budget, cfg.split, rng)
    c_eff = max(hp.v / (n_plus * cfg.alpha), hm.v / (n_minus * cfg.alpha))
    a = auto_a(n_plus, n_minus, cfg.alpha, c_eff, cfg.variant) if cfg.a == "auto" else float(cfg.a)
    uauc, stats = uauc_private(hp, hm, a, cfg.variant)
    if a > 1.0:
        bound_uauc, bound_auc = auc_mse_bound(n_plus, n_minus, cfg.alpha, c_eff, a, cfg.variant)
    else:  # noise-free degenerate case
        bound_uauc, bound_auc = 0.0, 0.0
    auc_raw = uauc / (n_plus * n_minus)
    report = {
        "auc": float(min(1.0, max(0.0, auc_raw))),
        "auc_raw": float(auc_raw),
        "uauc_raw": float(uauc),
        "n_plus": n_plus,
        "n_minus": n_minus,
        "alpha": cfg.alpha,
        "epsilon": cfg.epsilon,
        "delta": cfg.delta,
        "split": cfg.split,
        "variant": cfg.variant,
        "a": float(a),
        "c_effective": float(c_eff),
        "bound_uauc": float(bound_uauc),
        "bound_auc": float(bound_auc),
        "recursed_per_level": list(stats.recursed_per_level),
        "discarded_per_level": list(stats.discarded_per_level),
        "oracle_queries": stats.oracle_queries,
    }
    json.dumps(report)  # the report is part of the wire contract
    return report["auc"], report
