"""
Adaptive AUC estimation from hierarchical histograms
====================================================

Scores live on an integer grid of size 2^alpha. Each class gets a private
hierarchical histogram (one noisy count per dyadic interval), and the UAUC
is read off by walking the two trees top-down: a node pair whose product of
noisy counts falls below a data-driven threshold is discarded, everything
else is split. The walk therefore spends its oracle queries where the mass
actually is. We run the same protocol on two score distributions that are
extreme opposites in that respect.
"""

import numpy as np

from ustatldp.auc_protocol import AucConfig, run_auc_protocol
from ustatldp.kernels import exact_auc, scored_sample

alpha = 10           # tree depth; scores in [0, 2^10) = [0, 1024)
d = 2 ** alpha
n_plus = n_minus = 10_000
R = 20

rng = np.random.default_rng(21)

# Two datasets. "separable" puts every positive on the top score and every
# negative on the bottom one, so all the mass sits on two root-to-leaf
# paths. "overlapping" draws both classes uniformly, spreading the mass
# over the whole grid.
labels = np.concatenate([np.ones(n_plus), -np.ones(n_minus)])
datasets = {
    "separable": scored_sample(
        np.concatenate([np.full(n_plus, d - 1), np.zeros(n_minus)]), labels
    ),
    "overlapping": scored_sample(
        rng.integers(0, d, size=n_plus + n_minus).astype(float), labels
    ),
}


def repeat(sample, cfg):
    """RMSE, mean query count, and one report over R protocol runs."""
    truth = exact_auc(sample)
    errs, queries = [], []
    for r in range(R):
        est, report = run_auc_protocol(sample, cfg, np.random.default_rng([21, 1 + r]))
        errs.append(est - truth)
        queries.append(report["oracle_queries"])
    return float(np.sqrt(np.mean(np.square(errs)))), float(np.mean(queries)), report


# --- One walk in detail, at a budget where the signal survives the noise.
cfg8 = AucConfig(alpha=alpha, epsilon=8.0, split="budget-basic", variant="zero")
full_tree = 2 * (2 ** (alpha + 1) - 1)
for name, sample in datasets.items():
    auc, report = run_auc_protocol(sample, cfg8, np.random.default_rng([21, 1]))
    print(f"--- {name}: exact AUC = {exact_auc(sample):.4f}, "
          f"one run at eps=8 gives {auc:.4f} ---")
    print(f"{'level':>6} {'recursed':>9} {'discarded':>10}")
    for lvl, (rec, dis) in enumerate(
        zip(report["recursed_per_level"], report["discarded_per_level"])
    ):
        print(f"{lvl:>6} {rec:>9} {dis:>10}")
    print(f"oracle queries: {report['oracle_queries']} "
          f"(both trees hold {full_tree} nodes in total)\n")

# --- How the budget moves the error, the query count, and the bound.
print(f"{'eps':>5} {'dataset':>12} {'rmse':>7} {'queries':>8} {'sqrt bound':>11}")
for eps in (1.0, 4.0, 8.0):
    cfg = AucConfig(alpha=alpha, epsilon=eps, split="budget-basic", variant="zero")
    for name, sample in datasets.items():
        rmse, q, report = repeat(sample, cfg)
        print(f"{eps:>5} {name:>12} {rmse:>7.4f} {q:>8.0f} "
              f"{np.sqrt(report['bound_auc']):>11.3f}")

# Splitting users across levels instead of splitting the budget keeps the
# full epsilon per report and is the stronger choice when the budget is
# tight, at the price of estimating each level from a 1/alpha subsample.
print()
cfg_users = AucConfig(alpha=alpha, epsilon=1.0, split="users", variant="zero")
for name, sample in datasets.items():
    rmse, q, report = repeat(sample, cfg_users)
    print(f"users split, eps=1, {name}: rmse {rmse:.4f}, queries {q:.0f}")

print(
    "\nThe level tables show the adaptivity: separable mass rides two thin"
    "\npaths and the rest of the tree is discarded within a few levels, while"
    "\nuniform mass keeps node products near the threshold longer and the"
    "\nwalk pays for it in queries. Tightening eps raises the per-node noise"
    "\nfloor, the threshold rises with it, and the walk gives up closer to"
    "\nthe root - at eps=1 with a split budget the estimate is mostly noise,"
    "\nand partitioning users across levels is the better deal."
)
