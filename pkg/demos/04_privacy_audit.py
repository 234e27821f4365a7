"""
Auditing the local randomizers
==============================

A privacy claim is a property of the local randomizer alone, so for discrete
channels it can be checked outright: enumerate the conditional distribution
P[x, output] and read off

    eps_actual = max over outputs of ln(max_x P / min_x P).

verify_ldp does exactly that for the randomizers this package ships. A
mechanism passes if eps_actual is at most the claimed budget; a single
output that some input can produce and another cannot pushes eps_actual to
infinity. The same check is wired into the command line as
`ustatldp privacy-check`.
"""

import numpy as np

from ustatldp.harness import verify_ldp
from ustatldp.rr_protocol import RRConfig, rr_randomize_array

# --- k-ary randomized response. The channel keeps the true bin with
# probability 1 - beta and otherwise substitutes a uniform draw, so the
# worst output ratio is (1 - beta + beta/k) : (beta/k), which is e^eps by
# construction. The audit should find the claim exactly tight.
print("k-ary randomized response:")
print(f"{'k':>4} {'eps claimed':>12} {'eps actual':>11} {'ok':>4} {'beta':>7}")
for k in (2, 4, 16):
    for eps in (0.5, 1.0, 2.0):
        actual, ok = verify_ldp(("rr", k, eps), eps)
        print(f"{k:>4} {eps:>12} {actual:>11.6f} {str(ok):>4} "
              f"{RRConfig(k, eps).beta:>7.3f}")

# --- The Hadamard frequency oracle. Each report is a coordinate j plus a
# sign that equals the true character with probability e^eps/(1+e^eps);
# only the sign leaks, so the channel should again be exactly eps-LDP even
# though the output space has 2 * 2^l elements.
print("\nhadamard frequency oracle:")
print(f"{'l':>4} {'outputs':>8} {'eps claimed':>12} {'eps actual':>11} {'ok':>4}")
for l in (1, 3, 6):
    for eps in (0.8, 2.0):
        actual, ok = verify_ldp(("hadamard", l, eps), eps)
        print(f"{l:>4} {2 * 2**l:>8} {eps:>12} {actual:>11.6f} {str(ok):>4}")

# --- Two ways to fail. The identity channel reveals the input, so no
# finite budget covers it; and an honest mechanism still fails when the
# claim undercuts what it actually spends.
print("\nfailure cases:")
actual, ok = verify_ldp(("identity", 8), 5.0)
print(f"  identity channel claiming eps=5:        actual={actual}, ok={ok}")
actual, ok = verify_ldp(("rr", 4, float(np.log(3.0))), 1.0)
print(f"  rr spending ln(3)=1.0986 claiming eps=1: actual={actual:.6f}, ok={ok}")

# --- The table view has an observable counterpart: fix one input, collect
# many reports, and the histogram must match beta/k plus the point mass.
k, eps, n = 4, 1.0, 200_000
cfg = RRConfig(k, eps)
reports = rr_randomize_array(cfg, np.full(n, 2), np.random.default_rng(41))
freq = np.bincount(reports, minlength=k + 1)[1:] / n
expect = np.full(k, cfg.beta / k)
expect[1] += 1.0 - cfg.beta
print(f"\n{n} reports of true bin 2 under rr(k=4, eps=1):")
print("  observed:", np.array2string(freq, precision=4))
print("  expected:", np.array2string(expect, precision=4))

print(
    "\nBoth deployed randomizers audit exactly tight: no budget is left on"
    "\nthe table, and any post-processing of their reports (de-biasing,"
    "\ntree traversal, pair aggregation) is privacy-free. Enumeration is"
    "\ncapped at k = 64 and l = 6; past that, trust the algebra, not a scan."
)
