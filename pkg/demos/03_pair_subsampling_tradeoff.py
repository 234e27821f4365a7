"""
How many pairs should each user join?
=====================================

In the pair-subsampling protocol every user enters P secure two-party
evaluations, and each evaluation releases one kernel value under a budget of
eps/P. Raising P averages over more pairs (less subsampling variance) but
buys noisier releases (more perturbation variance). The closed-form MSE makes
the trade explicit:

    mse(P) = sampling(P; zeta1, zeta2) + 4 P / (n eps^2)

and its minimizer grows like eps * sqrt(zeta2 / 2) once zeta1 vanishes. We
use the collision kernel on two equally likely symbols - the textbook
degenerate case, zeta1 = 0 - so the crossover from P = 1 to P > 1 is
visible at budgets one actually encounters.
"""

import numpy as np

from ustatldp.kernels import (
    collision_kernel,
    collision_matrix,
    population_moments,
    scalar_sample,
)
from ustatldp.pairwise_2pc import (
    allpairs_baseline,
    optimal_P_hint,
    run_pairs_protocol,
    subsampling_mse,
)

n = 2000
R = 200
probs = (0.5, 0.5)
kernel = collision_kernel()
truth, zeta1, zeta2 = population_moments(collision_matrix(len(probs)), probs)
print(f"collision rate of two uniform bits: U = {truth}, "
      f"zeta1 = {zeta1}, zeta2 = {zeta2}\n")


def draw(seed_tail):
    g = np.random.default_rng([31, *seed_tail])
    return g, scalar_sample(g.choice(len(probs), size=n, p=probs).astype(float))


print(f"{'eps':>5} {'P':>3} {'rmse (sim)':>11} {'rmse (formula)':>15}")
for eps in (1.0, 4.0, 16.0):
    for P in (1, 2, 4, 8, 16):
        ests = []
        for r in range(R):
            g, sample = draw((int(eps), P, r))
            ests.append(run_pairs_protocol(kernel, sample, P, eps, g))
        rmse = float(np.sqrt(np.mean((np.asarray(ests) - truth) ** 2)))
        pred = np.sqrt(subsampling_mse(n, P, eps, zeta1, zeta2))
        print(f"{eps:>5} {P:>3} {rmse:>11.5f} {pred:>15.5f}")
    best = optimal_P_hint(zeta1, zeta2, eps, n, P_max=64)
    print(f"      -> closed-form optimum within P <= 64: P = {best}\n")

# A kernel with zeta1 > 0 hits the complete-U variance floor much earlier;
# with the Gini moments from the first demo even eps = 16 stays at P = 1.
print("same budget, Gini moments (zeta1 = 0.0037, zeta2 = 0.0192): "
      f"P = {optimal_P_hint(0.0037, 0.0192, 16.0, n, P_max=64)}\n")

# The naive alternative keeps every pair but must split the budget across a
# user's n-1 evaluations (advanced composition, delta = 1e-8).
print("all-pairs baseline at the same budgets:")
for eps in (1.0, 4.0, 16.0):
    ests = []
    for r in range(R):
        g, sample = draw((90 + int(eps), r))
        ests.append(allpairs_baseline(kernel, sample, eps, 1e-8, g))
    rmse = float(np.sqrt(np.mean((np.asarray(ests) - truth) ** 2)))
    print(f"  eps={eps}: rmse {rmse:.5f}")

# Because the kernel is an indicator, the secure evaluation can end in a
# single randomized-response bit instead of a Laplace draw.
print("\nbit release vs Laplace release at P = 1:")
print(f"{'eps':>5} {'laplace rmse':>13} {'rr bit rmse':>12}")
for eps in (0.5, 2.0):
    out = []
    for mech in ("laplace", "rr2"):
        ests = []
        for r in range(2 * R):
            g, sample = draw((70 + int(eps * 10), r))
            ests.append(run_pairs_protocol(kernel, sample, 1, eps, g, mechanism=mech))
        out.append(float(np.sqrt(np.mean((np.asarray(ests) - truth) ** 2))))
    print(f"{eps:>5} {out[0]:>13.5f} {out[1]:>12.5f}")

print(
    "\nAt eps = 1 the release noise dominates and one pair per user is"
    "\nalready optimal; by eps = 16 the trade has flipped and the error curve"
    "\nbottoms out around P = 6. The all-pairs baseline loses at every"
    "\nbudget because its per-release share shrinks like 1/sqrt(n). When the"
    "\nkernel is an indicator, releasing a randomized bit instead of a"
    "\nLaplace value buys back another factor of about 1.5 in rmse."
)
