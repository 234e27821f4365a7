"""
Randomized response for the Gini mean difference
================================================

Each user holds one number in [0, 1]. We round it to one of k bins, push the
bin through k-ary randomized response, and de-bias pairs of reports on the
server. The demo sweeps the privacy parameter and the grid size and prints
empirical error next to the two analytic handles: the variance bound of the
private aggregate and the plug-in proxy for the rounding bias.
"""

import numpy as np

from ustatldp.kernels import exact_ustat, gini_kernel, scalar_sample
from ustatldp.quantization import (
    estimate_delta,
    midpoint_kernel,
    quantize_array,
    uniform_scheme,
)
from ustatldp.rr_protocol import RRConfig, rr_variance_bound, run_rr_protocol

rng = np.random.default_rng(11)
n = 5000
R = 50

# A mildly skewed population so the Gini value is not a round number.
xs = rng.beta(2.0, 5.0, size=n)
sample = scalar_sample(xs)
truth = exact_ustat(gini_kernel(), sample)
print(f"n = {n} users, exact Gini mean difference = {truth:.4f}\n")

print(f"{'eps':>5} {'k':>4} {'mean est':>9} {'rmse':>8} {'var bound':>10} {'bias proxy':>10}")
for eps in (0.5, 1.0, 2.0, 4.0):
    for k in (4, 16):
        cfg = RRConfig(k, eps)
        scheme = uniform_scheme(k)
        qk = midpoint_kernel(gini_kernel(), scheme)
        ests = [
            run_rr_protocol(cfg, qk, sample,
                            np.random.default_rng([11, int(eps * 10), k, r]),
                            scheme=scheme)
            for r in range(R)
        ]
        rmse = float(np.sqrt(np.mean((np.asarray(ests) - truth) ** 2)))
        # The bias proxy needs a bin histogram; the noise-free one is close
        # enough for a demo table.
        counts = np.bincount(quantize_array(scheme, xs), minlength=k + 1)[1:]
        bias = estimate_delta(qk, np.maximum(counts, 1))
        print(f"{eps:>5} {k:>4} {np.mean(ests):>9.4f} {rmse:>8.4f} "
              f"{rr_variance_bound(cfg, n):>10.4f} {bias:>10.5f}")

print(
    "\nReading the table: at small eps the report noise dominates and small k"
    "\nwins; as eps grows the noise shrinks and the rounding bias of a coarse"
    "\ngrid becomes the limiting term, so larger k takes over."
)
