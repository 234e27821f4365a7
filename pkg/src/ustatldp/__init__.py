"""Locally differentially private estimation of degree-2 U-statistics.

Three protocol families, plus exact baselines and an experiment harness:

- quantization + k-ary randomized response for generic kernels
  (:mod:`ustatldp.quantization`, :mod:`ustatldp.rr_protocol`);
- hierarchical histograms over Hadamard-sketch frequency oracles for AUC
  (:mod:`ustatldp.freq_oracle`, :mod:`ustatldp.auc_protocol`);
- per-pair output perturbation over subsampled pairings
  (:mod:`ustatldp.pairwise_2pc`).
"""

from ustatldp.kernels import (
    Kernel,
    Sample,
    TooFewPoints,
    auc_indicator_kernel,
    collision_kernel,
    eval_kernel,
    exact_auc,
    exact_ustat,
    gini_kernel,
    kendall_kernel,
    matrix_kernel,
    pair_sample,
    population_moments,
    renyi2_entropy,
    scalar_sample,
    scored_sample,
    ustat_variance,
)

__all__ = [
    "Kernel",
    "Sample",
    "TooFewPoints",
    "auc_indicator_kernel",
    "collision_kernel",
    "eval_kernel",
    "exact_auc",
    "exact_ustat",
    "gini_kernel",
    "kendall_kernel",
    "matrix_kernel",
    "pair_sample",
    "population_moments",
    "renyi2_entropy",
    "scalar_sample",
    "scored_sample",
    "ustat_variance",
]

__version__ = "0.1.0"
