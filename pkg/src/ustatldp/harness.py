"""Experiment orchestration: synthetic data, repeated-run error estimation,
theoretical-bound attachment, and an exact LDP verifier for the discrete
randomizers.

Tasks tie a data shape to its statistic: "gini" and "collision" on scalar
samples, "kendall" on bivariate samples over a discrete grid, "auc" on
scored samples. Protocols: "exact" (non-private), "rr" (randomized response
on bins / grid cells), "rr-auc" (randomized response on score bins with the
two-sample aggregate), "auc" (hierarchical-histogram protocol), "pairs2pc"
(subsampled pairs), "allpairs" (all-pairs baseline under advanced
composition).

Kernels with values in [-1, 1] (Kendall) are affinely mapped to [0, 1]
before Laplace perturbation and the estimate is mapped back; attached MSE
bounds carry the resulting factor 4.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ustatldp.auc_protocol import AucConfig, run_auc_protocol
from ustatldp.freq_oracle import SPLIT_ADVANCED
from ustatldp.kernels import (
    Kernel,
    Sample,
    collision_matrix,
    exact_auc,
    exact_ustat,
    gini_kernel,
    grid_cell_index,
    kendall_grid_matrix,
    kendall_kernel,
    matrix_kernel,
    pair_sample,
    population_moments,
    scalar_sample,
    scored_sample,
    validate_distribution,
)
from ustatldp.pairwise_2pc import (
    allpairs_baseline,
    allpairs_epsilon_per_pair,
    run_pairs_protocol,
    subsampling_mse,
)
from ustatldp.quantization import (
    QuantizedKernel,
    midpoint_kernel,
    quantize_array,
    recommended_k,
    uniform_scheme,
)
from ustatldp.rr_protocol import (
    RRConfig,
    rr_auc_estimate,
    rr_randomize_array,
    rr_variance_bound,
    run_rr_protocol,
)

TASKS = ("auc", "kendall", "gini", "collision")
PROTOCOLS = ("exact", "rr", "rr-auc", "auc", "pairs2pc", "allpairs")


class BadSpec(ValueError):
    """Malformed synthetic data specification."""


class TooLargeToEnumerate(ValueError):
    """verify_ldp only enumerates desk-scale randomizers."""


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent deterministic generator for a (seed, key...) path."""
    return np.random.default_rng([int(seed), *[int(k) for k in keys]])


@dataclass(frozen=True)
class SyntheticSpec:
    """Synthetic dataset family.

    kind "auc-one" | "ur" | "ithdigit": scored data over [0..d-1], d a power
    of two, with n_plus/n_minus per class. kind "discrete": n scalar draws
    from probs (bins 1..k). kind "bivariate-grid": n draws from a joint grid
    table (Kendall-style ratings).
    """

    kind: str
    d: int = 0
    n_plus: int = 0
    n_minus: int = 0
    n: int = 0
    probs: Optional[tuple] = None
    joint: Optional[tuple] = None

    def __post_init__(self):
        if self.kind in ("auc-one", "ur", "ithdigit"):
            if self.d < 2 or self.d & (self.d - 1) != 0:
                raise BadSpec(f"d must be a power of two >= 2, got {self.d}")
            if self.n_plus < 1 or self.n_minus < 1:
                raise BadSpec("need at least one user per class")
        elif self.kind == "discrete":
            if self.probs is None or self.n < 1:
                raise BadSpec("discrete spec needs probs and n >= 1")
            try:
                validate_distribution(np.asarray(self.probs))
            except ValueError as exc:
                raise BadSpec(str(exc)) from None
        elif self.kind == "bivariate-grid":
            if self.joint is None or self.n < 1:
                raise BadSpec("bivariate-grid spec needs a joint table and n >= 1")
            try:
                validate_distribution(np.asarray(self.joint).ravel())
            except ValueError as exc:
                raise BadSpec(str(exc)) from None
        else:
            raise BadSpec(f"unknown spec kind {self.kind!r}")


def fp(s: float, d: int) -> int:
    """Fixed-point discretization of a score into [0..d-1]."""
    return int(min(d - 1, max(0, math.floor(s * d))))


def generate(spec: SyntheticSpec, rng: np.random.Generator) -> Sample:
    if spec.kind == "auc-one":
        scores = np.r_[np.full(spec.n_plus, spec.d - 1), np.zeros(spec.n_minus)]
    elif spec.kind == "ithdigit":
        scores = np.r_[
            np.full(spec.n_plus, fp(1e-4, spec.d)),
            np.full(spec.n_minus, fp(0.0, spec.d)),
        ]
    elif spec.kind == "ur":
        scores = rng.integers(0, spec.d, size=spec.n_plus + spec.n_minus)
    elif spec.kind == "discrete":
        p = np.asarray(spec.probs)
        return scalar_sample(rng.choice(len(p), size=spec.n, p=p) + 1)
    elif spec.kind == "bivariate-grid":
        joint = np.asarray(spec.joint, dtype=float)
        flat = rng.choice(joint.size, size=spec.n, p=joint.ravel())
        ys, zs = np.divmod(flat, joint.shape[1])
        return pair_sample(ys, zs)
    else:  # unreachable after validation
        raise BadSpec(spec.kind)
    labels = np.r_[np.ones(spec.n_plus), -np.ones(spec.n_minus)]
    return scored_sample(scores, labels)


def population_truth(spec: SyntheticSpec, task: str) -> float:
    """Population value of the task statistic under the spec's distribution."""
    if task == "auc":
        if spec.kind == "auc-one":
            return 1.0
        if spec.kind == "ithdigit":
            return 1.0 if fp(1e-4, spec.d) > 0 else 0.0
        if spec.kind == "ur":
            return (1.0 - 1.0 / spec.d) / 2.0
        raise BadSpec(f"{spec.kind} has no AUC population value")
    if task == "collision" and spec.kind == "discrete":
        p = np.asarray(spec.probs)
        return float(p @ p)
    if task == "kendall" and spec.kind == "bivariate-grid":
        u, _, _ = _kendall_grid_moments(spec)
        return u
    raise BadSpec(f"no population value for task {task!r} on spec {spec.kind!r}")


def _kendall_grid_moments(spec: SyntheticSpec) -> tuple[float, float, float]:
    joint = np.asarray(spec.joint, dtype=float)
    ky, kz = joint.shape
    A = kendall_grid_matrix(np.arange(ky), np.arange(kz))
    return population_moments(A, joint.ravel())


# ---------------------------------------------------------------------------
# task plumbing


def _exact_stat(task: str, sample: Sample) -> float:
    if task == "auc":
        return exact_auc(sample)
    if task == "gini":
        return exact_ustat(gini_kernel(), sample)
    if task == "kendall":
        return exact_ustat(kendall_kernel(), sample)
    if task == "collision":
        return exact_ustat(_collision_bin_kernel(sample), sample)
    raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")


def _grid_axes(sample: Sample) -> tuple[np.ndarray, np.ndarray]:
    return np.unique(sample.values[:, 0]), np.unique(sample.values[:, 1])


def _to_unit_kernel(kernel: Kernel) -> Kernel:
    """Affine map of a [-1,1] kernel onto [0,1]."""
    inner = kernel.pair_fn
    return Kernel(kernel.name + "01", (0.0, 1.0), lambda a, b: (inner(a, b) + 1.0) / 2.0)


def _rr_setup(task: str, sample: Sample, params: dict):
    """Returns (config, quantized kernel, bins-or-none, scheme, range width)."""
    epsilon = params["epsilon"]
    if task == "gini":
        k = int(params.get("k") or recommended_k(sample.n, 1.0, min(epsilon, 100.0)))
        scheme = uniform_scheme(k)
        qk = midpoint_kernel(gini_kernel(), scheme)
        return RRConfig(k, epsilon), qk, None, scheme, 1.0
    if task == "collision":
        k = int(params.get("k") or sample.values.max())
        qk = QuantizedKernel(k, "exact-on-bins", collision_matrix(k))
        return RRConfig(k, epsilon), qk, sample.values.astype(int), None, 1.0
    if task == "kendall":
        yv, zv = _grid_axes(sample)
        A = kendall_grid_matrix(yv, zv)
        yb = np.searchsorted(yv, sample.values[:, 0]) + 1
        zb = np.searchsorted(zv, sample.values[:, 1]) + 1
        cells = grid_cell_index(yb, zb, kz=len(zv))
        qk = QuantizedKernel(len(yv) * len(zv), "exact-on-bins", A)
        return RRConfig(qk.k, epsilon), qk, cells, None, 2.0
    raise ValueError(f"protocol 'rr' does not support task {task!r}")


def _run_once(task: str, protocol: str, sample: Sample, params: dict,
              rng: np.random.Generator) -> tuple[float, Optional[float]]:
    """One protocol execution; returns (estimate, theoretical MSE bound)."""
    if protocol == "exact":
        return _exact_stat(task, sample), 0.0

    if protocol == "rr":
        cfg, qk, bins, scheme, width = _rr_setup(task, sample, params)
        data = sample if bins is None else scalar_sample(bins)
        est = run_rr_protocol(cfg, qk, data, rng, scheme=scheme)
        return est, width**2 * rr_variance_bound(cfg, sample.n)

    if protocol == "rr-auc":
        if task != "auc":
            raise ValueError("protocol 'rr-auc' only applies to task 'auc'")
        d = int(params["d"])
        cfg = RRConfig(d, params["epsilon"])
        pos = sample.pos_scores.astype(int) + 1
        neg = sample.neg_scores.astype(int) + 1
        est = rr_auc_estimate(
            cfg,
            rr_randomize_array(cfg, pos, rng),
            rr_randomize_array(cfg, neg, rng),
        )
        return est, None

    if protocol == "auc":
        if task != "auc":
            raise ValueError("protocol 'auc' only applies to task 'auc'")
        cfg = AucConfig(
            alpha=int(params["alpha"]),
            epsilon=params["epsilon"],
            delta=params.get("delta", 0.0),
            split=params.get("split", SPLIT_ADVANCED),
            a=params.get("a", "auto"),
            variant=params.get("variant", "half"),
        )
        auc, report = run_auc_protocol(sample, cfg, rng)
        return auc, report["bound_auc"]

    if protocol == "pairs2pc":
        P = int(params.get("P", 1))
        epsilon = params["epsilon"]
        mechanism = params.get("mechanism", "laplace")
        if task == "kendall" and mechanism == "laplace":
            est01 = run_pairs_protocol(_to_unit_kernel(kendall_kernel()), sample,
                                       P, epsilon, rng)
            return 2.0 * est01 - 1.0, _pairs_bound(task, sample, params)
        kernel = _pair_kernel(task, sample)
        if kernel is None:
            raise ValueError(f"protocol 'pairs2pc' does not support task {task!r}")
        est = run_pairs_protocol(kernel, sample, P, epsilon, rng, mechanism=mechanism)
        return est, _pairs_bound(task, sample, params)

    if protocol == "allpairs":
        epsilon, delta = params["epsilon"], params.get("delta", 1e-8)
        if task == "kendall":
            est01 = allpairs_baseline(_to_unit_kernel(kendall_kernel()), sample,
                                      epsilon, delta, rng)
            est = 2.0 * est01 - 1.0
            width = 2.0
        else:
            kernel = _pair_kernel(task, sample)
            if kernel is None:
                raise ValueError(f"protocol 'allpairs' does not support task {task!r}")
            est = allpairs_baseline(kernel, sample, epsilon, delta, rng)
            width = 1.0
        if math.isinf(epsilon):
            return est, 0.0
        m = sample.n * (sample.n - 1) // 2
        b = 1.0 / allpairs_epsilon_per_pair(sample.n, epsilon, delta)
        return est, width**2 * 2.0 * b * b / m

    raise ValueError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")


def _pair_kernel(task: str, sample: Sample) -> Optional[Kernel]:
    """Kernel for the pair-based protocols, built only for the task at hand
    (the collision one inspects the data and chokes on non-bin values)."""
    if task == "gini":
        return gini_kernel()
    if task == "kendall":
        return kendall_kernel()
    if task == "collision":
        return _collision_bin_kernel(sample)
    return None


def _collision_bin_kernel(sample: Sample) -> Kernel:
    k = int(sample.values.max())
    if k < 1:
        raise ValueError("collision task needs 1-based integer bins")
    return matrix_kernel(collision_matrix(k))


def _pairs_bound(task: str, sample: Sample, params: dict) -> Optional[float]:
    """Closed-form subsampled-pairs MSE when population moments are known."""
    spec = params.get("population_spec")
    if spec is None:
        return None
    P, epsilon = int(params.get("P", 1)), params["epsilon"]
    if task == "kendall" and spec.kind == "bivariate-grid":
        # moments of the [0,1]-mapped kernel, then scale the MSE back by 4
        joint = np.asarray(spec.joint, dtype=float)
        ky, kz = joint.shape
        A01 = (kendall_grid_matrix(np.arange(ky), np.arange(kz)) + 1.0) / 2.0
        _, z1, z2 = population_moments(A01, joint.ravel())
        return 4.0 * subsampling_mse(sample.n, P, epsilon, z1, z2)
    if task == "collision" and spec.kind == "discrete":
        A = collision_matrix(len(spec.probs))
        _, z1, z2 = population_moments(A, np.asarray(spec.probs))
        return subsampling_mse(sample.n, P, epsilon, z1, z2)
    return None


# ---------------------------------------------------------------------------
# experiment loop


@dataclass
class ExperimentReport:
    protocol: str
    task: str
    config: dict
    true_value: float
    per_rep: list  # (estimate, abs_error) pairs
    empirical_mse: float
    theoretical_bound: Optional[float]
    wall_time: float = field(default=0.0, compare=False)


def run_experiment(
    protocol: str,
    task: str,
    data,
    reps: int,
    resample: bool,
    seed: int,
    **params,
) -> ExperimentReport:
    """Run `protocol` on `task` data `reps` times.

    data is a Sample (fixed) or a SyntheticSpec. With resample=False errors
    are measured against the exact statistic of the one realized sample; with
    resample=True a fresh sample is generated per repetition and errors are
    measured against the population value, so data must be a SyntheticSpec.

    Determinism: repetition r uses substream (seed, 1+r, 0) for data and
    (seed, 1+r, 1) for protocol randomness, so all configs sharing a seed see
    identical data.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    start = time.monotonic()
    if resample:
        if not isinstance(data, SyntheticSpec):
            raise BadSpec("resample=True needs a SyntheticSpec to redraw from")
        truth = population_truth(data, task)
        fixed = None
    else:
        fixed = generate(data, substream(seed, 0)) if isinstance(data, SyntheticSpec) else data
        truth = _exact_stat(task, fixed)
    if isinstance(data, SyntheticSpec):
        params = dict(params, population_spec=data)
    per_rep = []
    bound = None
    for r in range(reps):
        sample = generate(data, substream(seed, 1 + r, 0)) if resample else fixed
        est, bound = _run_once(task, protocol, sample, params, substream(seed, 1 + r, 1))
        per_rep.append((float(est), float(abs(est - truth))))
    mse = float(np.mean([e * e for _, e in per_rep]))
    config = {
        k: v for k, v in params.items() if k != "population_spec"
    }
    config.update({"reps": reps, "resample": resample, "seed": seed,
                   "n": fixed.n if fixed is not None else data.n or (data.n_plus + data.n_minus)})
    return ExperimentReport(
        protocol=protocol,
        task=task,
        config=config,
        true_value=float(truth),
        per_rep=per_rep,
        empirical_mse=mse,
        theoretical_bound=None if bound is None else float(bound),
        wall_time=time.monotonic() - start,
    )


def compare_protocols(
    task: str, configs: Sequence[dict], data, reps: int, seed: int
) -> list[ExperimentReport]:
    """One report per config dict ({'protocol': ..., params...}); every run
    shares the seed, so per-rep data draws are identical across configs."""
    if not configs:
        raise ValueError("configs must be nonempty")
    out = []
    for cfg in configs:
        cfg = dict(cfg)
        protocol = cfg.pop("protocol")
        resample = cfg.pop("resample", False)
        out.append(run_experiment(protocol, task, data, reps, resample, seed, **cfg))
    return out


def report_to_json(report: ExperimentReport) -> str:
    """Canonical JSON; wall_time is excluded so reruns are byte-comparable."""
    payload = {
        "protocol": report.protocol,
        "task": report.task,
        "config": report.config,
        "true_value": report.true_value,
        "per_rep": [[e, a] for e, a in report.per_rep],
        "empirical_mse": report.empirical_mse,
        "theoretical_bound": report.theoretical_bound,
    }
    return json.dumps(payload, sort_keys=True)


def report_to_csv(report: ExperimentReport, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rep", "estimate", "true", "abs_error"])
        for r, (est, err) in enumerate(report.per_rep):
            writer.writerow([r, repr(est), repr(report.true_value), repr(err)])


# ---------------------------------------------------------------------------
# exact privacy audit


def verify_ldp(randomizer: tuple, epsilon_claimed: float) -> tuple[float, bool]:
    """Exact epsilon of a discrete local randomizer by full enumeration.

    Descriptors: ("rr", k, epsilon), ("hadamard", l, epsilon),
    ("identity", k). Returns (epsilon_actual, epsilon_actual <= claimed+1e-9);
    epsilon_actual is inf when some output separates two inputs perfectly.
    """
    kind = randomizer[0]
    if kind == "rr":
        _, k, epsilon = randomizer
        if k > 64:
            raise TooLargeToEnumerate(f"rr enumeration capped at k=64, got {k}")
        beta = RRConfig(int(k), epsilon).beta
        table = np.full((k, k), beta / k) + (1.0 - beta) * np.eye(k)
    elif kind == "hadamard":
        _, l, epsilon = randomizer
        if l > 6:
            raise TooLargeToEnumerate(f"hadamard enumeration capped at l=6, got {l}")
        d = 2**l
        p = 1.0 if math.isinf(epsilon) else math.exp(epsilon) / (1.0 + math.exp(epsilon))
        # outputs are (j, sign): column j*2 is sign +, j*2+1 is sign -
        table = np.empty((d, 2 * d))
        for x in range(d):
            for j in range(d):
                char = 1 - 2 * (bin(j & x).count("1") % 2)
                table[x, 2 * j] = (p if char > 0 else 1.0 - p) / d
                table[x, 2 * j + 1] = (p if char < 0 else 1.0 - p) / d
    elif kind == "identity":
        _, k = randomizer
        if k > 64:
            raise TooLargeToEnumerate(f"identity enumeration capped at k=64, got {k}")
        table = np.eye(k)
    else:
        raise ValueError(f"unknown randomizer kind {kind!r}")

    assert np.allclose(table.sum(axis=1), 1.0, atol=1e-12)
    hi = table.max(axis=0)
    lo = table.min(axis=0)
    live = hi > 0.0
    if np.any(live & (lo == 0.0)):
        eps_actual = math.inf
    else:
        eps_actual = float(np.max(np.log(hi[live] / lo[live]))) if live.any() else 0.0
    return eps_actual, eps_actual <= epsilon_claimed + 1e-9
