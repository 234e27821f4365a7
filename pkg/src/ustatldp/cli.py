"""Command-line frontend.

Subcommands: exact (non-private statistic), rr (randomized response), auc
(hierarchical-histogram AUC), pairs2pc (subsampled noisy pairs), experiment
(harness sweep over any protocol), privacy-check (exact LDP audit).

Input is headed CSV — `x` for scalar data, `y,z` for bivariate data,
`score,label` for scored data with labels in {-1, +1}. Reports go to stdout
or --output as JSON/CSV; given the same arguments and seed the bytes are
identical across runs. The default seed comes from USTATLDP_SEED.

Exit codes: 0 success, 2 malformed input (CSV or flags), 3 violated
precondition (bad parameter combinations, too-small samples, enumeration
caps), 4 unexpected runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ustatldp.harness import (
    SyntheticSpec,
    generate,
    report_to_csv,
    report_to_json,
    run_experiment,
    substream,
    verify_ldp,
)
from ustatldp.kernels import Sample, pair_sample, scalar_sample, scored_sample

SCHEMAS = {"scalar": ["x"], "bivariate": ["y", "z"], "scored": ["score", "label"]}
_TASK_SCHEMA = {"gini": "scalar", "collision": "scalar", "kendall": "bivariate",
                "auc": "scored"}


class ParseError(ValueError):
    """Malformed CSV content; message carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SchemaError(ValueError):
    """CSV header does not match the requested schema."""


def ingest_csv(path: str, schema: str) -> Sample:
    if schema not in SCHEMAS:
        raise SchemaError(f"unknown schema {schema!r}; expected one of {sorted(SCHEMAS)}")
    want = SCHEMAS[schema]
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != want:
        raise SchemaError(f"expected header {','.join(want)!r} in {path}")
    parsed = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(want):
            raise ParseError(i, f"expected {len(want)} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise ParseError(i, f"non-numeric field in {row!r}") from None
        if schema == "scored" and vals[1] not in (-1.0, 1.0):
            raise ParseError(i, f"label must be +1 or -1, got {row[1]!r}")
        parsed.append(vals)
    if not parsed:
        raise ParseError(1, "no data rows")
    arr = np.asarray(parsed)
    if schema == "scalar":
        return scalar_sample(arr[:, 0])
    if schema == "bivariate":
        return pair_sample(arr[:, 0], arr[:, 1])
    return scored_sample(arr[:, 0], arr[:, 1])


def emit(sample: Sample, path: str) -> None:
    """Inverse of ingest_csv: emit then ingest reproduces the sample."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if sample.kind == "scalar":
            writer.writerow(["x"])
            for v in sample.values:
                writer.writerow([repr(float(v))])
        elif sample.kind == "pair":
            writer.writerow(["y", "z"])
            for y, z in sample.values:
                writer.writerow([repr(float(y)), repr(float(z))])
        else:
            writer.writerow(["score", "label"])
            for s, lab in zip(sample.scores, sample.labels):
                writer.writerow([repr(float(s)), repr(float(lab))])


@dataclass
class CliConfig:
    """Normalized arguments for one dispatch; mirrors the flag surface."""

    subcommand: str
    kernel: str = "gini"
    task: str = "gini"
    protocol: str = "exact"
    epsilon: float = 1.0
    delta: float = 0.0
    k: Optional[int] = None
    alpha: int = 10
    d: Optional[int] = None
    reps: int = 1
    seed: int = 0
    split: str = "budget-advanced"
    variant: str = "half"
    a: Union[str, float] = "auto"
    P: int = 1
    mechanism: str = "laplace"
    resample: bool = False
    input: Optional[str] = None
    output: Optional[str] = None
    format: str = "json"
    # privacy-check
    randomizer: str = "rr"
    l: int = 1
    claimed: Optional[float] = None
    # synthetic data
    spec: Optional[str] = None
    n: int = 0
    n_plus: int = 0
    n_minus: int = 0
    probs: Optional[str] = None
    joint: Optional[str] = None
    extra: dict = field(default_factory=dict)


_PARAM_KEYS = {
    "exact": (),
    "rr": ("epsilon", "k"),
    "rr-auc": ("epsilon", "d"),
    "auc": ("epsilon", "alpha", "delta", "split", "variant", "a"),
    "pairs2pc": ("epsilon", "P", "mechanism"),
    "allpairs": ("epsilon", "delta"),
}


def _load_data(cfg: CliConfig, task: str):
    if cfg.input is not None:
        return ingest_csv(cfg.input, _TASK_SCHEMA[task])
    if cfg.spec is None:
        raise ValueError("provide --input or a synthetic --spec")
    kwargs = dict(kind=cfg.spec, d=cfg.d or 0, n=cfg.n,
                  n_plus=cfg.n_plus, n_minus=cfg.n_minus)
    if cfg.probs is not None:
        kwargs["probs"] = tuple(float(p) for p in cfg.probs.split(","))
    if cfg.joint is not None:
        kwargs["joint"] = tuple(
            tuple(float(p) for p in row.split(",")) for row in cfg.joint.split(";")
        )
    return SyntheticSpec(**kwargs)


def _protocol_params(cfg: CliConfig, protocol: str) -> dict:
    params = {key: getattr(cfg, key) for key in _PARAM_KEYS[protocol]}
    if protocol == "rr-auc":
        if params["d"] is None:
            raise ValueError("rr-auc needs --d (score domain size)")
    if protocol == "rr" and params.get("k") is None:
        del params["k"]  # task-specific default applies
    return params


def _materialize(cfg: CliConfig, task: str) -> Sample:
    data = _load_data(cfg, task)
    if isinstance(data, SyntheticSpec):
        return generate(data, substream(cfg.seed, 0))
    return data


def _write(text: str, path: Optional[str]) -> None:
    if path is None:
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _emit_report(report, cfg: CliConfig) -> None:
    if cfg.format == "csv":
        if cfg.output is None:
            raise ValueError("--format csv needs --output")
        report_to_csv(report, cfg.output)
    else:
        _write(report_to_json(report), cfg.output)


def dispatch(cfg: CliConfig) -> int:
    if cfg.subcommand == "exact":
        task = "auc" if cfg.kernel == "auc" else cfg.kernel
        data = _load_data(cfg, task)
        report = run_experiment("exact", task, data, 1, False, cfg.seed)
        _write(f"{report.true_value:.4f}", cfg.output)
        return 0

    if cfg.subcommand == "rr":
        task = cfg.kernel
        data = _load_data(cfg, task)
        params = _protocol_params(cfg, "rr")
        report = run_experiment("rr", task, data, cfg.reps, cfg.resample,
                                cfg.seed, **params)
        if cfg.output is None and cfg.reps == 1:
            print(repr(report.per_rep[0][0]))
        else:
            _emit_report(report, cfg)
        return 0

    if cfg.subcommand == "auc":
        data = _load_data(cfg, "auc")
        params = _protocol_params(cfg, "auc")
        report = run_experiment("auc", "auc", data, cfg.reps, cfg.resample,
                                cfg.seed, **params)
        payload = json.loads(report_to_json(report))
        payload["mean_abs_error"] = float(np.mean([e for _, e in report.per_rep]))
        _write(json.dumps(payload, sort_keys=True), cfg.output)
        return 0

    if cfg.subcommand == "pairs2pc":
        task = cfg.kernel
        data = _load_data(cfg, task)
        params = _protocol_params(cfg, "pairs2pc")
        report = run_experiment("pairs2pc", task, data, cfg.reps, cfg.resample,
                                cfg.seed, **params)
        if cfg.output is None and cfg.reps == 1:
            print(repr(report.per_rep[0][0]))
        else:
            _emit_report(report, cfg)
        return 0

    if cfg.subcommand == "experiment":
        data = _load_data(cfg, cfg.task)
        params = _protocol_params(cfg, cfg.protocol)
        report = run_experiment(cfg.protocol, cfg.task, data, cfg.reps,
                                cfg.resample, cfg.seed, **params)
        _emit_report(report, cfg)
        return 0

    if cfg.subcommand == "privacy-check":
        if cfg.randomizer == "rr":
            descriptor = ("rr", cfg.k if cfg.k is not None else 2, cfg.epsilon)
        elif cfg.randomizer == "hadamard":
            descriptor = ("hadamard", cfg.l, cfg.epsilon)
        elif cfg.randomizer == "identity":
            descriptor = ("identity", cfg.k if cfg.k is not None else 2)
        else:
            raise ValueError(f"unknown randomizer {cfg.randomizer!r}")
        claimed = cfg.claimed if cfg.claimed is not None else cfg.epsilon
        actual, ok = verify_ldp(descriptor, claimed)
        _write(f"epsilon_actual={actual:.4f} {'PASS' if ok else 'FAIL'}", cfg.output)
        return 0

    raise ValueError(f"unknown subcommand {cfg.subcommand!r}")


def _a_flag(text: str) -> Union[str, float]:
    return text if text == "auto" else float(text)


def build_parser() -> argparse.ArgumentParser:
    seed_default = int(os.environ.get("USTATLDP_SEED", "0"))
    parser = argparse.ArgumentParser(
        prog="ustatldp",
        description="Locally private estimation of pairwise statistics.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, *, data=True):
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--output")
        if data:
            p.add_argument("--input", help="CSV path (header x | y,z | score,label)")
            p.add_argument("--spec", choices=["auc-one", "ur", "ithdigit",
                                              "discrete", "bivariate-grid"])
            p.add_argument("--d", type=int)
            p.add_argument("--n", type=int, default=0)
            p.add_argument("--n-plus", dest="n_plus", type=int, default=0)
            p.add_argument("--n-minus", dest="n_minus", type=int, default=0)
            p.add_argument("--probs", help="comma-separated bin probabilities")
            p.add_argument("--joint", help="semicolon-separated rows of a joint table")

    p = sub.add_parser("exact", help="non-private statistic of a CSV")
    p.add_argument("--kernel", choices=["gini", "kendall", "collision", "auc"],
                   default="gini")
    add_common(p)

    p = sub.add_parser("rr", help="randomized-response protocol")
    p.add_argument("--kernel", choices=["gini", "kendall", "collision"],
                   default="gini")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--resample", action="store_true")
    add_common(p)

    p = sub.add_parser("auc", help="hierarchical-histogram AUC protocol")
    p.add_argument("--alpha", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--split", choices=["budget-basic", "budget-advanced", "users"],
                   default="budget-advanced")
    p.add_argument("--variant", choices=["half", "zero"], default="half")
    p.add_argument("--a", type=_a_flag, default="auto")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--resample", action="store_true")
    add_common(p)

    p = sub.add_parser("pairs2pc", help="subsampled noisy-pair protocol")
    p.add_argument("--kernel", choices=["gini", "kendall", "collision"],
                   default="gini")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--P", type=int, default=1)
    p.add_argument("--mechanism", choices=["laplace", "rr2"], default="laplace")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--resample", action="store_true")
    add_common(p)

    p = sub.add_parser("experiment", help="repeated-run error estimation")
    p.add_argument("--task", choices=["auc", "kendall", "gini", "collision"],
                   required=True)
    p.add_argument("--protocol", choices=["exact", "rr", "rr-auc", "auc",
                                          "pairs2pc", "allpairs"], required=True)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=int, default=10)
    p.add_argument("--split", choices=["budget-basic", "budget-advanced", "users"],
                   default="budget-advanced")
    p.add_argument("--variant", choices=["half", "zero"], default="half")
    p.add_argument("--a", type=_a_flag, default="auto")
    p.add_argument("--P", type=int, default=1)
    p.add_argument("--mechanism", choices=["laplace", "rr2"], default="laplace")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--resample", action="store_true")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    add_common(p)

    p = sub.add_parser("privacy-check", help="exact epsilon of a local randomizer")
    p.add_argument("--randomizer", choices=["rr", "hadamard", "identity"],
                   required=True)
    p.add_argument("--epsilon", type=float, default=math.inf)
    p.add_argument("--claimed", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--l", type=int, default=1)
    add_common(p, data=False)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    fields = {f for f in CliConfig.__dataclass_fields__ if f != "extra"}
    cfg = CliConfig(**{k: v for k, v in vars(ns).items() if k in fields})
    try:
        return dispatch(cfg)
    except (ParseError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - boundary of the program
        print(f"error: {exc}", file=sys.stderr)
        return 4


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
