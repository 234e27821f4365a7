import json
import math

import numpy as np
import pytest

from ustatldp.harness import (
    BadSpec,
    SyntheticSpec,
    TooLargeToEnumerate,
    compare_protocols,
    fp,
    generate,
    population_truth,
    report_to_csv,
    report_to_json,
    run_experiment,
    substream,
    verify_ldp,
)
from ustatldp.kernels import exact_auc, exact_ustat, kendall_kernel, scalar_sample


def test_fp_discretization():
    assert fp(0.0, 8) == 0
    assert fp(0.999, 8) == 7
    assert fp(1.0, 8) == 7  # clamped to the top cell
    assert fp(0.5, 8) == 4
    assert fp(1e-4, 2**13) == 0
    assert fp(1e-4, 2**14) == 1


def test_generate_auc_one_frozen():
    sam = generate(SyntheticSpec("auc-one", d=16, n_plus=3, n_minus=3), substream(0))
    assert sam.scores.tolist() == [15.0, 15.0, 15.0, 0.0, 0.0, 0.0]
    assert sam.labels.tolist() == [1.0, 1.0, 1.0, -1.0, -1.0, -1.0]
    assert exact_auc(sam) == 1.0


def test_generate_ithdigit_straddles_quantization_knee():
    lo = generate(SyntheticSpec("ithdigit", d=2**13, n_plus=4, n_minus=4), substream(0))
    hi = generate(SyntheticSpec("ithdigit", d=2**14, n_plus=4, n_minus=4), substream(0))
    assert exact_auc(lo) == 0.0  # positives collapse onto the negatives' cell
    assert exact_auc(hi) == 1.0


def test_generate_ur_range_and_labels():
    spec = SyntheticSpec("ur", d=8, n_plus=50, n_minus=70)
    sam = generate(spec, substream(3))
    assert sam.n == 120
    assert set(np.unique(sam.labels)) == {-1.0, 1.0}
    assert sam.scores.min() >= 0 and sam.scores.max() <= 7


def test_generate_discrete_and_grid():
    sam = generate(SyntheticSpec("discrete", probs=(0.7, 0.2, 0.1), n=5000), substream(1))
    assert sam.values.min() >= 1 and sam.values.max() <= 3
    freq = np.bincount(sam.values.astype(int), minlength=4)[1:] / 5000
    assert np.all(np.abs(freq - [0.7, 0.2, 0.1]) < 0.03)

    joint = ((0.5, 0.0), (0.25, 0.25))
    pairs = generate(SyntheticSpec("bivariate-grid", joint=joint, n=2000), substream(2))
    assert pairs.values.shape == (2000, 2)
    assert not np.any((pairs.values[:, 0] == 0) & (pairs.values[:, 1] == 1))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="auc-one", d=12, n_plus=1, n_minus=1),  # not a power of two
        dict(kind="ur", d=1, n_plus=1, n_minus=1),
        dict(kind="ithdigit", d=16, n_plus=0, n_minus=1),
        dict(kind="discrete", n=10),  # probs missing
        dict(kind="discrete", probs=(0.5, 0.6), n=10),
        dict(kind="bivariate-grid", joint=((0.5, 0.1), (0.1, 0.1)), n=10),
        dict(kind="nope", n=10),
    ],
)
def test_bad_specs_rejected(kwargs):
    with pytest.raises(BadSpec):
        SyntheticSpec(**kwargs)


def test_population_truth_values():
    assert population_truth(SyntheticSpec("auc-one", d=16, n_plus=1, n_minus=1), "auc") == 1.0
    assert population_truth(SyntheticSpec("ithdigit", d=2**13, n_plus=1, n_minus=1), "auc") == 0.0
    assert population_truth(SyntheticSpec("ithdigit", d=2**14, n_plus=1, n_minus=1), "auc") == 1.0
    # P(X > Y) for iid uniforms on d points is (1 - 1/d)/2
    assert population_truth(SyntheticSpec("ur", d=16, n_plus=1, n_minus=1), "auc") == 0.46875
    assert population_truth(
        SyntheticSpec("discrete", probs=(0.5, 0.25, 0.25), n=5), "collision"
    ) == pytest.approx(0.375)
    # exchangeable joint -> concordant and discordant pairs balance out
    uni = tuple((1 / 9,) * 3 for _ in range(3))
    assert population_truth(
        SyntheticSpec("bivariate-grid", joint=uni, n=5), "kendall"
    ) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(BadSpec):
        population_truth(SyntheticSpec("discrete", probs=(1.0,), n=5), "gini")


def test_exact_protocol_has_zero_error():
    spec = SyntheticSpec("discrete", probs=(0.5, 0.5), n=40)
    rep = run_experiment("exact", "collision", spec, 3, False, 7)
    assert rep.empirical_mse == 0.0
    assert rep.theoretical_bound == 0.0
    assert all(err == 0.0 for _, err in rep.per_rep)


def test_infinite_epsilon_reductions_recover_exact_statistics():
    # rr at eps=inf is the identity channel
    spec = SyntheticSpec("discrete", probs=(0.25,) * 4, n=200)
    rep = run_experiment("rr", "collision", spec, 2, False, 5, epsilon=math.inf)
    assert all(err == 0.0 for _, err in rep.per_rep)

    # hierarchical AUC with a budget split keeps every user at every level
    auc_spec = SyntheticSpec("ur", d=16, n_plus=150, n_minus=150)
    rep = run_experiment("auc", "auc", auc_spec, 2, False, 5,
                         epsilon=math.inf, alpha=4, split="budget-basic")
    assert all(err == 0.0 for _, err in rep.per_rep)

    # rr-auc reduces to the exact two-sample statistic
    rep = run_experiment("rr-auc", "auc", auc_spec, 2, False, 5, epsilon=math.inf, d=16)
    assert all(err < 1e-12 for _, err in rep.per_rep)

    # allpairs with eps=inf adds no noise, including the mapped Kendall path
    grid = tuple((1 / 4,) * 2 for _ in range(2))
    gspec = SyntheticSpec("bivariate-grid", joint=grid, n=60)
    rep = run_experiment("allpairs", "kendall", gspec, 2, False, 5,
                         epsilon=math.inf, delta=1e-8)
    assert all(err < 1e-12 for _, err in rep.per_rep)
    assert rep.theoretical_bound == 0.0


def test_resampling_measures_against_population_value():
    spec = SyntheticSpec("discrete", probs=(0.5, 0.25, 0.25), n=500)
    rep = run_experiment("exact", "collision", spec, 40, True, 11)
    assert rep.true_value == pytest.approx(0.375)
    # sample U-statistics fluctuate around the population value
    assert 0.0 < rep.empirical_mse < 1e-3
    ests = np.array([e for e, _ in rep.per_rep])
    assert abs(ests.mean() - 0.375) < 0.01


def test_resample_requires_a_spec():
    sam = scalar_sample(np.array([1, 2, 1, 2]))
    with pytest.raises(BadSpec):
        run_experiment("exact", "collision", sam, 2, True, 0)


def test_mse_recomputable_from_per_rep_rows():
    spec = SyntheticSpec("discrete", probs=(0.4, 0.6), n=300)
    rep = run_experiment("rr", "collision", spec, 25, True, 19, epsilon=1.0)
    recomputed = np.mean([err**2 for _, err in rep.per_rep])
    assert abs(recomputed - rep.empirical_mse) <= 1e-12
    assert rep.theoretical_bound is not None and rep.theoretical_bound > 0


def test_reports_are_byte_identical_across_reruns():
    spec = SyntheticSpec("ur", d=32, n_plus=100, n_minus=100)
    kwargs = dict(epsilon=1.5, alpha=5, split="users")
    a = run_experiment("auc", "auc", spec, 3, True, 42, **kwargs)
    b = run_experiment("auc", "auc", spec, 3, True, 42, **kwargs)
    assert report_to_json(a) == report_to_json(b)
    assert "wall_time" not in report_to_json(a)
    assert a.wall_time >= 0.0
    c = run_experiment("auc", "auc", spec, 3, True, 43, **kwargs)
    assert report_to_json(a) != report_to_json(c)


def test_compare_protocols_aligns_data_draws():
    spec = SyntheticSpec("discrete", probs=(0.3, 0.3, 0.4), n=400)
    reports = compare_protocols(
        "collision",
        [{"protocol": "exact", "resample": True}, {"protocol": "exact", "resample": True}],
        spec,
        4,
        31,
    )
    # identical seeds => identical per-rep samples => identical exact estimates
    assert [e for e, _ in reports[0].per_rep] == [e for e, _ in reports[1].per_rep]
    with pytest.raises(ValueError):
        compare_protocols("collision", [], spec, 2, 0)


def test_rr_on_kendall_grid_maps_cells_faithfully():
    grid = tuple((1 / 9,) * 3 for _ in range(3))
    spec = SyntheticSpec("bivariate-grid", joint=grid, n=120)
    rep = run_experiment("rr", "kendall", spec, 2, False, 23, epsilon=math.inf)
    sample = generate(spec, substream(23, 0))
    want = exact_ustat(kendall_kernel(), sample)
    assert rep.true_value == pytest.approx(want)
    assert all(err < 1e-9 for _, err in rep.per_rep)


def test_pairs2pc_bound_attached_only_with_population_spec():
    grid = tuple((1 / 4,) * 2 for _ in range(2))
    spec = SyntheticSpec("bivariate-grid", joint=grid, n=100)
    rep = run_experiment("pairs2pc", "kendall", spec, 2, True, 3, epsilon=2.0, P=1)
    assert rep.theoretical_bound is not None and rep.theoretical_bound > 0
    fixed = generate(spec, substream(0))
    rep2 = run_experiment("pairs2pc", "kendall", fixed, 2, False, 3, epsilon=2.0, P=1)
    assert rep2.theoretical_bound is None


def test_pair_protocols_accept_continuous_gini_data():
    # regression: the collision kernel must not be built (and fail) when a
    # pair protocol runs a different task on non-bin data
    sam = scalar_sample(np.random.default_rng(5).beta(2.0, 5.0, 60))
    for proto in ("pairs2pc", "allpairs"):
        rep = run_experiment(proto, "gini", sam, 1, False, 7, epsilon=2.0)
        assert math.isfinite(rep.per_rep[0][0])
    with pytest.raises(ValueError, match="1-based integer bins"):
        run_experiment("pairs2pc", "collision", scalar_sample(np.zeros(10)),
                       1, False, 1, epsilon=1.0)


def test_csv_round_trip(tmp_path):
    spec = SyntheticSpec("discrete", probs=(0.5, 0.5), n=100)
    rep = run_experiment("rr", "collision", spec, 5, True, 13, epsilon=2.0)
    path = tmp_path / "rows.csv"
    report_to_csv(rep, str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "rep,estimate,true,abs_error"
    assert len(lines) == 6
    for i, line in enumerate(lines[1:]):
        r, est, true, err = line.split(",")
        assert int(r) == i
        assert float(est) == rep.per_rep[i][0]
        assert float(err) == rep.per_rep[i][1]
        assert float(true) == rep.true_value


def test_json_payload_fields():
    spec = SyntheticSpec("discrete", probs=(0.5, 0.5), n=100)
    rep = run_experiment("rr", "collision", spec, 2, False, 13, epsilon=2.0)
    payload = json.loads(report_to_json(rep))
    assert payload["protocol"] == "rr"
    assert payload["task"] == "collision"
    assert payload["config"]["seed"] == 13
    assert payload["config"]["n"] == 100
    assert len(payload["per_rep"]) == 2
    assert payload["empirical_mse"] == rep.empirical_mse


def test_input_validation():
    spec = SyntheticSpec("discrete", probs=(0.5, 0.5), n=10)
    with pytest.raises(ValueError):
        run_experiment("exact", "collision", spec, 0, False, 1)
    with pytest.raises(ValueError):
        run_experiment("warp", "collision", spec, 1, False, 1)
    with pytest.raises(ValueError):
        run_experiment("exact", "entropy", spec, 1, False, 1)
    with pytest.raises(ValueError):
        run_experiment("rr-auc", "gini", spec, 1, False, 1, epsilon=1.0, d=4)
    with pytest.raises(ValueError):
        run_experiment("auc", "gini", spec, 1, False, 1, epsilon=1.0, alpha=2)


# ---------------------------------------------------------------------------
# privacy audit


def test_verify_ldp_rr_is_exactly_tight():
    eps = math.log(3)
    actual, ok = verify_ldp(("rr", 4, eps), eps)
    assert ok and abs(actual - eps) <= 1e-9
    actual, ok = verify_ldp(("rr", 64, 0.5), 0.5)
    assert ok and abs(actual - 0.5) <= 1e-9
    # claiming less than the channel spends must fail
    _, ok = verify_ldp(("rr", 4, eps), 1.0)
    assert not ok


@pytest.mark.parametrize("l", [1, 2, 3, 6])
def test_verify_ldp_hadamard_is_exactly_tight(l):
    actual, ok = verify_ldp(("hadamard", l, 0.8), 0.8)
    assert ok and abs(actual - 0.8) <= 1e-9


def test_verify_ldp_identity_fails_any_finite_claim():
    actual, ok = verify_ldp(("identity", 4), 50.0)
    assert math.isinf(actual) and not ok


def test_verify_ldp_enumeration_caps():
    with pytest.raises(TooLargeToEnumerate):
        verify_ldp(("rr", 65, 1.0), 1.0)
    with pytest.raises(TooLargeToEnumerate):
        verify_ldp(("hadamard", 7, 1.0), 1.0)
    with pytest.raises(ValueError):
        verify_ldp(("warp", 4, 1.0), 1.0)


def test_substream_determinism_and_independence():
    a = substream(5, 1, 0).random(4)
    b = substream(5, 1, 0).random(4)
    c = substream(5, 1, 1).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
