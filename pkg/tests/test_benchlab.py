import math

import numpy as np
import pytest

from eiei import benchlab
from eiei.benchlab import (
    AggregateRow,
    BenchmarkError,
    BenchmarkRecord,
    TestbedConfig,
    aggregate,
    beta_from_dimension,
    fig2_function,
    generate_testbed,
    paired_sign_test,
    read_aggregate,
    read_records,
    run_benchmark,
    write_aggregate,
    write_records,
)
from eiei.gp import MaternKernel, SingularModelError
from eiei.strategy import Policy, extract_estimators, run_on_candidates, snap_to_candidates

BOTH = [Policy.parse("ei"), Policy.parse("eiei")]


@pytest.fixture(scope="module")
def small_testbed():
    return generate_testbed(TestbedConfig(d=2, m=40, n_paths=3, budget=5, seed=13))


def test_beta_values():
    # 50-digit evaluation with Gamma(2.5) = 3 sqrt(pi) / 4
    assert beta_from_dimension(3) == pytest.approx(0.21215688358941105, rel=1e-14)
    assert abs(beta_from_dimension(3) - 0.2) < 0.015
    assert beta_from_dimension(2) == pytest.approx(math.sqrt(0.04 / math.pi), rel=1e-14)
    assert beta_from_dimension(1) == pytest.approx(0.02, rel=1e-14)
    with pytest.raises(ValueError):
        beta_from_dimension(0)


def test_fig2_values():
    # mpmath evaluation of the formula at x = 0
    assert fig2_function(0.0) == pytest.approx(0.79182954793421996, abs=1e-15)
    assert fig2_function(0.0) == pytest.approx(0.04 + math.exp(-0.5) + math.exp(-1.8) - 0.02, abs=1e-15)
    assert fig2_function(-0.1) == pytest.approx(0.28**2 + 1 + math.exp(-0.5 * 0.64 / 0.1) - 0.02, abs=1e-15)


def test_fig2_grid_argmax():
    x = np.linspace(-1, 1, 2001)
    # exhaustive 40-digit scan of the same grid
    assert int(np.argmax(fig2_function(x))) == 902


def test_fig2_domain():
    for bad in (1.01, -1.5, math.nan):
        with pytest.raises(ValueError):
            fig2_function(bad)


@pytest.mark.parametrize(
    "kw", [dict(d=0), dict(m=1), dict(n_paths=0), dict(budget=0), dict(m=10, budget=11), dict(grid_scheme="sobol")]
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        TestbedConfig(**kw)


def test_config_default_kernel():
    k = TestbedConfig().kernel
    assert k == MaternKernel(1.0, beta_from_dimension(3), 6.5)


def test_testbed_truth_and_determinism(small_testbed):
    tb = small_testbed
    assert tb.paths.shape == (3, 40)
    np.testing.assert_array_equal(tb.maxima, tb.paths.max(axis=1))
    np.testing.assert_array_equal(tb.argmax, tb.paths.argmax(axis=1))
    again = generate_testbed(tb.config)
    np.testing.assert_array_equal(again.paths, tb.paths)
    np.testing.assert_array_equal(again.grid.points, tb.grid.points)


def test_regular_grid_scheme():
    tb = generate_testbed(TestbedConfig(d=2, m=16, n_paths=1, budget=2, grid_scheme="regular"))
    assert len(tb.grid) == 16
    assert snap_to_candidates([0.5, 0.5], tb.grid) in range(16)


def test_testbed_path_statistics():
    tb = generate_testbed(TestbedConfig(d=3, m=12, n_paths=3000, budget=2, seed=5))
    K = tb.config.kernel(tb.grid.points, tb.grid.points)
    n = len(tb.paths)
    emp = tb.paths.T @ tb.paths / n
    se = np.sqrt((np.outer(np.diag(K), np.diag(K)) + K**2) / n)
    assert np.mean(np.abs(emp - K) <= 3 * se) >= 0.97


def test_budget_one(small_testbed):
    recs = run_benchmark(small_testbed, BOTH, budget=1)
    assert len(recs) == 6 and all(r.n == 1 for r in recs)
    c = snap_to_candidates([0.5, 0.5], small_testbed.grid)
    for r in recs:
        path = small_testbed.paths[r.path_id]
        assert r.value_error == path.max() - path[c]


def test_records_match_manual_replay(small_testbed):
    tb = small_testbed
    recs = run_benchmark(tb, BOTH)
    assert len(recs) == 3 * 2 * 5
    start = snap_to_candidates([0.5, 0.5], tb.grid)
    for pid in range(3):
        for pol in BOTH:
            tr = run_on_candidates(tb.paths[pid].__getitem__, tb.config.kernel, tb.grid, 5, pol, start)
            v, l = extract_estimators(tr, tb.grid.points, tb.paths[pid])
            got = [r for r in recs if r.path_id == pid and r.strategy == pol.name]
            assert [r.n for r in got] == [1, 2, 3, 4, 5]
            np.testing.assert_array_equal([r.value_error for r in got], v)
            np.testing.assert_array_equal([r.location_error for r in got], l)
            assert np.all(np.diff(v) <= 0)
            # location error at a step where the maximum is known is measured from the first point attaining it
            for r, n in zip(got, range(5)):
                if r.value_error == 0:
                    first = tr.indices[int(np.argmax(tr.values[: n + 1]))]
                    star = tb.argmax[pid]
                    assert r.location_error == np.linalg.norm(tb.grid.points[star] - tb.grid.points[first])


def test_threads_do_not_change_output(small_testbed):
    assert run_benchmark(small_testbed, BOTH, threads=1) == run_benchmark(small_testbed, BOTH, threads=2)


def test_failures_above_limit(small_testbed, monkeypatch):
    real = benchlab._run_path

    def flaky(tb, pid, strategies, budget):
        if pid == 0:
            raise SingularModelError("synthetic")
        return real(tb, pid, strategies, budget)

    monkeypatch.setattr(benchlab, "_run_path", flaky)
    with pytest.raises(BenchmarkError):
        run_benchmark(small_testbed, BOTH, budget=2)


def test_budget_bounds(small_testbed):
    with pytest.raises(ValueError):
        run_benchmark(small_testbed, BOTH, budget=41)


def _fixture_records():
    vals = [(0.5, 0.2), (0.3, 0.1), (0.9, 0.4), (0.0, 0.0), (1.2, 0.7)]
    recs = []
    for pid, (v, l) in enumerate(vals):
        recs.append(BenchmarkRecord(pid, "ei", 1, v, l))
        recs.append(BenchmarkRecord(pid, "eiei", 1, v / 2, l * 3))
    return recs


def test_aggregate_hand_computed():
    rows = {r.strategy: r for r in aggregate(_fixture_records())}
    assert rows["ei"].mean_value_error == pytest.approx(0.58, abs=1e-15)
    assert rows["ei"].mean_location_error == pytest.approx(0.28, abs=1e-15)
    assert rows["eiei"].mean_value_error == pytest.approx(0.29, abs=1e-15)
    assert rows["eiei"].mean_location_error == pytest.approx(0.84, abs=1e-15)
    # sample sd of (0.5, 0.3, 0.9, 0, 1.2) is sqrt(0.227), se = sd / sqrt(5)
    assert rows["ei"].se_value_error == pytest.approx(math.sqrt(0.227 / 5), rel=1e-12)


def test_aggregate_single_and_permutation():
    r = BenchmarkRecord(0, "ei", 3, 0.25, 0.5)
    assert aggregate([r]) == [AggregateRow("ei", 3, 0.25, 0.0, 0.5, 0.0)]
    recs = _fixture_records()
    perm = [recs[i] for i in np.random.default_rng(0).permutation(len(recs))]
    assert aggregate(perm) == aggregate(recs)


def test_aggregate_rejects_unbalanced():
    recs = _fixture_records()[:-1]
    with pytest.raises(ValueError):
        aggregate(recs)
    with pytest.raises(ValueError):
        aggregate(_fixture_records() + [_fixture_records()[0]])
    with pytest.raises(ValueError):
        aggregate([])


def test_paired_sign_test():
    recs = _fixture_records()
    w, l, p = paired_sign_test(recs, 1, "eiei", "ei", "value_error")
    assert (w, l) == (4, 0)
    assert p == pytest.approx(1 / 16)
    assert paired_sign_test(recs, 2, "eiei", "ei") == (0, 0, 1.0)


def test_csv_round_trip(tmp_path, small_testbed):
    recs = run_benchmark(small_testbed, BOTH)
    write_records(tmp_path / "r.csv", recs)
    assert read_records(tmp_path / "r.csv") == recs
    rows = aggregate(recs)
    write_aggregate(tmp_path / "a.csv", rows)
    assert read_aggregate(tmp_path / "a.csv") == rows
    head = (tmp_path / "r.csv").read_text().splitlines()[0]
    assert head == "path_id,strategy,n,value_error,location_error"


def test_csv_header_checked(tmp_path):
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_records(tmp_path / "bad.csv")
    with pytest.raises(ValueError):
        read_aggregate(tmp_path / "bad.csv")
