import numpy as np
import pytest
from scipy import stats

from core.errors import UsageError
from models.schemas import BenchConfig, CountQuery
from services.benchmark_service import INELIGIBLE_BUCKET, SMALL_BUCKET, BenchmarkService
from services.dataset_service import DatasetService
from services.ground_truth_service import GroundTruthService


@pytest.fixture(scope="module")
def census_5k():
    return DatasetService.generate_synthetic(5000, DatasetService.census_like_config(), seed=13)


# --- QUERY POOL ---

def test_pool_covers_every_sensitive_value(census_5k):
    pool = BenchmarkService.generate_pool(census_5k, 5000, seed=1)
    assert len(pool.queries) == 5000
    assert {q.sa_values["occupation"] for q in pool.queries} == set(
        census_5k.schema.attribute("occupation").domain)
    for q in pool.queries:
        assert len(q.nsa_predicate) <= 3
        assert "occupation" not in q.nsa_predicate
    predicates = {tuple(q.nsa_predicate.items()) for q in pool.queries}
    assert len(predicates) == 100
    # the pure-SA counts lead the pool
    assert all(not q.nsa_predicate for q in pool.queries[:50])
    assert all(q.nsa_predicate for q in pool.queries[50:])


def test_pool_is_seeded(census_5k):
    first = BenchmarkService.generate_pool(census_5k, 500, seed=3)
    second = BenchmarkService.generate_pool(census_5k, 500, seed=3)
    other = BenchmarkService.generate_pool(census_5k, 500, seed=4)
    assert [q.key() for q in first.queries] == [q.key() for q in second.queries]
    assert [q.key() for q in first.queries] != [q.key() for q in other.queries]


def test_pool_without_predicates(census_5k):
    pool = BenchmarkService.generate_pool(census_5k, 500, seed=3, sa_only=True)
    assert len(pool.queries) == 50
    assert all(not q.nsa_predicate for q in pool.queries)


def test_pool_smaller_than_domain(census_5k):
    with pytest.raises(UsageError):
        BenchmarkService.generate_pool(census_5k, 10, seed=3)


@pytest.fixture(scope="module")
def joint_5k():
    config = DatasetService.census_like_config(sensitive=("occupation", "age"))
    return DatasetService.generate_synthetic(5000, config, seed=13)


def test_joint_pool_conditions_on_every_attribute(joint_5k):
    pool = BenchmarkService.generate_pool(joint_5k, 300, seed=2, sa_attributes=["occupation", "age"])
    assert len(pool.queries) == 300
    assert len({q.key() for q in pool.queries}) == 300
    for q in pool.queries:
        assert list(q.sa_values) == ["occupation", "age"]
        assert len(q.nsa_predicate) <= 3
    # SA pairs are read off real records
    pairs = [CountQuery(sa=q.sa_values) for q in pool.queries]
    assert np.all(GroundTruthService.actual_counts(joint_5k, pairs) >= 1)


def test_joint_pool_needs_sensitive_attributes(joint_5k):
    with pytest.raises(UsageError, match="sex"):
        BenchmarkService.generate_pool(joint_5k, 100, seed=2, sa_attributes=["occupation", "sex"])


def test_batched_counts_match_one_by_one(joint_5k):
    queries = [
        CountQuery(nsa={"sex": "F"}, sa={"occupation": "occ00", "age": "age1"}),
        CountQuery(nsa={"sex": "F"}, sa={"occupation": "occ00", "age": "age2"}),
        CountQuery(nsa={"sex": "F"}, sa={"occupation": "occ01", "age": "age2"}),
        CountQuery(sa={"occupation": "occ03"}),
        CountQuery(nsa={"region": "reg4"}, sa={"age": "age0"}),
    ]
    batched = GroundTruthService.actual_counts(joint_5k, queries)
    assert batched.tolist() == [GroundTruthService.actual_count(joint_5k, q) for q in queries]


# --- BUCKETS ---

def test_selectivity_buckets():
    actual = np.array([0, 1, 10, 11, 500, 2000])
    buckets = dict(BenchmarkService.bucket_masks(actual, 10_000, [0.01, 0.05], 10))
    assert list(buckets) == [SMALL_BUCKET, "sel>=0.01", "sel>=0.05"]
    assert buckets[SMALL_BUCKET].tolist() == [False, True, True, False, False, False]
    assert buckets["sel>=0.01"].tolist() == [False, False, False, False, True, True]
    assert buckets["sel>=0.05"].tolist() == [False, False, False, False, True, True]


def test_relative_errors():
    errors = BenchmarkService.relative_errors(np.array([12.0, 5.0]), np.array([10, 5]))
    assert errors.tolist() == pytest.approx([0.2, 0.0])


# --- RUNS ---

def test_groups_of_one_have_no_error(census_5k):
    config = BenchConfig(mechanisms=["a_prime", "anatomy"], l_primes=[1], pool_size=300, seeds=[2])
    report = BenchmarkService.run_benchmark(census_5k, config)
    assert report.n == 5000 and report.pool_size == 300
    scored = [row for row in report.rows if row.n_queries]
    assert scored
    for row in scored:
        assert row.avg_rel_error == pytest.approx(0.0, abs=1e-9)
        assert row.param == "l=1"


def test_laplace_noise_grows_with_query_budget(census_5k):
    config = BenchConfig(mechanisms=["laplace"], epsilons=[0.05], laplace_budgets=[10, 100],
                         pool_size=300, seeds=[1, 2])
    report = BenchmarkService.run_benchmark(census_5k, config)
    for row in report.rows:
        if row.param != "eps=0.05 m=100" or not row.n_queries:
            continue
        tight = report.cell("laplace", "eps=0.05 m=10", row.selectivity_bucket)
        assert row.avg_rel_error > tight.avg_rel_error


def test_same_config_same_report(census_5k):
    config = BenchConfig(mechanisms=["a_prime", "anatomy", "global_a", "laplace"], l_primes=[4],
                         pool_size=200, seeds=[5])
    first = BenchmarkService.run_benchmark(census_5k, config)
    second = BenchmarkService.run_benchmark(census_5k, config)
    assert [r.deterministic_part() for r in first.rows] == [r.deterministic_part() for r in second.rows]


def test_ineligible_cells_become_warning_rows(make_dataset):
    d = make_dataset(["a"] * 8 + ["b", "c"])
    config = BenchConfig(mechanisms=["a_prime", "global_a"], l_primes=[3], pool_size=30, seeds=[1])
    report = BenchmarkService.run_benchmark(d, config)
    assert report.cell("a_prime", "l=3", INELIGIBLE_BUCKET) is not None
    # p = 1/l' = 1/m cannot be inverted
    warning = report.cell("global_a", "l=3", INELIGIBLE_BUCKET)
    assert warning is not None and warning.avg_rel_error is None


def test_zero_answer_queries_are_counted(census_5k):
    config = BenchConfig(mechanisms=["laplace"], epsilons=[0.1], pool_size=400, seeds=[1])
    pool = BenchmarkService.generate_pool(census_5k, 400, config.pool_seed, config.max_arity)
    zero = int((GroundTruthService.actual_counts(census_5k, pool.queries) == 0).sum())
    assert zero > 0
    report = BenchmarkService.run_benchmark(census_5k, config)
    assert {row.n_zero_actual for row in report.rows} == {zero}


def test_joint_queries_skip_single_attribute_baselines(joint_5k):
    config = BenchConfig(mechanisms=["a_prime", "anatomy", "global_a", "laplace"], l_primes=[3],
                         pool_size=150, seeds=[1], sa_attributes=["occupation", "age"])
    report = BenchmarkService.run_benchmark(joint_5k, config)
    for mechanism in ("anatomy", "global_a"):
        warning = report.cell(mechanism, "l=3", INELIGIBLE_BUCKET)
        assert warning is not None and warning.avg_rel_error is None
    scored = [row for row in report.rows if row.mechanism == "a_prime" and row.n_queries]
    assert scored
    for row in scored:
        assert row.iters_median is not None and row.iters_median >= 1
        assert row.estimate_ms_avg > 0
    assert {row.n for row in report.rows} == {5000}


def test_size_sweep_nests_samples(census_5k):
    config = BenchConfig(mechanisms=["laplace"], epsilons=[0.1], pool_size=200, seeds=[1],
                         sizes=[5000, 2000])
    report = BenchmarkService.run_size_sweep(census_5k, config)
    assert report.sizes == [2000, 5000]
    assert {row.n for row in report.rows} == {2000, 5000}
    assert report.cell("laplace", "eps=0.1 m=100", SMALL_BUCKET, n=2000) is not None
    # the full size is the plain benchmark
    full = BenchmarkService.run_benchmark(census_5k, config)
    assert [r.deterministic_part() for r in report.rows if r.n == 5000] == \
        [r.deterministic_part() for r in full.rows]


def test_size_sweep_rejects_oversized_samples(census_5k):
    with pytest.raises(UsageError, match="exceeds"):
        BenchmarkService.run_size_sweep(census_5k, BenchConfig(mechanisms=["laplace"], sizes=[6000]))


# --- TRENDS ---

TREND_BUCKETS = (SMALL_BUCKET, "sel>=0.005", "sel>=0.01", "sel>=0.02", "sel>=0.03", "sel>=0.04", "sel>=0.05")


@pytest.fixture(scope="module")
def trend_report():
    d = DatasetService.generate_synthetic(100_000, DatasetService.census_like_config(), seed=7)
    config = BenchConfig(mechanisms=["a_prime", "laplace"], l_primes=list(range(2, 11)),
                         epsilons=[0.01], laplace_budgets=[100], pool_size=2000, seeds=[1],
                         max_iter=1000)
    return BenchmarkService.run_benchmark(d, config)


@pytest.mark.slow
def test_every_bucket_is_populated(trend_report):
    params = [("a_prime", f"l={l}") for l in range(2, 11)] + [("laplace", "eps=0.01 m=100")]
    for mechanism, param in params:
        for bucket in TREND_BUCKETS:
            cell = trend_report.cell(mechanism, param, bucket)
            assert cell is not None and cell.n_queries > 0, (mechanism, param, bucket)


@pytest.mark.slow
def test_small_counts_are_hidden(trend_report):
    for l_prime in range(5, 11):
        small = trend_report.cell("a_prime", f"l={l_prime}", SMALL_BUCKET)
        large = trend_report.cell("a_prime", f"l={l_prime}", "sel>=0.02")
        assert small.avg_rel_error > large.avg_rel_error


@pytest.mark.slow
def test_small_count_error_rises_with_group_size(trend_report):
    errors = [trend_report.cell("a_prime", f"l={l}", SMALL_BUCKET).avg_rel_error for l in range(2, 11)]
    rho, _ = stats.spearmanr(list(range(2, 11)), errors)
    assert rho > 0


@pytest.mark.slow
def test_laplace_loses_on_selective_queries(trend_report):
    for threshold in ("sel>=0.01", "sel>=0.02", "sel>=0.03", "sel>=0.04", "sel>=0.05"):
        noisy = trend_report.cell("laplace", "eps=0.01 m=100", threshold)
        assert noisy.n_queries > 0
        for l_prime in range(2, 11):
            decoy = trend_report.cell("a_prime", f"l={l_prime}", threshold)
            assert noisy.avg_rel_error > decoy.avg_rel_error
