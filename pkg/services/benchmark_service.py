import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import settings
from core.errors import EstimationError, InfeasibleConfigurationError, UsageError
from core.logger import logger
from models.schemas import BenchConfig, BenchReport, BenchRow, CountQuery, QueryPool, RandomizerConfig
from models.tables import Dataset
from services.dataset_service import DatasetService
from services.estimator_service import EstimatorService
from services.ground_truth_service import GroundTruthService
from services.mechanism_service import MechanismService
from utils.rng import derive_generator

SMALL_BUCKET = "small"
INELIGIBLE_BUCKET = "ineligible"

_SWEEP_STREAM = 3

# One seed's outcome: (estimates, iterations or None, anonymize seconds, estimate seconds)
SeedRun = Tuple[np.ndarray, Optional[np.ndarray], float, float]

class BenchmarkService:
    """
    Query-workload benchmark: one pool of count queries, bucketed by selectivity,
    answered by each mechanism and scored by relative error against D.
    """

    # --- QUERY POOL ---

    @staticmethod
    def generate_pool(d: Dataset, pool_size: Optional[int] = None, seed: Optional[int] = None,
                      max_arity: Optional[int] = None, sa_attribute: Optional[str] = None,
                      sa_only: bool = False, sa_attributes: Optional[Sequence[str]] = None) -> QueryPool:
        """
        Random NSA conjunctions, each crossed with every value of the sensitive
        domain until pool_size queries exist. The empty conjunction comes first,
        so the pure-SA counts are always part of the pool. Conjunct values come
        from a random record of D, so predicates follow its empirical distribution.

        With sa_attributes every query conditions on all of them jointly; see
        _joint_pool.
        """
        pool_size = settings.POOL_SIZE if pool_size is None else pool_size
        seed = settings.DEFAULT_SEED if seed is None else seed
        max_arity = settings.POOL_MAX_ARITY if max_arity is None else max_arity
        if sa_attributes:
            return BenchmarkService._joint_pool(d, pool_size, seed, max_arity, list(sa_attributes), sa_only)

        attribute = sa_attribute or d.schema.sensitive_in_order[0]
        domain = d.schema.attribute(attribute).domain
        if pool_size < len(domain):
            raise UsageError(
                f"pool_size {pool_size} is smaller than the domain of '{attribute}' ({len(domain)} values).",
                pool_size=pool_size, domain_size=len(domain)
            )

        nsa = d.schema.nsa_names
        if sa_only or max_arity == 0 or not nsa:
            queries = [CountQuery(sa={attribute: v}) for v in domain]
            return QueryPool(queries=queries, seed=seed, pool_size=pool_size)

        rng = derive_generator(seed)
        wanted = -(-pool_size // len(domain))
        top_arity = min(max_arity, len(nsa))
        predicates: List[Dict[str, str]] = [{}]
        seen = {()}
        attempts = 0
        while len(predicates) < wanted and attempts < 50 * wanted:
            attempts += 1
            predicate = BenchmarkService._random_predicate(d, rng, int(rng.integers(1, top_arity + 1)))
            key = tuple(predicate.items())
            if key not in seen:
                seen.add(key)
                predicates.append(predicate)

        if len(predicates) < wanted:
            logger.warning("Query pool smaller than requested", requested=pool_size,
                           predicates=len(predicates))
        queries = [CountQuery(nsa=p, sa={attribute: v}) for p in predicates for v in domain][:pool_size]
        return QueryPool(queries=queries, seed=seed, pool_size=pool_size)

    @staticmethod
    def _random_predicate(d: Dataset, rng: np.random.Generator, arity: int) -> Dict[str, str]:
        """`arity` NSA conjuncts, all read off one random record."""
        nsa = d.schema.nsa_names
        record = int(rng.integers(d.n))
        chosen = sorted(rng.choice(len(nsa), size=arity, replace=False).tolist())
        return {
            nsa[j]: d.schema.attribute(nsa[j]).domain[int(d.codes[record, d.schema.index(nsa[j])])]
            for j in chosen
        }

    @staticmethod
    def _joint_pool(d: Dataset, pool_size: int, seed: int, max_arity: int,
                    attributes: List[str], sa_only: bool) -> QueryPool:
        """
        Queries over several SAs at once. Each draws a conjunction of 0..max_arity
        NSA conjuncts from one record and the joint SA values from another, so the
        SA combinations follow the empirical joint distribution.
        """
        unknown = [a for a in attributes if a not in d.schema.sa_names]
        if unknown:
            raise UsageError(f"Not sensitive attributes of the dataset: {unknown}", attributes=unknown)
        top_arity = 0 if sa_only else min(max_arity, len(d.schema.nsa_names))
        columns = [d.schema.index(a) for a in attributes]
        domains = [d.schema.attribute(a).domain for a in attributes]

        rng = derive_generator(seed)
        queries: List[CountQuery] = []
        seen = set()
        attempts = 0
        while len(queries) < pool_size and attempts < 20 * pool_size:
            attempts += 1
            arity = int(rng.integers(0, top_arity + 1))
            predicate = BenchmarkService._random_predicate(d, rng, arity) if arity else {}
            record = int(rng.integers(d.n))
            sa = {a: domain[int(d.codes[record, j])] for a, j, domain in zip(attributes, columns, domains)}
            key = (tuple(predicate.items()), tuple(sa.items()))
            if key not in seen:
                seen.add(key)
                queries.append(CountQuery(nsa=predicate, sa=sa))

        if len(queries) < pool_size:
            logger.warning("Query pool smaller than requested", requested=pool_size, queries=len(queries))
        return QueryPool(queries=queries, seed=seed, pool_size=pool_size)

    # --- BUCKETS ---

    @staticmethod
    def bucket_masks(actual: np.ndarray, n: int, thresholds: Sequence[float],
                     small_count_max: int) -> List[Tuple[str, np.ndarray]]:
        """Small-count bucket (1 <= actual <= max) plus one bucket per selectivity threshold."""
        buckets = [(SMALL_BUCKET, (actual >= 1) & (actual <= small_count_max))]
        for s in thresholds:
            buckets.append((f"sel>={s:g}", (actual >= 1) & (actual / n >= s)))
        return buckets

    @staticmethod
    def relative_errors(estimates: np.ndarray, actual: np.ndarray) -> np.ndarray:
        return np.abs(estimates - actual) / actual

    # --- CELLS ---

    @staticmethod
    def _rows(mechanism: str, param: str, runs: List[SeedRun], actual: np.ndarray,
              buckets: List[Tuple[str, np.ndarray]], n_zero: int) -> List[BenchRow]:
        anonymize_ms = float(np.median([r[2] for r in runs])) * 1000
        estimate_ms = float(np.median([r[3] for r in runs])) / max(len(actual), 1) * 1000
        iterations = [r[1] for r in runs if r[1] is not None]
        iters = np.concatenate(iterations) if iterations else None

        rows = []
        for label, mask in buckets:
            count = int(mask.sum())
            errors = [BenchmarkService.relative_errors(r[0][mask], actual[mask]) for r in runs] if count else []
            avg = float(np.mean(np.concatenate(errors))) if count else None
            bucket_iters = np.concatenate([it[mask] for it in iterations]) if iterations and count else None
            rows.append(BenchRow(
                mechanism=mechanism,
                param=param,
                selectivity_bucket=label,
                avg_rel_error=avg,
                n_queries=count,
                anonymize_ms=round(anonymize_ms, 3),
                estimate_ms_avg=round(estimate_ms, 6),
                iters_median=float(np.median(bucket_iters)) if bucket_iters is not None else None,
                iters_mean=float(np.mean(bucket_iters)) if bucket_iters is not None else None,
                n_zero_actual=n_zero,
            ))
        if iters is not None:
            logger.debug("Benchmark cell done", mechanism=mechanism, param=param,
                         iters_median=float(np.median(iters)))
        return rows

    @staticmethod
    def _warning_row(mechanism: str, param: str, reason: str) -> BenchRow:
        logger.warning("Benchmark cell skipped", mechanism=mechanism, param=param, reason=reason)
        return BenchRow(mechanism=mechanism, param=param, selectivity_bucket=INELIGIBLE_BUCKET,
                        avg_rel_error=None, n_queries=0, anonymize_ms=0.0, estimate_ms_avg=0.0)

    @staticmethod
    def _timed(anonymize: Callable, estimate: Callable) -> SeedRun:
        start = time.perf_counter()
        published = anonymize()
        anonymized = time.perf_counter()
        estimates, iterations = estimate(published)
        done = time.perf_counter()
        return estimates, iterations, anonymized - start, done - anonymized

    @staticmethod
    def _decoy_cells(d: Dataset, mechanism: str, l_prime: int, queries: List[CountQuery],
                     config: BenchConfig) -> Tuple[Optional[Dataset], List[SeedRun]]:
        eligible_d, report = DatasetService.enforce_eligibility(d, l_prime)
        if not report.eligible:
            return None, []
        attribute = config.sa_attribute or (config.sa_attributes[0] if config.sa_attributes else None)
        runs = []
        for seed in config.seeds:
            if mechanism == "a_prime":
                cfg = RandomizerConfig(mechanism="a_prime", l_prime=l_prime, seed=seed)

                def estimate(table):
                    pairs = EstimatorService.estimate_pool(table, queries, config.tol, config.max_iter)
                    return (np.array([e for e, _ in pairs], dtype=float),
                            np.array([i for _, i in pairs], dtype=float))

                runs.append(BenchmarkService._timed(
                    lambda: MechanismService.anonymize_a_prime(eligible_d, cfg), estimate))
            else:
                def estimate(pub):
                    return np.array([EstimatorService.estimate_anatomy(pub, q) for q in queries]), None

                runs.append(BenchmarkService._timed(
                    lambda: MechanismService.anonymize_anatomy(eligible_d, l_prime, seed, attribute),
                    estimate))
        return eligible_d, runs

    @staticmethod
    def _params(mechanism: str, config: BenchConfig) -> List[str]:
        if mechanism == "global_a" and config.global_p is not None:
            return [f"p={config.global_p:g}"]
        return [f"l={l}" for l in config.l_primes]

    # --- DRIVER ---

    @staticmethod
    def run_benchmark(d: Dataset, config: BenchConfig) -> BenchReport:
        pool = BenchmarkService.generate_pool(
            d, config.pool_size, config.pool_seed, config.max_arity, config.sa_attribute, config.sa_only,
            config.sa_attributes
        )
        actual_all = GroundTruthService.actual_counts(d, pool.queries)
        n_zero = int((actual_all == 0).sum())
        keep = np.flatnonzero(BenchmarkService._in_any_bucket(actual_all, d.n, config))
        queries = [pool.queries[k] for k in keep]
        actual = actual_all[keep]
        buckets = BenchmarkService.bucket_masks(actual, d.n, config.thresholds, config.small_count_max)
        joint = any(q.w > 1 for q in queries)
        logger.info("Benchmark started", n=d.n, pool=len(pool.queries), evaluated=len(queries),
                    zero_actual=n_zero, mechanisms=list(config.mechanisms), joint=joint)

        rows: List[BenchRow] = []
        for mechanism in config.mechanisms:
            if joint and mechanism in ("anatomy", "global_a"):
                rows.extend(BenchmarkService._warning_row(mechanism, param, "answers single-SA queries only")
                            for param in BenchmarkService._params(mechanism, config))

            elif mechanism in ("a_prime", "anatomy"):
                for l_prime in config.l_primes:
                    param = f"l={l_prime}"
                    try:
                        used, runs = BenchmarkService._decoy_cells(d, mechanism, l_prime, queries, config)
                    except InfeasibleConfigurationError as e:
                        rows.append(BenchmarkService._warning_row(mechanism, param, e.message))
                        continue
                    if used is None:
                        rows.append(BenchmarkService._warning_row(mechanism, param, "dataset not eligible"))
                        continue
                    truth = actual if used.n == d.n else GroundTruthService.actual_counts(used, queries)
                    cell_buckets = buckets if used.n == d.n else BenchmarkService.bucket_masks(
                        truth, used.n, config.thresholds, config.small_count_max)
                    rows.extend(BenchmarkService._rows(mechanism, param, runs, truth, cell_buckets, n_zero))

            elif mechanism == "global_a":
                grid = ([(f"p={config.global_p:g}", config.global_p)] if config.global_p is not None
                        else [(f"l={l}", 1.0 / l) for l in config.l_primes])
                for param, p in grid:
                    def estimate(table, p=p):
                        return np.array([
                            EstimatorService.estimate_query(table, q, config.tol, config.max_iter)
                            for q in queries
                        ]), None
                    try:
                        runs = [BenchmarkService._timed(
                            lambda seed=seed, p=p: MechanismService.anonymize_global_a(d, p, seed), estimate)
                            for seed in config.seeds]
                    except (EstimationError, InfeasibleConfigurationError) as e:
                        rows.append(BenchmarkService._warning_row(mechanism, param, e.message))
                        continue
                    rows.extend(BenchmarkService._rows(mechanism, param, runs, actual, buckets, n_zero))

            elif mechanism == "laplace":
                for epsilon in config.epsilons:
                    for budget in config.laplace_budgets:
                        param = f"eps={epsilon:g} m={budget}"
                        runs = [BenchmarkService._timed(
                            lambda: None,
                            lambda _, seed=seed, eps=epsilon, m=budget: (
                                MechanismService.laplace_answers(actual, m, eps, seed), None))
                            for seed in config.seeds]
                        rows.extend(BenchmarkService._rows(mechanism, param, runs, actual, buckets, n_zero))

        logger.info("Benchmark finished", rows=len(rows))
        rows = [row.model_copy(update={"n": d.n}) for row in rows]
        return BenchReport(rows=rows, n=d.n, pool_size=len(pool.queries))

    @staticmethod
    def run_size_sweep(d: Dataset, config: BenchConfig) -> BenchReport:
        """
        The benchmark once per size in config.sizes. Every sample is a prefix of
        one seeded permutation of D, so smaller tables nest inside larger ones.
        Rows carry the size they were measured at.
        """
        sizes = sorted(set(config.sizes or [d.n]))
        if sizes[-1] > d.n:
            raise UsageError(f"Sweep size {sizes[-1]} exceeds the {d.n} rows available.",
                             size=sizes[-1], n=d.n)
        order = derive_generator(config.pool_seed, _SWEEP_STREAM).permutation(d.n)
        rows: List[BenchRow] = []
        pool_size = 0
        for size in sizes:
            sample = d if size == d.n else d.take(np.sort(order[:size]))
            report = BenchmarkService.run_benchmark(sample, config)
            rows.extend(report.rows)
            pool_size = max(pool_size, report.pool_size)
            logger.info("Sweep size finished", n=size)
        return BenchReport(rows=rows, n=d.n, pool_size=pool_size, sizes=sizes)

    @staticmethod
    def _in_any_bucket(actual: np.ndarray, n: int, config: BenchConfig) -> np.ndarray:
        masks = BenchmarkService.bucket_masks(actual, n, config.thresholds, config.small_count_max)
        return np.logical_or.reduce([m for _, m in masks])
