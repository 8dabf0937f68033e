import time
from collections import Counter
from fractions import Fraction
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from config.settings import settings
from core.errors import (
    AmbiguousMatchError, IneligibleDatasetError, InfeasibleConfigurationError,
    UnsafeConfigurationError, UsageError,
)
from core.logger import logger
from models.schemas import RandomizerConfig
from models.tables import AnatomyPublication, Dataset, DecoyPartition, PublishedTable
from services.dataset_service import DatasetService
from services.partition_service import PartitionService
from utils.rng import derive_generator, fisher_yates_permutation, seed_fingerprint

# Child streams of the run seed for sensitive attributes after the first.
# Spawn keys 0 and 1 are taken by dataset id/value generation.
_ATTRIBUTE_STREAM = 2

class MechanismService:
    """
    Sanitization mechanisms: A' (decoy-group randomization), the global
    randomization baseline A, Anatomy publication and the Laplace baseline.
    """

    # --- A' ---

    @staticmethod
    def check_config(d: Dataset, cfg: RandomizerConfig) -> None:
        l_prime = cfg.l_prime
        if cfg.p is not None and cfg.exact_p != Fraction(1, l_prime):
            if not (cfg.unsafe_test_mode or settings.UNSAFE_TEST_MODE):
                raise UnsafeConfigurationError(
                    f"p={cfg.p} differs from 1/l'={1 / l_prime:.6g}; this breaks zero-differential "
                    "privacy and is only allowed in unsafe test mode.",
                    p=cfg.p, l_prime=l_prime
                )
            logger.warning("Unsafe randomization probability in use", p=cfg.p, l_prime=l_prime)
        for name in d.schema.sensitive_in_order:
            m = d.schema.attribute(name).size
            if l_prime > m:
                raise InfeasibleConfigurationError(
                    f"l'={l_prime} exceeds the domain size {m} of sensitive attribute '{name}'.",
                    attribute=name, l_prime=l_prime, domain_size=m
                )
        if not DatasetService.is_eligible(d, l_prime):
            _, report = DatasetService.enforce_eligibility(d, l_prime)
            raise IneligibleDatasetError(
                f"Dataset of {d.n} tuples is not eligible for l'={l_prime}: N must be a multiple "
                f"of l' and no sensitive value may occur more than N/l' times "
                f"(max frequency {report.max_sa_frequency}). Run eligibility enforcement first.",
                n=d.n, l_prime=l_prime, max_sa_frequency=report.max_sa_frequency
            )

    @staticmethod
    def randomize_partition(partition: DecoyPartition, p: float,
                            rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """
        One published sensitive value per tuple, drawn from its decoy group:
        its own value with probability p, otherwise one of the other l'-1 members
        uniformly. Draws are consumed in ascending id order.
        Returns (ids ascending, published codes).
        """
        l_prime = partition.l_prime
        flat_ids = partition.member_ids.ravel()
        order = np.argsort(flat_ids, kind="stable")
        group, own = np.divmod(order, l_prime)
        n = flat_ids.shape[0]

        keep = rng.random(n) < p
        if l_prime > 1:
            offset = rng.integers(1, l_prime, size=n)
            chosen = np.where(keep, own, (own + offset) % l_prime)
        else:
            chosen = own
        return flat_ids[order], partition.member_codes[group, chosen]

    @staticmethod
    def _publish(d: Dataset, columns: Dict[str, np.ndarray], rng: np.random.Generator) -> np.ndarray:
        """Join randomized SA columns (ascending-id order) back by id, then shuffle rows."""
        by_id = np.argsort(d.ids, kind="stable")
        codes = d.codes[by_id].copy()
        for name, values in columns.items():
            codes[:, d.schema.index(name)] = values
        return codes[fisher_yates_permutation(d.n, rng)]

    @staticmethod
    def anonymize_a_prime(d: Dataset, cfg: RandomizerConfig) -> PublishedTable:
        MechanismService.check_config(d, cfg)
        start = time.perf_counter()
        run_rng = derive_generator(cfg.seed)
        p = cfg.effective_p

        columns = {}
        for i, name in enumerate(d.schema.sensitive_in_order):
            partition = PartitionService.partition(d.project(name), cfg.l_prime)
            rng = run_rng if i == 0 else derive_generator(cfg.seed, _ATTRIBUTE_STREAM, i)
            _, columns[name] = MechanismService.randomize_partition(partition, p, rng)

        table = PublishedTable(
            schema=d.schema,
            codes=MechanismService._publish(d, columns, run_rng),
            l_prime=cfg.l_prime,
            mechanism="a_prime",
            p=cfg.p,
            seed_fingerprint=seed_fingerprint(cfg.seed),
        )
        logger.info("Dataset anonymized", mechanism="a_prime", n=d.n, l_prime=cfg.l_prime,
                    elapsed_ms=round((time.perf_counter() - start) * 1000, 2))
        return table

    # --- GLOBAL RANDOMIZATION (A) ---

    @staticmethod
    def anonymize_global_a(d: Dataset, p: float, seed: int) -> PublishedTable:
        """
        Keep each sensitive value with probability p, otherwise replace it by one
        of the other m-1 domain values uniformly.
        """
        if not 0.0 <= p <= 1.0:
            raise UsageError(f"p must lie in [0, 1], got {p}", p=p)
        run_rng = derive_generator(seed)
        by_id = np.argsort(d.ids, kind="stable")

        columns = {}
        for i, name in enumerate(d.schema.sensitive_in_order):
            m = d.schema.attribute(name).size
            if m < 2:
                raise InfeasibleConfigurationError(
                    f"Global randomization needs a domain of at least 2 values; '{name}' has {m}.",
                    attribute=name
                )
            rng = run_rng if i == 0 else derive_generator(seed, _ATTRIBUTE_STREAM, i)
            original = d.column(name)[by_id]
            keep = rng.random(d.n) < p
            shift = rng.integers(1, m, size=d.n)
            columns[name] = np.where(keep, original, (original + shift) % m)

        table = PublishedTable(
            schema=d.schema,
            codes=MechanismService._publish(d, columns, run_rng),
            l_prime=1,
            mechanism="global_a",
            p=p,
            seed_fingerprint=seed_fingerprint(seed),
        )
        logger.info("Dataset anonymized", mechanism="global_a", n=d.n, p=p)
        return table

    # --- ANATOMY ---

    @staticmethod
    def anonymize_anatomy(d: Dataset, l: int, seed: int, attribute: Optional[str] = None) -> AnatomyPublication:
        """
        Same decoy groups as A', published without randomization: NSA rows tagged
        with their group id, and exact per-group sensitive counts.
        """
        attribute = attribute or d.schema.sensitive_in_order[0]
        MechanismService.check_config(d, RandomizerConfig(mechanism="anatomy", l_prime=l, seed=seed))
        partition = PartitionService.partition(d.project(attribute), l)

        rng = derive_generator(seed)
        # Group labels are a seeded relabelling so ids reveal nothing about creation order.
        labels = rng.permutation(partition.r)
        by_id = np.argsort(d.ids, kind="stable")
        flat_ids = partition.member_ids.ravel()
        group_of_sorted = np.empty(d.n, dtype=np.int64)
        group_of_sorted[np.searchsorted(d.ids[by_id], flat_ids)] = labels[np.arange(d.n) // l]

        nsa = d.schema.nsa_names
        frame = pd.DataFrame({"group_id": group_of_sorted})
        for name in nsa:
            domain = np.asarray(d.schema.attribute(name).domain, dtype=object)
            frame[name] = domain[d.column(name)[by_id]]
        nsa_table = frame.iloc[fisher_yates_permutation(d.n, rng)].reset_index(drop=True)

        domain = partition.domain
        counts = Counter(
            (int(labels[g]), domain[c])
            for g, codes in enumerate(partition.member_codes.tolist()) for c in codes
        )
        sa_table = pd.DataFrame(
            [(g, v, k) for (g, v), k in sorted(counts.items())],
            columns=["group_id", "sa_value", "count"],
        )
        logger.info("Dataset anonymized", mechanism="anatomy", n=d.n, l=l, groups=partition.r)
        return AnatomyPublication(schema=d.schema, attribute=attribute, l=l,
                                  nsa_table=nsa_table, sa_table=sa_table)

    # --- LAPLACE ---

    @staticmethod
    def laplace_answers(true_counts, m_queries: int, epsilon: float, seed: int) -> np.ndarray:
        """Noisy answers for a batch of counting queries, Lap(m/epsilon) each."""
        if epsilon <= 0:
            raise UsageError(f"epsilon must be positive, got {epsilon}", epsilon=epsilon)
        if m_queries < 1:
            raise UsageError(f"m_queries must be >= 1, got {m_queries}", m_queries=m_queries)
        true_counts = np.asarray(true_counts, dtype=float)
        noise = derive_generator(seed).laplace(0.0, m_queries / epsilon, size=true_counts.shape)
        return true_counts + noise

    @staticmethod
    def laplace_answer(true_count: int, m_queries: int, epsilon: float, seed: int) -> float:
        return float(MechanismService.laplace_answers([true_count], m_queries, epsilon, seed)[0])

    # --- EXACT OUTPUT PROBABILITY ---

    @staticmethod
    def output_probability(d: Dataset, cfg: RandomizerConfig, d_hat: PublishedTable,
                           partition: Optional[DecoyPartition] = None) -> Fraction:
        """
        Exact probability that the mechanism assigns d_hat's sensitive values,
        rows matched to tuples by their (unique) NSA values. Row order is not
        part of the event. Single sensitive attribute only.
        """
        schema = d.schema
        if len(schema.sensitive_in_order) != 1:
            raise UsageError("output_probability supports a single sensitive attribute.")
        attribute = schema.sensitive_in_order[0]
        m = schema.attribute(attribute).size
        p = cfg.exact_p

        if cfg.mechanism == "a_prime":
            if partition is None:
                partition = PartitionService.partition(d.project(attribute), cfg.l_prime)
            q = cfg.exact_q
        elif cfg.mechanism == "global_a":
            q = (1 - p) / (m - 1) if m > 1 else Fraction(0)
        else:
            raise UsageError(f"No output probability for mechanism '{cfg.mechanism}'.")

        nsa_idx = [schema.index(name) for name in schema.nsa_names]
        sa_idx = schema.index(attribute)
        source: Dict[Tuple[int, ...], int] = {}
        for pos, row in enumerate(d.codes.tolist()):
            key = tuple(row[j] for j in nsa_idx)
            if key in source:
                raise AmbiguousMatchError(
                    "Source tuples share NSA values; rows of the published table cannot be matched.",
                    nsa=[schema.attribute(n).domain[c] for n, c in zip(schema.nsa_names, key)]
                )
            source[key] = pos

        if d_hat.n != d.n:
            return Fraction(0)
        published: Dict[int, int] = {}
        for row in d_hat.codes.tolist():
            pos = source.get(tuple(row[j] for j in nsa_idx))
            if pos is None or pos in published:
                return Fraction(0)
            published[pos] = row[sa_idx]

        ids = d.ids.tolist()
        true_codes = d.codes[:, sa_idx].tolist()
        prob = Fraction(1)
        for pos, value in published.items():
            if cfg.mechanism == "a_prime":
                group = PartitionService.locate(partition, ids[pos])
                if value not in partition.member_codes[group].tolist():
                    return Fraction(0)
            prob *= p if value == true_codes[pos] else q
            if prob == 0:
                return prob
        return prob
