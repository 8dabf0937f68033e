from functools import reduce
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import settings
from core.errors import EstimationError, SchemaError, UsageError
from core.logger import logger
from models.schemas import CountQuery, Schema
from models.states import BayesResult, StateVector, TransitionMatrix
from models.tables import AnatomyPublication, PublishedTable
from utils.binomial import log_binom_pmf

_M0 = np.eye(2)

class EstimatorService:
    """
    Count reconstruction from published artifacts only. Nothing here touches
    the original Dataset or a DecoyPartition.
    """

    # --- VALIDATION ---

    @staticmethod
    def validate_query(schema: Schema, q: CountQuery) -> None:
        for name, value in q.nsa_predicate.items():
            if name not in schema.nsa_names:
                raise SchemaError(f"'{name}' is not a non-sensitive attribute of the schema.", attribute=name)
            if value not in schema.attribute(name).codes:
                raise SchemaError(f"Value '{value}' is not in the domain of '{name}'.", attribute=name, value=value)
        for name, value in q.sa_values.items():
            if name not in schema.sa_names:
                raise SchemaError(f"'{name}' is not a sensitive attribute of the schema.", attribute=name)
            if value not in schema.attribute(name).codes:
                raise SchemaError(f"Value '{value}' is not in the domain of '{name}'.", attribute=name, value=value)

    @staticmethod
    def _sa_code(schema: Schema, attribute: Optional[str], s: str) -> Tuple[str, int]:
        attribute = attribute or schema.sensitive_in_order[0]
        if attribute not in schema.sa_names:
            raise SchemaError(f"'{attribute}' is not a sensitive attribute.", attribute=attribute)
        codes = schema.attribute(attribute).codes
        if s not in codes:
            raise SchemaError(f"Unknown value '{s}' for sensitive attribute '{attribute}'.",
                              attribute=attribute, value=s)
        return attribute, codes[s]

    # --- SINGLE VALUE COUNTS ---

    @staticmethod
    def estimate_sa_count(d_prime: PublishedTable, s: str, attribute: Optional[str] = None) -> int:
        """The maximum-likelihood estimate of f_s is its published count f'_s."""
        attribute, code = EstimatorService._sa_code(d_prime.schema, attribute, s)
        return int(np.count_nonzero(d_prime.column(attribute) == code))

    @staticmethod
    def sa_count_likelihood(observed: int, f: int, l_prime: int) -> float:
        """Pr(f'_s = observed | f_s = f): Binomial(f * l', 1/l')."""
        return float(np.exp(log_binom_pmf(observed, f * l_prime, 1.0 / l_prime)))

    # --- TRANSITION MATRICES ---

    @staticmethod
    def _sa_block(f: float, n: float, l_prime: int) -> np.ndarray:
        if l_prime == 1:
            # Nothing is diverted: every tuple publishes its own value.
            return np.eye(2)
        a01 = f / n
        return np.array([
            [1.0 - a01, a01],
            [(l_prime - 1) / l_prime, 1.0 / l_prime],
        ])

    @staticmethod
    def _check_mass(x: StateVector, n: float) -> None:
        if n <= 0:
            raise EstimationError("Cannot build a transition matrix for N = 0.")
        for i in range(1, x.w + 1):
            if x.sa_frequency(i) > n * (1 + 1e-12):
                raise EstimationError(
                    f"Frequency of sensitive value {i} ({x.sa_frequency(i)}) exceeds N = {n}.",
                    index=i
                )

    @staticmethod
    def build_single_sa_matrix(x: StateVector, l_prime: int, n: float) -> TransitionMatrix:
        """
        States (not P, not s), (not P, s), (P, not s), (P, s). With f_s = x1 + x3:
        a01 = a23 = f_s/N, a10 = a32 = (l'-1)/l', a11 = a33 = 1/l'.
        """
        if x.k != 4:
            raise EstimationError(f"Single-SA matrix needs 4 states, got {x.k}.")
        EstimatorService._check_mass(x, n)
        block = EstimatorService._sa_block(x.sa_frequency(1), n, l_prime)
        return TransitionMatrix(np.kron(_M0, block))

    @staticmethod
    def build_multi_sa_matrix(x: StateVector, l_prime: int, n: float, w: int) -> TransitionMatrix:
        """M = M0 (x) M1 (x) ... (x) Mw with f_{s_i} marginalised from x."""
        if x.k != 2 ** (w + 1):
            raise EstimationError(f"State vector of length {x.k} does not match w = {w}.", w=w)
        EstimatorService._check_mass(x, n)
        blocks = [EstimatorService._sa_block(x.sa_frequency(i), n, l_prime) for i in range(1, w + 1)]
        return TransitionMatrix(reduce(np.kron, blocks, _M0))

    # --- ITERATIVE BAYES ---

    @staticmethod
    def iterative_bayes(y: StateVector, l_prime: int, n: float, w: int,
                        tol: Optional[float] = None, max_iter: Optional[int] = None) -> BayesResult:
        """
        x <- x_i * sum_j y_j a_ij / sum_r a_rj x_r, starting at x = y and rebuilding
        a from the current x every round.
        """
        tol = settings.BAYES_TOL if tol is None else tol
        max_iter = settings.BAYES_MAX_ITER if max_iter is None else max_iter
        if tol <= 0 or max_iter < 1:
            raise UsageError("tol must be > 0 and max_iter >= 1", tol=tol, max_iter=max_iter)
        if n <= 0:
            raise EstimationError("Cannot reconstruct counts for N = 0.")
        if y.k != 2 ** (w + 1):
            raise EstimationError(f"Observed vector of length {y.k} does not match w = {w}.", w=w)
        if abs(y.total - n) > 1e-9 * n:
            raise EstimationError(f"Observed counts sum to {y.total}, expected N = {n}.", total=y.total)

        observed = y.counts
        x = observed.copy()
        mass_history = [float(x.sum())]
        diagnostics: List[str] = []
        skipped = set()
        converged = False
        iterations = 0

        for iterations in range(1, max_iter + 1):
            a = EstimatorService.build_multi_sa_matrix(StateVector(x), l_prime, n, w).entries
            denom = x @ a
            live = denom > 0
            dead = np.flatnonzero(~live & (observed > 0))
            for j in dead.tolist():
                if j not in skipped:
                    skipped.add(j)
                    diagnostics.append(f"iteration {iterations}: state {j} observed {observed[j]:g} "
                                       "but unreachable under current estimate; term skipped")
            ratio = np.divide(observed, denom, out=np.zeros_like(observed), where=live)
            x_new = x * (a @ ratio)

            if not np.all(np.isfinite(x_new)) or np.any(x_new < 0):
                raise EstimationError(
                    f"Numerical failure at iteration {iterations}: state estimate {x_new.tolist()}",
                    iteration=iterations
                )
            mass_history.append(float(x_new.sum()))

            change = np.abs(x_new - x)
            large = x >= settings.BAYES_SMALL_COMPONENT
            rel_ok = np.all(change[large] <= tol * x[large])
            abs_ok = np.all(change[~large] <= settings.BAYES_ABS_TOL)
            x = x_new
            if rel_ok and abs_ok:
                converged = True
                break

        if not converged:
            logger.warning("Iterative reconstruction did not converge", iterations=iterations, w=w,
                           l_prime=l_prime)
        return BayesResult(
            x=StateVector(x),
            iterations=iterations,
            converged=converged,
            mass_history=mass_history,
            diagnostics=diagnostics,
        )

    # --- QUERIES OVER D' ---

    @staticmethod
    def observed_states(d_prime: PublishedTable, q: CountQuery) -> StateVector:
        """y_j: rows of D' in state j, P bit most significant then s_1..s_w."""
        EstimatorService.validate_query(d_prime.schema, q)
        w = q.w
        index = d_prime.mask(q.nsa_predicate).astype(np.int64) << w
        for i, (name, value) in enumerate(q.sa_values.items(), start=1):
            code = d_prime.schema.attribute(name).codes[value]
            index |= (d_prime.column(name) == code).astype(np.int64) << (w - i)
        return StateVector(np.bincount(index, minlength=2 ** (w + 1)))

    @staticmethod
    def estimate_query_detailed(d_prime: PublishedTable, q: CountQuery, tol: Optional[float] = None,
                                max_iter: Optional[int] = None) -> BayesResult:
        y = EstimatorService.observed_states(d_prime, q)
        if not q.nsa_predicate and q.w == 1:
            # No predicate: the (P, s) count is f'_s itself.
            return BayesResult(x=y, iterations=0, converged=True, mass_history=[y.total])
        return EstimatorService.iterative_bayes(y, d_prime.l_prime, d_prime.n, q.w, tol, max_iter)

    @staticmethod
    def estimate_query(d_prime: PublishedTable, q: CountQuery, tol: Optional[float] = None,
                       max_iter: Optional[int] = None) -> float:
        """Estimated count of the all-positive state (P, s_1, ..., s_w)."""
        if d_prime.mechanism == "global_a":
            if q.w != 1:
                raise UsageError("The global randomization estimator handles single-SA queries only.")
            (attribute, value), = q.sa_values.items()
            EstimatorService.validate_query(d_prime.schema, q)
            return EstimatorService.estimate_global_a(d_prime, value, d_prime.p, q.nsa_predicate, attribute)
        result = EstimatorService.estimate_query_detailed(d_prime, q, tol, max_iter)
        return float(result.x.counts[-1])

    @staticmethod
    def estimate_pool(d_prime: PublishedTable, queries: Sequence[CountQuery], tol: Optional[float] = None,
                      max_iter: Optional[int] = None) -> List[Tuple[float, int]]:
        """
        (estimate, iterations) per query. Single-SA queries sharing a predicate
        reuse one scan of D'.
        """
        results: List[Optional[Tuple[float, int]]] = [None] * len(queries)
        by_predicate: Dict[Tuple, List[int]] = {}
        for k, q in enumerate(queries):
            if q.w == 1 and q.nsa_predicate:
                EstimatorService.validate_query(d_prime.schema, q)
                (attribute,) = q.sa_values
                by_predicate.setdefault((tuple(q.nsa_predicate.items()), attribute), []).append(k)
            else:
                r = EstimatorService.estimate_query_detailed(d_prime, q, tol, max_iter)
                results[k] = (float(r.x.counts[-1]), r.iterations)

        n = d_prime.n
        for (predicate, attribute), members in by_predicate.items():
            size = d_prime.schema.attribute(attribute).size
            mask = d_prime.mask(dict(predicate))
            column = d_prime.column(attribute)
            inside = np.bincount(column[mask], minlength=size)
            overall = np.bincount(column, minlength=size)
            n_p = int(mask.sum())
            for k in members:
                code = d_prime.schema.attribute(attribute).codes[queries[k].sa_values[attribute]]
                ps, total_s = int(inside[code]), int(overall[code])
                y = StateVector([n - n_p - total_s + ps, total_s - ps, n_p - ps, ps])
                r = EstimatorService.iterative_bayes(y, d_prime.l_prime, n, 1, tol, max_iter)
                results[k] = (float(r.x.counts[-1]), r.iterations)
        return results

    # --- BASELINE ESTIMATORS ---

    @staticmethod
    def estimate_anatomy(pub: AnatomyPublication, q: CountQuery) -> float:
        """Sum over groups of (matching NSA rows) * (count of s in the group) / l."""
        if q.w != 1:
            raise UsageError("Anatomy estimation supports single-SA queries only.")
        (attribute, value), = q.sa_values.items()
        if attribute != pub.attribute:
            raise UsageError(f"Publication covers '{pub.attribute}', query asks for '{attribute}'.")
        for name in q.nsa_predicate:
            if name not in pub.nsa_table.columns:
                raise SchemaError(f"'{name}' is not a published non-sensitive column.", attribute=name)
        matching = pub.matching_rows_per_group(q)
        counts = pub.sa_counts(value)
        return float(matching.mul(counts, fill_value=0).sum()) / pub.l

    @staticmethod
    def estimate_global_a(d_prime: PublishedTable, s: str, p: float,
                          nsa_predicate: Optional[Dict[str, str]] = None,
                          attribute: Optional[str] = None) -> float:
        """
        Inversion estimate (f'_s - N q~) / (p - q~), q~ = (1-p)/(m-1), over the rows
        matching the NSA predicate; clamped to [0, N].
        """
        attribute, code = EstimatorService._sa_code(d_prime.schema, attribute, s)
        m = d_prime.schema.attribute(attribute).size
        if p is None or abs(p - 1.0 / m) < 1e-12:
            raise EstimationError(f"p = 1/m = {1.0 / m:.6g} makes the randomization non-invertible.", p=p)
        q_tilde = (1.0 - p) / (m - 1)
        mask = d_prime.mask(nsa_predicate or {})
        n = int(mask.sum())
        observed = int(np.count_nonzero(d_prime.column(attribute)[mask] == code))
        estimate = (observed - n * q_tilde) / (p - q_tilde)
        return float(min(max(estimate, 0.0), n))
