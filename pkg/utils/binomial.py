import math
from fractions import Fraction

import numpy as np
from scipy import special


def log_binom_pmf(k, n, p: float):
    """
    log C(n, k) p^k (1-p)^(n-k) via log-gamma, safe for large n.
    Vectorised over k; endpoints p in {0, 1} handled exactly.
    """
    k = np.asarray(k, dtype=float)
    n = float(n)
    with np.errstate(divide="ignore"):
        log_comb = special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)
        if p == 0.0:
            return np.where(k == 0, 0.0, -np.inf)
        if p == 1.0:
            return np.where(k == n, 0.0, -np.inf)
        out = log_comb + k * math.log(p) + (n - k) * math.log1p(-p)
    return np.where((k < 0) | (k > n), -np.inf, out)


def range_mass(n: int, p: float, lo: int, hi: int) -> float:
    """Pr[lo <= X <= hi] for X ~ Binomial(n, p), compensated summation of log-space terms."""
    lo, hi = max(lo, 0), min(hi, n)
    if lo > hi:
        return 0.0
    terms = np.exp(log_binom_pmf(np.arange(lo, hi + 1), n, p))
    return min(1.0, math.fsum(terms.tolist()))


def exact_pmf(k: int, n: int, p: Fraction) -> Fraction:
    if k < 0 or k > n:
        return Fraction(0)
    return math.comb(n, k) * p ** k * (1 - p) ** (n - k)


def exact_range_mass(n: int, p: Fraction, lo: int, hi: int) -> Fraction:
    """Big-rational oracle for range_mass."""
    lo, hi = max(lo, 0), min(hi, n)
    return sum((exact_pmf(k, n, p) for k in range(lo, hi + 1)), Fraction(0))
