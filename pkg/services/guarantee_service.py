import math
from fractions import Fraction
from typing import Iterable, List, Optional, Tuple

from config.settings import settings
from core.errors import UsageError
from models.schemas import GuaranteeParams, GuaranteeRow, UtilityThreshold
from utils.binomial import exact_range_mass, range_mass

class GuaranteeService:
    """
    Analytical utility and privacy guarantees of A' with p = 1/l'.
    f'_s ~ Binomial(l' f_s, 1/l'), so E[f'_s] = f_s and Var[f'_s] = f_s (1 - 1/l').
    """

    @staticmethod
    def _check(l_prime: int, varepsilon: float) -> None:
        if l_prime < 1:
            raise UsageError(f"l' must be >= 1, got {l_prime}", l_prime=l_prime)
        if not varepsilon > 0:
            raise UsageError(f"varepsilon must be positive, got {varepsilon}", varepsilon=varepsilon)

    @staticmethod
    def utility_threshold(l_prime: int, varepsilon: float, t_e: float) -> UtilityThreshold:
        """
        T_f = sqrt(1 / (l' varepsilon^2 T_E)). `rounded` is the nearest integer,
        `safe` the ceiling, which is the smallest integer honouring T_E.
        """
        GuaranteeService._check(l_prime, varepsilon)
        if not 0 < t_e <= 1:
            raise UsageError(f"T_E must lie in (0, 1], got {t_e}", t_e=t_e)
        real = math.sqrt(1.0 / (l_prime * varepsilon ** 2 * t_e))
        return UtilityThreshold(real=real, rounded=int(math.floor(real + 0.5)), safe=int(math.ceil(real)))

    @staticmethod
    def error_bound(l_prime: int, varepsilon: float, f_s: int) -> float:
        """Chebyshev closed form min(1, 1 / (l' varepsilon^2 f_s^2))."""
        GuaranteeService._check(l_prime, varepsilon)
        if f_s < 1:
            raise UsageError(f"f_s must be >= 1, got {f_s}", f_s=f_s)
        return min(1.0, 1.0 / (l_prime * varepsilon ** 2 * f_s ** 2))

    @staticmethod
    def variance_error_bound(l_prime: int, varepsilon: float, f_s: int) -> float:
        """Chebyshev with the binomial variance: min(1, (1 - 1/l') / (varepsilon^2 f_s))."""
        GuaranteeService._check(l_prime, varepsilon)
        if f_s < 1:
            raise UsageError(f"f_s must be >= 1, got {f_s}", f_s=f_s)
        return min(1.0, (1.0 - 1.0 / l_prime) / (varepsilon ** 2 * f_s))

    @staticmethod
    def tail_window(f_s: int, varepsilon: float) -> Tuple[int, int]:
        """[ceil((1-eps) f_s), floor((1+eps) f_s)], evaluated exactly on the decimal eps."""
        eps = Fraction(str(varepsilon))
        return math.ceil((1 - eps) * f_s), math.floor((1 + eps) * f_s)

    @staticmethod
    def in_range_mass(f_s: int, l_prime: int, varepsilon: float) -> float:
        GuaranteeService._check(l_prime, varepsilon)
        if f_s < 1:
            raise UsageError(f"f_s must be >= 1, got {f_s}", f_s=f_s)
        lo, hi = GuaranteeService.tail_window(f_s, varepsilon)
        return range_mass(l_prime * f_s, 1.0 / l_prime, lo, hi)

    @staticmethod
    def privacy_tail(f_s: int, l_prime: int, varepsilon: float) -> float:
        """T_P: probability that f'_s leaves the window around f_s."""
        return max(0.0, 1.0 - GuaranteeService.in_range_mass(f_s, l_prime, varepsilon))

    @staticmethod
    def exact_privacy_tail(f_s: int, l_prime: int, varepsilon: float) -> Fraction:
        """Big-rational T_P, for n = l' f_s up to EXACT_TAIL_MAX_N."""
        GuaranteeService._check(l_prime, varepsilon)
        n = l_prime * f_s
        if n > settings.EXACT_TAIL_MAX_N:
            raise UsageError(f"Exact tail limited to n <= {settings.EXACT_TAIL_MAX_N}, got {n}", n=n)
        lo, hi = GuaranteeService.tail_window(f_s, varepsilon)
        return 1 - exact_range_mass(n, Fraction(1, l_prime), lo, hi)

    @staticmethod
    def guarantee_params(l_prime: int, varepsilon: float, t_e: float, f_s: Optional[int] = None) -> GuaranteeParams:
        threshold = GuaranteeService.utility_threshold(l_prime, varepsilon, t_e)
        return GuaranteeParams(
            l_prime=l_prime,
            varepsilon=varepsilon,
            t_e=t_e,
            t_f=threshold.real,
            t_f_rounded=threshold.rounded,
            t_p=None if f_s is None else GuaranteeService.privacy_tail(f_s, l_prime, varepsilon),
        )

    @staticmethod
    def guarantee_tables(l_prime: int, varepsilon: float, f_range: Iterable[int]) -> List[GuaranteeRow]:
        """Bound-versus-frequency and tail-versus-frequency curves, one row per f_s."""
        rows = []
        for f_s in f_range:
            if f_s < 1:
                raise UsageError(f"f_s must be >= 1, got {f_s}", f_s=f_s)
            rows.append(GuaranteeRow(
                f_s=f_s,
                chebyshev_bound=GuaranteeService.error_bound(l_prime, varepsilon, f_s),
                exact_tail=GuaranteeService.privacy_tail(f_s, l_prime, varepsilon),
                variance_bound=GuaranteeService.variance_error_bound(l_prime, varepsilon, f_s),
            ))
        return rows
