from typing import Any, List, Optional

from fastapi import APIRouter, Query

from models.schemas import GuaranteeParams, GuaranteeRow
from services.guarantee_service import GuaranteeService

router = APIRouter(prefix="/guarantees", tags=["Guarantees"])

@router.get("/threshold", response_model=GuaranteeParams)
async def utility_threshold(
    l_prime: int = Query(..., ge=1),
    varepsilon: float = Query(..., gt=0),
    t_e: float = Query(..., gt=0, le=1),
    f_s: Optional[int] = Query(None, ge=1)
) -> Any:
    """
    (varepsilon, T_E, T_f) utility threshold; with f_s, also the privacy tail T_P.
    """
    return GuaranteeService.guarantee_params(l_prime, varepsilon, t_e, f_s)

@router.get("/tail")
async def privacy_tail(
    f_s: int = Query(..., ge=1),
    l_prime: int = Query(..., ge=1),
    varepsilon: float = Query(..., gt=0)
) -> Any:
    """
    Exact binomial privacy tail for one frequency.
    """
    lo, hi = GuaranteeService.tail_window(f_s, varepsilon)
    mass = GuaranteeService.in_range_mass(f_s, l_prime, varepsilon)
    return {
        "f_s": f_s,
        "l_prime": l_prime,
        "varepsilon": varepsilon,
        "window": [lo, hi],
        "in_range_mass": mass,
        "t_p": max(0.0, 1.0 - mass),
    }

@router.get("/table", response_model=List[GuaranteeRow])
async def guarantee_table(
    l_prime: int = Query(..., ge=1),
    varepsilon: float = Query(..., gt=0),
    f_min: int = Query(1, ge=1),
    f_max: int = Query(100, ge=1, le=100000)
) -> Any:
    """
    Chebyshev bound and exact tail for every f_s in [f_min, f_max].
    """
    return GuaranteeService.guarantee_tables(l_prime, varepsilon, range(f_min, f_max + 1))
