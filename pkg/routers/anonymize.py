from typing import Any

import pandas as pd
from fastapi import APIRouter

from core.errors import UsageError
from models.schemas import AnonymizeRequest, EstimateRequest, EstimateResponse, PublishedRowsResponse
from services.dataset_service import DatasetService
from services.estimator_service import EstimatorService
from services.mechanism_service import MechanismService

router = APIRouter(tags=["Publication"])

@router.post("/anonymize", response_model=PublishedRowsResponse)
def anonymize(request: AnonymizeRequest) -> Any:
    """
    Sanitize inline rows. The response holds the published rows and l' only;
    decoy groups never leave the server.
    """
    cfg = request.config
    d = DatasetService.from_records(request.rows, request.schema_config, cfg.seed)
    deleted = 0
    if request.enforce_eligibility:
        d, report = DatasetService.enforce_eligibility(d, cfg.l_prime)
        deleted = len(report.deleted_ids)

    if cfg.mechanism == "a_prime":
        table = MechanismService.anonymize_a_prime(d, cfg)
    elif cfg.mechanism == "global_a":
        table = MechanismService.anonymize_global_a(d, cfg.effective_p, cfg.seed)
    else:
        raise UsageError("Anatomy publications are produced by the command line tool only.")

    frame = table.to_frame()
    return PublishedRowsResponse(
        columns=list(frame.columns),
        rows=frame.values.tolist(),
        l_prime=table.l_prime,
        mechanism=table.mechanism,
        deleted=deleted,
    )

@router.post("/estimate", response_model=EstimateResponse)
def estimate(request: EstimateRequest) -> Any:
    """
    Estimate a count query from published rows.
    """
    frame = pd.DataFrame(request.rows, columns=request.columns, dtype=str)
    table = DatasetService.published_from_frame(
        frame, request.schema_config, {"l_prime": request.l_prime}
    )
    result = EstimatorService.estimate_query_detailed(table, request.query, request.tol, request.max_iter)
    return EstimateResponse(
        estimate=float(result.x.counts[-1]),
        iterations=result.iterations,
        converged=result.converged,
    )
