import os
import time

import uvicorn
from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from config.settings import settings
from core.errors import PrivacyToolkitError
from core.logger import logger
from core.error_handler import (
    validation_exception_handler,
    toolkit_exception_handler,
    generic_exception_handler,
    http_exception_handler
)
from routers import guarantees_router, publication_router

app = FastAPI(
    title=settings.PROJECT_NAME,
    version=settings.VERSION,
    description=(
        "Publishes microdata whose sensitive values are randomized inside decoy groups, "
        "reconstructs counts from the published table, and reports the analytical "
        "utility and privacy guarantees."
    ),
    openapi_tags=[
        {"name": "Guarantees", "description": "Utility thresholds, error bounds and privacy tails."},
        {"name": "Publication", "description": "Anonymize inline rows and estimate counts on published rows."},
    ],
    docs_url="/docs",
    redoc_url="/redoc"
)

@app.on_event("startup")
async def startup_event():
    if settings.UNSAFE_TEST_MODE:
        logger.warning("UNSAFE_TEST_MODE is on: p != 1/l' will be accepted for a_prime")
    logger.info(
        "Application bootstrap complete",
        status="ready",
        version=settings.VERSION,
        default_l_prime=settings.DEFAULT_L_PRIME,
        bayes_tol=settings.BAYES_TOL,
    )

# --- MIDDLEWARE ---

@app.middleware("http")
async def log_requests(request: Request, call_next):
    """
    Log method, path, status and duration of every request. Bodies are never
    logged since they may hold unpublished sensitive rows.
    """
    start_time = time.perf_counter()
    try:
        response: Response = await call_next(request)
    except Exception as e:
        logger.error("Unhandled exception in request pipeline", path=request.url.path, error=str(e))
        response = JSONResponse(
            status_code=500,
            content={"status": "error", "message": "Internal Server Error", "detail": str(e)}
        )

    elapsed_ms = round((time.perf_counter() - start_time) * 1000, 2)
    response.headers["X-Process-Time-Ms"] = str(elapsed_ms)
    logger.info(
        "Inbound request processed",
        method=request.method,
        path=request.url.path,
        status_code=response.status_code,
        duration_ms=elapsed_ms
    )
    return response

# --- EXCEPTION HANDLERS ---

app.add_exception_handler(RequestValidationError, validation_exception_handler)
app.add_exception_handler(PrivacyToolkitError, toolkit_exception_handler)
app.add_exception_handler(StarletteHTTPException, http_exception_handler)
app.add_exception_handler(Exception, generic_exception_handler)

# --- ROUTES (API V1) ---

app.include_router(guarantees_router, prefix=settings.API_V1_STR)
app.include_router(publication_router, prefix=settings.API_V1_STR)

@app.get("/")
async def root():
    v1 = settings.API_V1_STR
    return {
        "message": settings.PROJECT_NAME,
        "version": settings.VERSION,
        "docs": "/docs",
        "endpoints": [
            f"GET {v1}/guarantees/threshold",
            f"GET {v1}/guarantees/tail",
            f"GET {v1}/guarantees/table",
            f"POST {v1}/anonymize",
            f"POST {v1}/estimate",
        ],
    }

@app.get("/health")
async def health():
    return {"status": "online"}

if __name__ == "__main__":
    port = int(os.environ.get("PORT", 8000))
    uvicorn.run("main:app", host="0.0.0.0", port=port)
