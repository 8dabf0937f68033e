from fastapi import Request, HTTPException, status
from fastapi.responses import JSONResponse
from fastapi.exceptions import RequestValidationError
from core.errors import PrivacyToolkitError
from core.logger import logger
import traceback

async def validation_exception_handler(request: Request, exc: RequestValidationError):
    """
    Handle request validation errors (Pydantic) with a friendly summary.
    """
    error_details = exc.errors()
    logger.error("Validation error", path=request.url.path, errors=error_details)

    # Surface the first specific problem
    try:
        first_error = error_details[0]
        loc = first_error['loc']
        field_name = str(loc[-1]).replace('_', ' ').capitalize()
        if loc and loc[0] in ('query', 'body') and len(loc) > 1:
            field_name = f"{field_name} ({loc[0]})"
        error_type = first_error['type']

        if error_type == 'missing':
            msg = f"{field_name} is required."
        elif error_type in ('greater_than', 'greater_than_equal', 'less_than', 'less_than_equal'):
            msg = f"{field_name} is out of range: {first_error.get('msg')}."
        else:
            msg = first_error.get('msg', "Invalid parameters provided.")
    except Exception:
        msg = "Invalid parameters provided."

    return JSONResponse(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
        content={
            "status": "error",
            "message": "Parameter verification failed.",
            "detail": msg
        }
    )

async def toolkit_exception_handler(request: Request, exc: PrivacyToolkitError):
    """
    Domain errors carry their own status code and actionable message.
    """
    logger.warning("Toolkit error", path=request.url.path, error=exc.message, context=exc.context)
    return JSONResponse(
        status_code=exc.status_code,
        content={
            "status": "error",
            "message": type(exc).__name__,
            "detail": exc.message
        }
    )

async def generic_exception_handler(request: Request, exc: Exception):
    """
    Catch-all for unhandled errors.
    """
    logger.error(
        "Internal error",
        path=request.url.path,
        error=str(exc),
        traceback=traceback.format_exc()
    )
    return JSONResponse(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        content={
            "status": "error",
            "message": "Internal Error",
            "detail": str(exc)
        }
    )

async def http_exception_handler(request: Request, exc: HTTPException):
    """
    Standardize HTTP errors with a consistent 'message' field.
    """
    logger.warning("HTTP issue", path=request.url.path, detail=exc.detail)
    return JSONResponse(
        status_code=exc.status_code,
        content={
            "status": "error",
            "message": exc.detail
        }
    )
