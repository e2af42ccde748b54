# app/core/exception_handlers.py

"""
Global Exception Handlers
-------------------------

Exception handling for the HTTP surface.

Handlers are registered for:
- HTTPException raised by routes
- request body validation errors
- ``SimulationError`` raised by the services
- uncaught internal errors

Every response has the shape ``{"detail": ...}``.
"""

from fastapi import Request, status
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from app.core.exceptions import InsufficientConditioning, SimulationError, ValidationFailure
from app.core.run_log import log_run_event


async def http_exception_handler(request: Request, exc: StarletteHTTPException) -> JSONResponse:
    """
    Handles HTTPException raised in any route.

    :param request: The FastAPI request instance.
    :type request: Request

    :param exc: The exception object.
    :type exc: StarletteHTTPException

    :return: JSON response with the exception details and status code.
    :rtype: JSONResponse
    """

    return JSONResponse(status_code=exc.status_code, content={"detail": exc.detail})


async def validation_exception_handler(request: Request, exc: RequestValidationError) -> JSONResponse:
    """
    Handles request body validation errors (422), e.g. a malformed experiment config.

    :param exc: The validation error object.
    :type exc: RequestValidationError

    :return: JSON response with the pydantic error list.
    :rtype: JSONResponse
    """

    return JSONResponse(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
        content={"detail": exc.errors()},
    )


def status_for(exc: SimulationError) -> int:
    """
    HTTP status of a simulator error.

    Rejected components map to 422, too few conditioned replicas to 409 and
    every other runtime error to 500.
    """

    if isinstance(exc, ValidationFailure):
        return status.HTTP_422_UNPROCESSABLE_ENTITY
    if isinstance(exc, InsufficientConditioning):
        return status.HTTP_409_CONFLICT
    return status.HTTP_500_INTERNAL_SERVER_ERROR


async def simulation_exception_handler(request: Request, exc: SimulationError) -> JSONResponse:
    """
    Handles errors raised by the simulator services.

    :param request: The FastAPI request instance.
    :type request: Request

    :param exc: The simulator error.
    :type exc: SimulationError

    :return: JSON response ``{"detail": "<ErrorName>: <diagnostic>"}``.
    :rtype: JSONResponse
    """

    code = status_for(exc)
    log_run_event("http_error", "failed", path=request.url.path, error=type(exc).__name__, http_status=code)
    return JSONResponse(status_code=code, content={"detail": f"{type(exc).__name__}: {exc.detail}"})


async def internal_exception_handler(request: Request, exc: Exception) -> JSONResponse:
    """
    Handles uncaught internal server errors (500).

    :return: JSON response with error message.
    :rtype: JSONResponse
    """

    return JSONResponse(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        content={"detail": str(exc)},
    )
