# app/main.py

"""
Main application entry point for the FastAPI service.

This module initializes the FastAPI application, registers the exception
handlers, configures CORS and includes the experiments router.

The application exposes a root endpoint ("/") used primarily for health checks.
"""

from typing import Any

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from starlette.exceptions import HTTPException as StarletteHTTPException

from app.core.config import settings
from app.core.exception_handlers import (
    http_exception_handler,
    internal_exception_handler,
    simulation_exception_handler,
    validation_exception_handler,
)
from app.core.exceptions import SimulationError
from app.core.run_log import configure_logging
from app.routers import experiments


configure_logging(settings.LOG_LEVEL)

# Initialize FastAPI instance
app: Any = FastAPI(
    title="Distributed SA Simulator",
    description="Gossip-coupled stochastic approximation experiments and their verification.",
    version="1.0.0",
)

# Register global handlers
app.add_exception_handler(StarletteHTTPException, http_exception_handler)
app.add_exception_handler(RequestValidationError, validation_exception_handler)
app.add_exception_handler(SimulationError, simulation_exception_handler)
app.add_exception_handler(Exception, internal_exception_handler)

# ----------------------------------------------------------------------
# CORS Middleware
# ----------------------------------------------------------------------
app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.CORS_ORIGINS,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# ----------------------------------------------------------------------
# Routers
# ----------------------------------------------------------------------
app.include_router(experiments.router)


# ----------------------------------------------------------------------
# Root Route
# ----------------------------------------------------------------------
@app.get("/")
def root():
    """
    Root endpoint used for health checking.

    :return: dict[str, str]: A simple JSON message confirming that the API is running.
    """

    return {"message": "Distributed SA simulator is running"}
