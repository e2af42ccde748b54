# app/repositories/__init__.py

from .run_repository import RunRepository

__all__ = [
    "RunRepository"
]
