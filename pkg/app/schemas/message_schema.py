# app/schemas/message_schema.py

"""
Message Schema
--------------

Uniform ``{"detail": ...}`` body of error responses.
"""

from pydantic import BaseModel


class Message(BaseModel):
    """
    Error response body.

    :param detail: ``<ErrorName>: <diagnostic>`` for simulator errors.
    :type detail: str
    """

    detail: str
