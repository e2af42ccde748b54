# app/core/run_log.py

"""
Utility for structured experiment event logs.

This module provides ``log_run_event``, used by services and the CLI to
record what happened during an experiment, such as:
- Replica start and completion
- Runs truncated by the boundedness cap
- Validation verdicts
- Artifacts written to a run directory

Events go through the standard ``logging`` machinery under the
``app.events`` logger, so they can be routed or silenced like any other
log record.
"""

import logging
from typing import Any, Dict, Optional


logger = logging.getLogger("app.events")

_LEVELS: Dict[str, int] = {
    "success": logging.INFO,
    "info": logging.INFO,
    "skipped": logging.INFO,
    "warning": logging.WARNING,
    "failed": logging.WARNING,
    "error": logging.ERROR,
}


def configure_logging(level: str = "INFO") -> None:
    """
    Install a single stream handler on the ``app`` logger tree.

    Calling it twice does not duplicate handlers.

    :param level: Level name such as "INFO" or "DEBUG".
    :type level: str

    :return: None
    """

    root = logging.getLogger("app")
    root.setLevel(level.upper())
    if not any(getattr(h, "_dsa_handler", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        handler._dsa_handler = True  # type: ignore[attr-defined]
        root.addHandler(handler)


def log_run_event(
    action: str,
    status: str,
    detail: str = "",
    run_id: Optional[str] = None,
    **context: Any,
) -> Dict[str, Any]:
    """
    Emit a structured experiment event.

    :param action: High-level name of the action (e.g. "replica_finished", "capped").
    :type action: str

    :param status: Result status ("success", "failed", "warning", ...).
    :type status: str

    :param detail: Optional descriptive message.
    :type detail: str

    :param run_id: Run directory name, when the event belongs to a run.
    :type run_id: Optional[str]

    :param context: Extra key/value pairs appended to the message.

    :return: The event as a dictionary (useful to callers that also persist it).
    :rtype: Dict[str, Any]
    """

    event: Dict[str, Any] = {"action": action, "status": status, "detail": detail}
    if run_id is not None:
        event["run_id"] = run_id
    event.update(context)

    pairs = " ".join(f"{key}={value}" for key, value in sorted(context.items()))
    message = f"{action} [{status}]"
    if run_id is not None:
        message += f" run={run_id}"
    if detail:
        message += f" {detail}"
    if pairs:
        message += f" {pairs}"

    logger.log(_LEVELS.get(status, logging.INFO), message, extra={"event": event})
    return event
