# app/repositories/run_repository.py

"""
Repository layer for run output directories.

One directory per run, named ``<command>-<sha256(config)[:12]>``, holding:
- ``config.json``: snapshot of the effective config
- CSV tables (comma separated, header row, floats with 17 significant digits)
- the JSON report
- ``metadata.json``: the only file with timestamps

Apart from the metadata, identical configs produce byte-identical files.
"""

import csv
import hashlib
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence

from pydantic import BaseModel

from app.core.config import settings
from app.core.run_log import log_run_event
from app.schemas.experiment_schema import ExperimentConfig


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.{settings.CSV_DIGITS}g}"
    if hasattr(value, "item"):
        return _cell(value.item())
    return str(value)


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    return value


class RunRepository:
    """
    Repository responsible for writing run artifacts.
    """

    @staticmethod
    def config_digest(config: ExperimentConfig) -> str:
        """
        Stable digest of a config.

        :param config: Effective config.
        :type config: ExperimentConfig

        :return: First 12 hex digits of the SHA-256 of the canonical JSON.
        :rtype: str
        """

        canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

    @staticmethod
    def create_run_dir(command: str, config: ExperimentConfig, base: Optional[str] = None) -> Path:
        """
        Create (or reuse) the run directory and write the config snapshot.

        :param command: Subcommand name.
        :type command: str

        :param config: Effective config.
        :type config: ExperimentConfig

        :param base: Base directory; config.output_dir or settings.OUTPUT_DIR when None.
        :type base: Optional[str]

        :return: Path of the run directory.
        :rtype: Path
        """

        root = Path(base or config.output_dir or settings.OUTPUT_DIR)
        run_dir = root / f"{command}-{RunRepository.config_digest(config)}"
        run_dir.mkdir(parents=True, exist_ok=True)
        RunRepository.write_json(run_dir / "config.json", config.model_dump(mode="json"))
        return run_dir

    @staticmethod
    def write_json(path: Path, payload: Dict[str, Any]) -> Path:
        """Write a JSON document with sorted keys; non-finite floats become null."""
        path.write_text(json.dumps(_json_safe(payload), sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return path

    @staticmethod
    def write_report(run_dir: Path, name: str, report: BaseModel) -> Path:
        """
        Write a report schema as ``<name>.json``.

        :return: Path of the written file.
        :rtype: Path
        """

        path = RunRepository.write_json(run_dir / f"{name}.json", report.model_dump(mode="json"))
        log_run_event("artifact_written", "success", run_id=run_dir.name, file=path.name)
        return path

    @staticmethod
    def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        """
        Write a CSV table.

        :param path: Target file.
        :type path: Path

        :param header: Column names.
        :type header: Sequence[str]

        :param rows: Row values; floats are written with settings.CSV_DIGITS significant digits.
        :type rows: Iterable[Sequence[Any]]

        :return: The path.
        :rtype: Path
        """

        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(value) for value in row])
        log_run_event("artifact_written", "success", run_id=path.parent.name, file=path.name)
        return path

    @staticmethod
    def write_metadata(run_dir: Path, command: str, started: datetime, **extra: Any) -> Path:
        """Write ``metadata.json`` with start and finish timestamps (UTC)."""
        payload = {
            "command": command,
            "started_at": started.isoformat(),
            "finished_at": datetime.now(timezone.utc).isoformat(),
            "environment": settings.ENVIRONMENT,
        }
        payload.update(extra)
        return RunRepository.write_json(run_dir / "metadata.json", payload)
