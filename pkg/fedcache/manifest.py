import hashlib
import pathlib
from collections.abc import Iterator
from contextlib import contextmanager
from datetime import datetime, timezone
from typing import Any, Literal

from loguru import logger
from pydantic import BaseModel, Field

from .common.exceptions import StageError, UsageError
from .common.utils.package import get_version

MANIFEST_NAME = "manifest.json"

Status = Literal["running", "completed", "failed"]


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def file_checksum(path: pathlib.Path) -> str:
    return hashlib.sha256(pathlib.Path(path).read_bytes()).hexdigest()


class StageRecord(BaseModel):
    """Progress of one pipeline stage and the files it produced, keyed by name relative to the run directory."""
    name: str
    status: Status = "running"
    started_at: datetime = Field(default_factory=utcnow)
    finished_at: datetime | None = None
    files: dict[str, str] = {}


class RunManifest(BaseModel):
    """Everything needed to reproduce a run: code version, configuration snapshot and per-stage checksums.

    The manifest is written to `<out>/manifest.json` before the first stage starts and rewritten whenever a stage
    starts, produces a file or finishes.
    """
    command: str
    version: str | None = Field(default_factory=get_version)
    config: dict[str, Any]
    status: Status = "running"
    created_at: datetime = Field(default_factory=utcnow)
    updated_at: datetime = Field(default_factory=utcnow)
    stages: list[StageRecord] = []
    error: str | None = None

    @property
    def files(self) -> dict[str, str]:
        return {name: checksum for stage in self.stages for name, checksum in stage.files.items()}

    def write(self, out: pathlib.Path):
        self.updated_at = utcnow()
        (out / MANIFEST_NAME).write_text(self.model_dump_json(indent=2))

    def add_file(self, out: pathlib.Path, path: pathlib.Path):
        """Register a file written by the running stage."""
        if not self.stages:
            raise UsageError("No stage is running")

        self.stages[-1].files[str(path.relative_to(out))] = file_checksum(path)
        self.write(out)

    @contextmanager
    def stage(self, name: str, out: pathlib.Path) -> Iterator[StageRecord]:
        """Track a stage; a failure marks the stage and the run as failed and is re-raised as `StageError`."""
        record = StageRecord(name=name)
        self.stages.append(record)
        self.write(out)
        logger.info("Stage `{stage}` started", stage=name)

        try:
            yield record
        except Exception as exc:
            record.status = "failed"
            record.finished_at = utcnow()
            self.status = "failed"
            self.error = f"{name}: {exc}"
            self.write(out)
            if isinstance(exc, StageError):
                raise
            raise StageError(name, exc) from exc

        record.status = "completed"
        record.finished_at = utcnow()
        self.write(out)
        logger.info("Stage `{stage}` completed", stage=name)

    def complete(self, out: pathlib.Path):
        self.status = "completed"
        self.write(out)


def load_manifest(out: pathlib.Path) -> RunManifest:
    return RunManifest.model_validate_json((out / MANIFEST_NAME).read_text())
