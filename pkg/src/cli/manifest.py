"""Run manifests: provenance of every artifact a command produced."""

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Union

import structlog
from pydantic import BaseModel, ConfigDict, Field

from .. import __version__

logger = structlog.get_logger(__name__)

MANIFEST_TEMPLATE = "manifest_{command}.json"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunManifest(BaseModel):
    """Config hash, produced artifacts and timestamps of one command run."""

    model_config = ConfigDict(extra="forbid")

    command: str
    config_hash: Optional[str] = None
    artifacts: List[str] = Field(default_factory=list)
    started: str = Field(default_factory=_now)
    finished: Optional[str] = None
    version: str = __version__

    def add(self, path: Union[str, Path]) -> None:
        self.artifacts.append(str(path))

    def missing(self) -> List[str]:
        return [p for p in self.artifacts if not Path(p).exists()]


def write_manifest(manifest: RunManifest, directory: Union[str, Path]) -> Path:
    """Stamp ``finished`` and write ``manifest_<command>.json``; every listed artifact must exist."""
    missing = manifest.missing()
    if missing:
        raise FileNotFoundError(f"manifest lists missing artifacts: {missing}")
    manifest.finished = _now()
    path = Path(directory) / MANIFEST_TEMPLATE.format(command=manifest.command)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest.model_dump(), indent=2), encoding="utf-8")
    logger.info("manifest written", path=str(path), artifacts=len(manifest.artifacts))
    return path


def read_manifest(path: Union[str, Path]) -> RunManifest:
    return RunManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))
