"""
Provenance record written at the end of every command.

`run_manifest.json` holds the command, the fully resolved config, sha256
hashes of inputs and outputs, the package version and the wall-clock
duration. Directories are hashed as a tree (sorted relative paths plus
file hashes), so rerunning a command on identical inputs reproduces every
hash and only the duration changes.
"""

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from helpers.logging import MAIN_LOGGER_NAME
from helpers.manifest import sha256_file, write_json_atomic
from helpers.version import TOOL_VERSION

logger = logging.getLogger(MAIN_LOGGER_NAME)

RUN_MANIFEST_FILENAME = "run_manifest.json"


def hash_path(path: Path | str, exclude: frozenset[str] = frozenset()) -> str:
    path = Path(path)
    if path.is_file():
        return sha256_file(path)
    digest = hashlib.sha256()
    for child in sorted(p for p in path.rglob("*") if p.is_file()):
        rel = child.relative_to(path).as_posix()
        if rel in exclude:
            continue
        digest.update(rel.encode("utf-8") + b"\0" + sha256_file(child).encode("ascii"))
    return digest.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict[str, Any]
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    tool_version: str = TOOL_VERSION
    duration_seconds: float = 0.0
    extra: dict[str, Any] = field(default_factory=dict)

    def write(self, out_dir: Path | str) -> Path:
        path = write_json_atomic(Path(out_dir) / RUN_MANIFEST_FILENAME, asdict(self))
        logger.info(f"Wrote run manifest {path}")
        return path


class RunRecorder:
    """Times a command and writes its RunManifest on `finish`."""

    def __init__(self, command: str, config: dict[str, Any]):
        self.command = command
        self.config = config
        self.started = time.perf_counter()

    def finish(
        self,
        out_dir: Path | str,
        inputs: list[Path | str] = (),
        outputs: list[Path | str] = (),
        extra: dict[str, Any] | None = None,
    ) -> RunManifest:
        out_dir = Path(out_dir)
        manifest = RunManifest(
            command=self.command,
            config=self.config,
            inputs={str(p): hash_path(p) for p in inputs},
            outputs={
                str(p): hash_path(p, exclude=frozenset({RUN_MANIFEST_FILENAME}))
                for p in outputs
            },
            duration_seconds=round(time.perf_counter() - self.started, 3),
            extra=extra or {},
        )
        manifest.write(out_dir)
        return manifest


def render_config(config: dict[str, Any]) -> str:
    """Resolved config as printed by `--dry-run`."""
    return json.dumps(config, indent=2, sort_keys=True)
