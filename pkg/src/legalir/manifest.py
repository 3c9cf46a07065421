"""Run manifests.

Every run writes ``manifest.json`` next to its artifacts: the effective
configuration, its hash, a fingerprint of every input file and the seeds.
A run can be repeated from the manifest plus the referenced inputs.
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from . import __version__
from .exceptions import FormatError
from .formatters import JSONFormatter, write_atomic

MANIFEST_NAME = "manifest.json"

# Manifests hold config and fingerprints only; anything bigger is corrupt
MAX_MANIFEST_FILE_SIZE = 1024 * 1024


def config_hash(config: Mapping[str, Any]) -> str:
    """sha256 of the canonical JSON of ``config``, 32 hex characters."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:32]


def fingerprint_file(path: Path) -> str:
    """sha256 of a file, or of every file under a directory with its relative name."""
    digest = hashlib.sha256()
    path = Path(path)
    files = sorted(p for p in path.rglob("*") if p.is_file()) if path.is_dir() else [path]
    for file in files:
        if file != path:
            digest.update(file.relative_to(path).as_posix().encode("utf-8") + b"\x00")
        with open(file, "rb") as f:
            for chunk in iter(lambda: f.read(1 << 16), b""):
                digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Provenance record of one run."""

    task: str
    config: dict[str, Any]
    config_hash: str
    inputs: dict[str, str] = field(default_factory=dict)
    seeds: dict[str, int] = field(default_factory=dict)
    tool_version: str = __version__
    created_at: str = ""

    @classmethod
    def build(
        cls,
        task: str,
        config: Mapping[str, Any],
        input_paths: Mapping[str, Path | None],
        seeds: Mapping[str, int],
    ) -> RunManifest:
        """Fingerprint the inputs that are set and stamp the creation time."""
        inputs = {
            key: fingerprint_file(Path(path))
            for key, path in sorted(input_paths.items())
            if path is not None
        }
        return cls(
            task=task,
            config=dict(config),
            config_hash=config_hash(config),
            inputs=inputs,
            seeds=dict(seeds),
            created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )

    def to_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "task": self.task,
            "config": self.config,
            "config_hash": self.config_hash,
            "inputs": self.inputs,
            "seeds": self.seeds,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> RunManifest:
        return cls(
            task=data["task"],
            config=dict(data["config"]),
            config_hash=data["config_hash"],
            inputs=dict(data.get("inputs", {})),
            seeds={k: int(v) for k, v in data.get("seeds", {}).items()},
            tool_version=data.get("tool_version", ""),
            created_at=data.get("created_at", ""),
        )

    def save(self, directory: Path) -> Path:
        path = Path(directory) / MANIFEST_NAME
        write_atomic(path, JSONFormatter(indent=2).format(self.to_dict()))
        return path

    @classmethod
    def load(cls, path: Path) -> RunManifest:
        """Read a manifest, rejecting oversized or corrupt files."""
        path = Path(path)
        try:
            if path.stat().st_size > MAX_MANIFEST_FILE_SIZE:
                raise FormatError(f"{path}: manifest exceeds {MAX_MANIFEST_FILE_SIZE} bytes")
            data = json.loads(path.read_text(encoding="utf-8"))
            return cls.from_dict(data)
        except (json.JSONDecodeError, KeyError, TypeError, AttributeError, ValueError) as e:
            raise FormatError(f"{path}: corrupt manifest: {e}") from e

    def verify_inputs(self, input_paths: Mapping[str, Path | None]) -> list[str]:
        """Keys whose current file content differs from the recorded fingerprint."""
        changed = []
        for key, expected in self.inputs.items():
            path = input_paths.get(key)
            if path is None or not Path(path).exists() or fingerprint_file(Path(path)) != expected:
                changed.append(key)
        return changed
