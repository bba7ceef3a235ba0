"""Atomic artifact writes, file digests, and per-run manifests.

Every pipeline command writes its primary artifacts through a temp-file +
rename so an interrupted run never leaves a partial file under the final
name, and drops a manifest next to its outputs from which the exact command
line can be reconstructed.
"""

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(1 << 20)
            if not chunk:
                break
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    argv: list[str]
    config: dict
    seed: int | None = None
    tool_version: str = __version__
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    started_at: str = ""
    finished_at: str = ""

    def start(self) -> "RunManifest":
        self.started_at = datetime.now(timezone.utc).isoformat()
        return self

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path) -> None:
        self.outputs[str(path)] = sha256_file(path)

    def write(self, path) -> None:
        self.finished_at = datetime.now(timezone.utc).isoformat()
        doc = {
            "tool_version": self.tool_version,
            "subcommand": self.subcommand,
            "argv": self.argv,
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }
        atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def manifest_path_for(primary_output) -> Path:
    primary = Path(primary_output)
    if primary.suffix:
        return primary.with_name(primary.name + ".manifest.json")
    return primary / "manifest.json"
