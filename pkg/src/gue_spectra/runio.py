"""Result persistence: CSV/JSON writers and per-command run manifests.

Numerical CSV columns are written with 17 significant digits, so a rerun
with the same manifest parameters reproduces them byte-identically.
"""

from __future__ import annotations

import hashlib
import json
import platform
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

SCHEMA_VERSION = 1


def format_value(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_json(path: Path, payload: dict) -> Path:
    path = Path(path)
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    path.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    return path


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """Record of one command run: parameters, seed, and output digests."""

    command: str
    params: dict
    seed: int | None = None
    version: str = __version__
    started: str = field(default_factory=_now)
    finished: str | None = None
    outputs: list = field(default_factory=list)

    def record(self, path: Path) -> Path:
        self.outputs.append({"path": Path(path).name, "sha256": sha256_of(path)})
        return path

    def write(self, outdir: Path) -> Path:
        self.finished = _now()
        payload = {
            "command": self.command,
            "tool": "gue-spectra",
            "version": self.version,
            "python": platform.python_version(),
            "params": self.params,
            "seed": self.seed,
            "started": self.started,
            "finished": self.finished,
            "outputs": self.outputs,
        }
        return write_json(Path(outdir) / f"{self.command}_manifest.json", payload)
