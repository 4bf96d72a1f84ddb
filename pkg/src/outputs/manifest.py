from __future__ import annotations

import json
import logging
import subprocess
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Union

from src import __version__

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def code_version() -> str:
    """Package version plus the git commit when the tree is a checkout."""
    try:
        sha = subprocess.check_output(
            ["git", "rev-parse", "HEAD"], stderr=subprocess.DEVNULL, cwd=Path(__file__).resolve().parent
        ).decode().strip()
    except (OSError, subprocess.CalledProcessError):
        sha = "unknown"
    return f"{__version__}+{sha}"


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: Optional[int] = None
    param_checksums: Dict[str, str] = field(default_factory=dict)
    snapped_depth_nm: Optional[float] = None
    u0_ev: Optional[float] = None
    timings_s: Dict[str, float] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    extra: Dict[str, Any] = field(default_factory=dict)
    code_version: str = field(default_factory=code_version)

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        started = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - started
            self.timings_s[name] = self.timings_s.get(name, 0.0) + elapsed
            logger.info("Stage %s took %.2f s", name, elapsed)

    def add_output(self, path: Union[str, Path]) -> None:
        self.outputs.append(Path(path).name)

    def to_document(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "param_checksums": dict(sorted(self.param_checksums.items())),
            "snapped_depth_nm": self.snapped_depth_nm,
            "u0_ev": self.u0_ev,
            "code_version": self.code_version,
            "python": sys.version.split()[0],
            "timings_s": self.timings_s,
            "outputs": sorted(set(self.outputs)),
            "extra": self.extra,
            "written_at": datetime.now(timezone.utc).isoformat(),
        }


def write_manifest(out_dir: Union[str, Path], manifest: RunManifest) -> Path:
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / MANIFEST_NAME
    path.write_text(json.dumps(manifest.to_document(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("Manifest written to %s", path)
    return path


__all__ = ["MANIFEST_NAME", "RunManifest", "code_version", "write_manifest"]
