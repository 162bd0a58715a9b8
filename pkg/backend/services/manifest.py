"""
Run manifests: config snapshot, seeds, hashes of every written file and
wall-clock totals per stage.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from .. import __version__
from ..errors import ArgumentError, DependencyError
from ..logging_utils import get_logger

logger = get_logger(__name__)

MANIFEST_NAME = "manifest.json"


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    config: Dict[str, Any]
    seeds: Dict[str, int] = field(default_factory=dict)
    operator: Optional[Dict[str, Any]] = None
    artifacts: Dict[str, str] = field(default_factory=dict)
    stages: List[str] = field(default_factory=list)
    wall_ms: Dict[str, float] = field(default_factory=dict)
    tool_version: str = __version__
    adam_epsilon: float = 1e-8
    created_at: str = field(default_factory=lambda: datetime.now().isoformat(timespec="seconds"))

    def record_stage(self, stage: str, wall_ms: float) -> None:
        self.stages.append(stage)
        self.wall_ms[stage] = round(wall_ms, 3)

    def hash_outputs(self, output_dir: Union[str, Path]) -> None:
        """Hash every file under output_dir except the manifest itself."""
        root = Path(output_dir)
        self.artifacts = {
            path.relative_to(root).as_posix(): file_sha256(path)
            for path in sorted(root.rglob("*"))
            if path.is_file() and path.name != MANIFEST_NAME
        }

    @property
    def total_wall_ms(self) -> float:
        return float(sum(self.wall_ms.values()))

    def to_dict(self) -> Dict[str, Any]:
        return {**asdict(self), 'total_wall_ms': self.total_wall_ms}

    def save(self, output_dir: Union[str, Path]) -> Path:
        path = Path(output_dir) / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True, default=str))
        logger.info(f"Manifest written: {path} ({len(self.artifacts)} artifacts)")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        if not path.exists():
            raise DependencyError(f"No manifest at {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ArgumentError(f"Manifest {path} is not valid JSON: {e}") from e
        data.pop('total_wall_ms', None)
        return cls(**data)

    def verify(self, output_dir: Union[str, Path], names: Optional[List[str]] = None) -> Dict[str, List[str]]:
        """
        Compare recorded hashes with the files on disk.

        Returns:
            {'missing': [...], 'changed': [...]}
        """
        root = Path(output_dir)
        missing, changed = [], []
        for name, digest in self.artifacts.items():
            if names is not None and name not in names:
                continue
            path = root / name
            if not path.exists():
                missing.append(name)
            elif file_sha256(path) != digest:
                changed.append(name)
        return {'missing': missing, 'changed': changed}
