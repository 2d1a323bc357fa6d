"""
Run manifests: the resolved command line of every artifact-producing run.

A manifest sits next to its artifact (``<file>.manifest.json``, or
``manifest.json`` inside an output directory) and carries enough to rerun the
command with ``python -m lno replay <manifest>``.
"""

import json
import logging
from dataclasses import dataclass, field, asdict
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from .errors import FormatError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def manifest_path(output: Union[str, Path]) -> Path:
    output = Path(output)
    if output.is_dir() or not output.suffix:
        return output / MANIFEST_NAME
    return output.with_name(output.name + ".manifest.json")


@dataclass
class RunManifest:
    subcommand: str
    argv: List[str]
    args: Dict[str, Any]
    seed: Optional[int] = None
    inputs: List[str] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    tool_version: str = ""
    created_at: str = field(default_factory=lambda: datetime.now().isoformat())

    def __post_init__(self):
        if not self.tool_version:
            from . import __version__
            self.tool_version = __version__

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'RunManifest':
        missing = [k for k in ("subcommand", "argv", "args") if k not in data]
        if missing:
            raise FormatError(f"Invalid manifest: missing field(s) {', '.join(missing)}")
        if not isinstance(data["argv"], list) or not all(isinstance(a, str) for a in data["argv"]):
            raise FormatError("Invalid manifest: field 'argv' must be a list of strings")
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})

    def save(self, output: Union[str, Path]) -> Path:
        """Write next to ``output`` (a file or a directory)"""
        path = manifest_path(output)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2, default=str)
        logger.debug("Wrote manifest %s", path)
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'RunManifest':
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Manifest not found: {path}")
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"Invalid manifest {path}: {e}") from e
        if not isinstance(data, dict):
            raise FormatError(f"Invalid manifest {path}: top level must be an object")
        return cls.from_dict(data)
