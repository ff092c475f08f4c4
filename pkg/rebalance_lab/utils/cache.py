"""On-disk model cache and run manifests."""

import json
import logging
import os
import platform
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional

from ..core.errors import DataError

logger = logging.getLogger(__name__)


class ModelCache:
    """``.npz`` artifacts addressed by kind and content digest."""

    def __init__(self, directory: str = ".cache"):
        self.directory = directory

    def path(self, kind: str, digest: str) -> str:
        return os.path.join(self.directory, f"{kind}-{digest}.npz")

    def has(self, kind: str, digest: str) -> bool:
        return os.path.exists(self.path(kind, digest))

    def prepare(self):
        os.makedirs(self.directory, exist_ok=True)


@dataclass
class RunManifest:
    """Everything needed to reproduce one command invocation."""

    command: str
    config: Dict[str, Any]
    corpus_digest: str
    seed: Optional[int] = None
    version: str = ""
    outputs: Dict[str, str] = field(default_factory=dict)
    python: str = field(default_factory=platform.python_version)

    def write(self, path: str):
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True, default=str)
            f.write("\n")
        logger.debug("Wrote manifest %s", path)

    @classmethod
    def load(cls, path: str) -> "RunManifest":
        try:
            with open(path, "r", encoding="utf-8") as f:
                return cls(**json.load(f))
        except (OSError, json.JSONDecodeError, TypeError) as e:
            raise DataError(f"unreadable manifest: {e}", path=path) from e


def manifest_path(output_path: str) -> str:
    """Manifest file that accompanies ``output_path``."""
    root, _ = os.path.splitext(output_path)
    return root + ".manifest.json"
