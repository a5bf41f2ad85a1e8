"""
Run manifests and JSON reports.

A manifest records everything needed to rerun a command: the argument vector,
the resolved configuration, seeds, the toolkit version, wall-clock timing and
SHA-256 digests of every input and output file.
"""

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from utils.config import TOOLKIT_VERSION
from utils.error_handling import ParseError, validate_input, ValidationError

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = '.manifest.json'
MANIFEST_FIELDS = ['command', 'argv', 'config', 'seeds', 'version', 'input_digests', 'output_digests']


def file_digest(path: str) -> str:
    """SHA-256 of a file's bytes, hex encoded."""
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for block in iter(lambda: handle.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()


def _plain(value: Any) -> Any:
    """numpy scalars/arrays to JSON types; NaN and infinities become null."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.integer, np.bool_)):
        return value.item()
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path: str, document: Dict[str, Any]) -> None:
    """Write a key-value report as sorted, indented JSON."""
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(_plain(document), handle, indent=2, sort_keys=True, allow_nan=False)
        handle.write('\n')


def read_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            return json.load(handle)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, e.lineno, e.colno, str(path))


@dataclass
class RunManifest:
    """
    Reproduction record of one CLI command.

    Attributes:
        command (str): Subcommand name
        argv (List[str]): Full argument vector, replayable through ``main``
        config (Dict[str, Any]): Resolved settings
        seeds (List[int]): Seeds used
        version (str): Toolkit version
        input_digests (Dict[str, str]): Path -> SHA-256 of inputs
        output_digests (Dict[str, str]): Path -> SHA-256 of outputs
        started_at (str): UTC start time, ISO 8601
        wall_clock_seconds (float): Elapsed time
    """

    command: str
    argv: List[str]
    config: Dict[str, Any] = field(default_factory=dict)
    seeds: List[int] = field(default_factory=list)
    version: str = TOOLKIT_VERSION
    input_digests: Dict[str, str] = field(default_factory=dict)
    output_digests: Dict[str, str] = field(default_factory=dict)
    started_at: str = ''
    wall_clock_seconds: float = 0.0
    _clock: float = field(default=0.0, repr=False)

    @classmethod
    def start(cls, command: str, argv: Sequence[str], config: Dict[str, Any],
              seeds: Sequence[int], inputs: Sequence[str] = ()) -> 'RunManifest':
        manifest = cls(command, list(argv), dict(config), [int(s) for s in seeds])
        manifest.started_at = datetime.now(timezone.utc).isoformat()
        manifest._clock = time.perf_counter()
        manifest.input_digests = {str(p): file_digest(p) for p in inputs}
        return manifest

    def finish(self, outputs: Sequence[str], path: str) -> None:
        """Digest ``outputs``, stop the clock and write the manifest to ``path``."""
        self.output_digests = {str(p): file_digest(p) for p in outputs}
        self.wall_clock_seconds = time.perf_counter() - self._clock
        write_json(path, self.to_dict())
        logger.info(f"Manifest written to {path} ({self.wall_clock_seconds:.2f}s)")

    def to_dict(self) -> Dict[str, Any]:
        document = asdict(self)
        document.pop('_clock')
        return document

    @classmethod
    def load(cls, path: str) -> 'RunManifest':
        """
        Read a manifest.

        Raises:
            ParseError: If the file is not valid JSON
            ValidationError: If required fields are missing
        """
        document = read_json(path)
        validate_input(document, MANIFEST_FIELDS, "manifest")
        if document['version'] != TOOLKIT_VERSION:
            logger.warning(f"Manifest written by version {document['version']}, running {TOOLKIT_VERSION}")
        known = {k: document[k] for k in ('command', 'argv', 'config', 'seeds', 'version',
                                          'input_digests', 'output_digests', 'started_at',
                                          'wall_clock_seconds') if k in document}
        return cls(**known)

    def changed_files(self, digests: Dict[str, str]) -> List[str]:
        return sorted(p for p, d in digests.items() if not Path(p).exists() or file_digest(p) != d)


def manifest_path(output: str, explicit: Optional[str] = None) -> str:
    if explicit:
        return explicit
    return str(output) + MANIFEST_SUFFIX


def require_inputs_unchanged(manifest: RunManifest) -> None:
    """
    Raises:
        ValidationError: If an input file differs from the recorded digest
    """
    changed = manifest.changed_files(manifest.input_digests)
    if changed:
        raise ValidationError(f"Inputs changed since the manifest was written: {changed}")
