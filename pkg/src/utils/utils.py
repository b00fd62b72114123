"""
Shared helpers

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

Logging set-up for the command line, digests, and CSV/JSON writers that
embed a provenance block which read_provenance parses back.
"""

import hashlib
import json
import logging
import os
from importlib import metadata
from pathlib import Path

import numpy as np
import pandas as pd

from src.core.errors import DecodeError, ValidationError

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
THREADS_ENV = "TRUMPET_THREADS"
TRACKED_PACKAGES = ("numpy", "scipy", "pandas", "matplotlib", "pyyaml")


def setup_logging(verbosity=0):
    """Configure the root logger: -1 quiet, 0 info, 1 debug."""
    level = {-1: logging.WARNING, 0: logging.INFO}.get(verbosity, logging.DEBUG)
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level)
    return level


def thread_count():
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from exc
    if value < 1:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


def file_digest(path, chunk_size=1 << 20):
    sha = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(chunk_size), b""):
            sha.update(block)
    return sha.hexdigest()


def config_digest(config):
    text = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_to_jsonable)
    return hashlib.sha256(text.encode()).hexdigest()


def package_versions():
    versions = {}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def _to_jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def provenance(command, config=None, inputs=None, **extra):
    """Provenance dict for an output file."""
    record = {
        "command": command,
        "inputs": {str(k): v for k, v in (inputs or {}).items()},
        "versions": package_versions(),
        "config": config or {},
    }
    record.update(extra)
    return record


def write_csv(frame, path, provenance_record=None):
    """Write a DataFrame with a '# key: json' comment block in front."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for key, value in (provenance_record or {}).items():
            fh.write(f"# {key}: {json.dumps(value, sort_keys=True, default=_to_jsonable)}\n")
        frame.to_csv(fh, index=False, float_format="%.10g")
    logger.debug("wrote %s (%d rows)", path, len(frame))
    return path


def read_provenance(path):
    record = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(": ")
            try:
                record[key] = json.loads(value)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: malformed provenance line {line.strip()!r}") from exc
    return record


def read_csv(path, required=(), numeric=()):
    """Read a comment-prefixed CSV; columns in numeric must parse as numbers."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"file not found: {path}")
    try:
        frame = pd.read_csv(path, comment="#")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DecodeError(f"{path}: not a readable CSV table ({exc})") from exc
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise ValidationError(f"{path}: missing columns {missing}")
    for column in numeric:
        if column not in frame.columns:
            continue
        try:
            frame[column] = pd.to_numeric(frame[column])
        except (TypeError, ValueError) as exc:
            raise DecodeError(f"{path}: column {column!r} holds non-numeric values") from exc
    return frame


def write_json(payload, path, provenance_record=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = dict(payload)
    if provenance_record is not None:
        body["provenance"] = provenance_record
    path.write_text(json.dumps(body, indent=2, sort_keys=True, default=_to_jsonable))
    logger.debug("wrote %s", path)
    return path


def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
