"""
Photon tag and time trace files

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

Binary tag layout, little-endian: a header (magic "PTAG", version u32,
channel count u32, duration in ps u64, 32-byte configuration digest)
followed by packed records (time in ps u64, channel u8). CSV exports carry
the same header fields in their provenance block.
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from src.core.errors import DecodeError, ValidationError
from src.simulation.photons import PS_PER_S, PhotonTags, TimeTrace
from src.utils.utils import read_csv, read_provenance, write_csv

logger = logging.getLogger(__name__)

MAGIC = b"PTAG"
VERSION = 1
HEADER_DTYPE = np.dtype([
    ("magic", "S4"),
    ("version", "<u4"),
    ("channels", "<u4"),
    ("duration_ps", "<u8"),
    ("digest", "S32"),
])
RECORD_DTYPE = np.dtype([("t", "<u8"), ("ch", "u1")])


def write_tags_binary(tags, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.zeros(1, dtype=HEADER_DTYPE)
    header["magic"] = MAGIC
    header["version"] = VERSION
    header["channels"] = tags.n_channels
    header["duration_ps"] = tags.duration_ps
    header["digest"] = tags.digest.encode("ascii")[:32]
    records = np.empty(len(tags), dtype=RECORD_DTYPE)
    records["t"] = tags.times_ps
    records["ch"] = tags.channels
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(records.tobytes())
    logger.debug("wrote %d tags to %s", len(tags), path)
    return path


def read_tags_binary(path):
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < HEADER_DTYPE.itemsize:
        raise DecodeError(f"{path}: file too short for a tag header")
    header = np.frombuffer(raw[:HEADER_DTYPE.itemsize], dtype=HEADER_DTYPE)[0]
    if header["magic"] != MAGIC:
        raise DecodeError(f"{path}: bad magic {header['magic']!r}, expected {MAGIC!r}")
    if header["version"] != VERSION:
        raise DecodeError(f"{path}: unsupported tag format version {header['version']}")
    body = raw[HEADER_DTYPE.itemsize:]
    if len(body) % RECORD_DTYPE.itemsize:
        raise DecodeError(f"{path}: truncated record section ({len(body)} bytes)")
    records = np.frombuffer(body, dtype=RECORD_DTYPE)
    try:
        return PhotonTags(
            times_ps=records["t"].astype(np.int64),
            channels=records["ch"],
            duration_ps=int(header["duration_ps"]),
            n_channels=int(header["channels"]),
            digest=header["digest"].decode("ascii"),
        )
    except ValidationError as exc:
        raise DecodeError(f"{path}: {exc}") from exc


def write_tags_csv(tags, path, provenance_record=None):
    record = {
        "format": "PTAG-CSV",
        "channels": tags.n_channels,
        "duration_ps": tags.duration_ps,
        "digest": tags.digest,
    }
    record.update(provenance_record or {})
    frame = pd.DataFrame({"time_ps": tags.times_ps, "channel": tags.channels.astype(int)})
    return write_csv(frame, path, record)


def read_tags_csv(path):
    meta = read_provenance(path)
    if meta.get("format") != "PTAG-CSV":
        raise DecodeError(f"{path}: not a photon tag CSV export")
    frame = read_csv(path, required=("time_ps", "channel"), numeric=("time_ps", "channel"))
    try:
        return PhotonTags(
            times_ps=frame["time_ps"].to_numpy(dtype=np.int64),
            channels=frame["channel"].to_numpy(dtype=np.uint8),
            duration_ps=int(meta["duration_ps"]),
            n_channels=int(meta["channels"]),
            digest=str(meta.get("digest", "")),
        )
    except (KeyError, ValueError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc


def read_tags(path):
    """Read a tag file in either format, chosen by its first bytes."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"tag file not found: {path}")
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_tags_binary(path)
    if head.startswith(b"#"):
        return read_tags_csv(path)
    raise DecodeError(f"{path}: neither a binary PTAG file nor a tag CSV")


def write_trace_csv(trace, path, provenance_record=None):
    record = {"format": "TRACE-CSV", "bin_width_s": trace.bin_width}
    record.update(provenance_record or {})
    frame = pd.DataFrame({"bin_start_s": trace.bin_starts, "counts": trace.counts})
    return write_csv(frame, path, record)


def read_trace_csv(path):
    meta = read_provenance(path)
    if meta.get("format") != "TRACE-CSV":
        raise DecodeError(f"{path}: not a time trace CSV")
    frame = read_csv(path, required=("bin_start_s", "counts"), numeric=("bin_start_s", "counts"))
    bin_width = float(meta.get("bin_width_s", 0.0))
    if bin_width <= 0 and len(frame) > 1:
        bin_width = float(np.median(np.diff(frame["bin_start_s"])))
    try:
        return TimeTrace(bin_width=bin_width, counts=frame["counts"].to_numpy(dtype=np.int64))
    except ValueError as exc:
        raise DecodeError(f"{path}: {exc}") from exc


def describe_tags(tags):
    return {
        "events": len(tags),
        "channels": tags.n_channels,
        "duration_s": tags.duration_ps / PS_PER_S,
        "mean_rate_per_s": tags.mean_rate,
        "digest": tags.digest,
    }
