"""Bit-exact little-endian snapshot files.

Layout: magic "SGF1", version u32, m u32, n_per_axis u32, period f64, l u32,
t f64 (36 bytes), then per site in row-major order the lower triangle of the
matrix, row-major, as f64.
"""
from typing import List
import glob
import logging
import os
import re
import struct

import numpy as np

from src.models.fields import SymmetricMatrixField, packed_size
from src.models.flow import Trajectory
from src.models.lattice import LatticeDomain
from src.utils.constants import RunStatus, SnapshotFormat
from src.utils.exceptions import SnapshotFormatError, StorageError

logger = logging.getLogger(__name__)

_HEADER = struct.Struct(SnapshotFormat.HEADER_STRUCT)
# byte offsets of the header fields
_OFFSET_VERSION = 4
_OFFSET_M = 8
_OFFSET_N = 12
_OFFSET_PERIOD = 16
_OFFSET_L = 24


def encode_snapshot(field: SymmetricMatrixField) -> bytes:
    domain = field.domain
    header = _HEADER.pack(
        SnapshotFormat.MAGIC, SnapshotFormat.VERSION, domain.m, domain.n_per_axis,
        domain.period, field.l, field.t,
    )
    payload = np.ascontiguousarray(field.data, dtype=SnapshotFormat.PAYLOAD_DTYPE).tobytes()
    return header + payload


def decode_snapshot(blob: bytes) -> SymmetricMatrixField:
    if len(blob) < _HEADER.size:
        raise SnapshotFormatError(f"Header needs {_HEADER.size} bytes, file has {len(blob)}", offset=len(blob))
    magic, version, m, n, period, l, t = _HEADER.unpack_from(blob)
    if magic != SnapshotFormat.MAGIC:
        raise SnapshotFormatError(f"Bad magic {magic!r}", offset=0)
    if version != SnapshotFormat.VERSION:
        raise SnapshotFormatError(f"Unsupported version {version}", offset=_OFFSET_VERSION)
    if m < 2:
        raise SnapshotFormatError(f"Invalid dimension m={m}", offset=_OFFSET_M)
    if n < 4:
        raise SnapshotFormatError(f"Invalid n_per_axis={n}", offset=_OFFSET_N)
    if not np.isfinite(period) or period <= 0:
        raise SnapshotFormatError(f"Invalid period {period}", offset=_OFFSET_PERIOD)
    if l < 1:
        raise SnapshotFormatError(f"Invalid matrix size l={l}", offset=_OFFSET_L)
    if not np.isfinite(t):
        raise SnapshotFormatError(f"Invalid time stamp {t}", offset=_HEADER.size - 8)

    count = n ** m * packed_size(l)
    expected = _HEADER.size + 8 * count
    if len(blob) < expected:
        raise SnapshotFormatError(f"Payload truncated: expected {expected} bytes, got {len(blob)}", offset=len(blob))
    if len(blob) > expected:
        raise SnapshotFormatError(f"Trailing data after {expected} bytes", offset=expected)

    values = np.frombuffer(blob, dtype=SnapshotFormat.PAYLOAD_DTYPE, count=count, offset=_HEADER.size)
    bad = np.nonzero(~np.isfinite(values))[0]
    if bad.size:
        raise SnapshotFormatError("Non-finite payload value", offset=_HEADER.size + 8 * int(bad[0]))
    domain = LatticeDomain(m, n, period)
    return SymmetricMatrixField(domain, l, values.astype(float).reshape(n ** m, packed_size(l)), t)


def write_snapshot(field: SymmetricMatrixField, path: str) -> str:
    try:
        with open(path, "wb") as handle:
            handle.write(encode_snapshot(field))
    except OSError as e:
        raise StorageError(f"Could not write snapshot {path}: {e}", path=path)
    return path


def read_snapshot(path: str) -> SymmetricMatrixField:
    try:
        with open(path, "rb") as handle:
            blob = handle.read()
    except OSError as e:
        raise StorageError(f"Could not read snapshot {path}: {e}", path=path)
    return decode_snapshot(blob)


def snapshot_path(directory: str, step: int) -> str:
    return os.path.join(directory, SnapshotFormat.FILE_PATTERN.format(step=step))


def write_trajectory(trajectory: Trajectory, directory: str) -> List[str]:
    os.makedirs(directory, exist_ok=True)
    paths = [
        write_snapshot(snapshot, snapshot_path(directory, step))
        for snapshot, step in zip(trajectory.snapshots, trajectory.snapshot_steps)
    ]
    logger.info(f"Wrote {len(paths)} snapshots to {directory}")
    return paths


def _step_of(path: str) -> int:
    match = re.search(r"snapshot_(\d+)\.sgf$", os.path.basename(path))
    return int(match.group(1)) if match else -1


def read_trajectory(directory: str, status: RunStatus = RunStatus.COMPLETED) -> Trajectory:
    """Snapshots of a run directory in step order; the series is not stored in snapshots."""
    if not os.path.isdir(directory):
        raise StorageError(f"Trajectory directory {directory} does not exist", path=directory)
    paths = sorted(glob.glob(os.path.join(directory, SnapshotFormat.GLOB)), key=_step_of)
    if not paths:
        raise StorageError(f"No snapshot files in {directory}", path=directory)
    trajectory = Trajectory(status=status)
    for path in paths:
        trajectory.add_snapshot(read_snapshot(path), _step_of(path))
    logger.debug(f"Read {len(paths)} snapshots from {directory}")
    return trajectory

