import struct

import numpy as np
import pytest

from src.models.flow import Trajectory
from src.services.field_service import grassmannian_winding_field
from src.storage.snapshot_store import (
    decode_snapshot,
    encode_snapshot,
    read_snapshot,
    read_trajectory,
    snapshot_path,
    write_snapshot,
    write_trajectory,
)
from src.utils.exceptions import SnapshotFormatError, StorageError


@pytest.fixture
def snapshot(domain2):
    field = grassmannian_winding_field(domain2, l=3, k=1, winding=[1, 1], seed=5, perturbation=0.4)
    return field.with_data(field.data, 0.125)


def test_header_layout(snapshot):
    blob = encode_snapshot(snapshot)
    assert blob[:4] == b"SGF1"
    magic, version, m, n, period, l, t = struct.unpack("<4sIIIdId", blob[:36])
    assert (version, m, n, period, l, t) == (1, 2, 16, 1.0, 3, 0.125)
    assert len(blob) == 36 + 8 * 256 * 6


def test_round_trip_is_bit_exact(snapshot, tmp_path):
    path = write_snapshot(snapshot, str(tmp_path / "one.sgf"))
    restored = read_snapshot(path)
    assert restored.domain == snapshot.domain
    assert restored.l == 3
    assert restored.t == snapshot.t
    assert restored.data.tobytes() == snapshot.data.tobytes()


def test_truncated_payload(snapshot):
    blob = encode_snapshot(snapshot)[:-5]
    with pytest.raises(SnapshotFormatError) as info:
        decode_snapshot(blob)
    assert info.value.offset == len(blob)
    with pytest.raises(SnapshotFormatError) as info:
        decode_snapshot(blob[:20])
    assert info.value.offset == 20


def test_bad_magic(snapshot):
    blob = b"XXXX" + encode_snapshot(snapshot)[4:]
    with pytest.raises(SnapshotFormatError) as info:
        decode_snapshot(blob)
    assert info.value.offset == 0


def test_big_endian_header_is_rejected(snapshot):
    header = struct.pack(">4sIIIdId", b"SGF1", 1, 2, 16, 1.0, 3, 0.125)
    blob = header + encode_snapshot(snapshot)[36:]
    with pytest.raises(SnapshotFormatError) as info:
        decode_snapshot(blob)
    assert info.value.offset == 4


def test_non_finite_payload(snapshot):
    blob = bytearray(encode_snapshot(snapshot))
    struct.pack_into("<d", blob, 36 + 8 * 11, float("nan"))
    with pytest.raises(SnapshotFormatError) as info:
        decode_snapshot(bytes(blob))
    assert info.value.offset == 36 + 8 * 11


def test_trailing_bytes(snapshot):
    blob = encode_snapshot(snapshot)
    with pytest.raises(SnapshotFormatError) as info:
        decode_snapshot(blob + b"\x00")
    assert info.value.offset == len(blob)


def test_trajectory_directory(snapshot, tmp_path):
    trajectory = Trajectory()
    trajectory.add_snapshot(snapshot.with_data(snapshot.data, 0.0), 0)
    trajectory.add_snapshot(snapshot, 10)
    trajectory.add_snapshot(snapshot.with_data(2 * snapshot.data, 0.25), 20)
    paths = write_trajectory(trajectory, str(tmp_path / "run"))
    assert paths[1] == snapshot_path(str(tmp_path / "run"), 10)
    assert paths[1].endswith("snapshot_00000010.sgf")

    restored = read_trajectory(str(tmp_path / "run"))
    assert restored.snapshot_steps == [0, 10, 20]
    np.testing.assert_array_equal(restored.times, [0.0, 0.125, 0.25])
    np.testing.assert_array_equal(restored.final.data, 2 * snapshot.data)


def test_missing_trajectory_directory(tmp_path):
    with pytest.raises(StorageError):
        read_trajectory(str(tmp_path / "absent"))
    (tmp_path / "empty").mkdir()
    with pytest.raises(StorageError):
        read_trajectory(str(tmp_path / "empty"))
