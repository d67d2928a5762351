import struct

import numpy as np
import pytest
from conftest import randomized

from fleetrec.domain import D1_DEFAULT
from fleetrec.energymodel import (
    Checkpoint,
    CheckpointCorruptError,
    CheckpointDimensionError,
    CheckpointError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    OptimizerState,
    checkpoint_version,
    load_checkpoint,
    predict_links,
    read_checkpoint,
    save_checkpoint,
)
from fleetrec.features import D2_DEFAULT


@pytest.fixture
def saved(tmp_path, tiny_params):
    p = randomized(tiny_params, seed=2)
    opt = OptimizerState(7, {"v.rnn.Wx": np.full_like(p["rnn.Wx"], 0.25)})
    path = tmp_path / "m.bin"
    save_checkpoint(p, path, optimizer_state=opt, meta={"epochs_done": 3})
    return p, path


def test_roundtrip_is_bit_exact(saved, small_dataset):
    p, path = saved
    ck = read_checkpoint(path, expected_d1=D1_DEFAULT, expected_d2=D2_DEFAULT)
    q = ck.params
    assert q.config == p.config
    for k in p.tensors:
        assert q[k].tobytes() == p[k].tobytes()
    assert q.schema.mean.tobytes() == p.schema.mean.tobytes()
    assert q.output_scale.tobytes() == p.output_scale.tobytes()
    assert ck.optimizer_state.step == 7
    assert (ck.optimizer_state.slots["v.rnn.Wx"] == 0.25).all()
    assert ck.meta == {"epochs_done": 3}
    tr = small_dataset.trips[0]
    assert predict_links(tr.route, tr.vehicle, q).tobytes() == predict_links(tr.route, tr.vehicle, p).tobytes()


def test_resave_is_byte_identical(saved, tmp_path):
    _, path = saved
    save_checkpoint(read_checkpoint(path), tmp_path / "again.bin")
    assert (tmp_path / "again.bin").read_bytes() == path.read_bytes()
    assert checkpoint_version(path) == checkpoint_version(tmp_path / "again.bin")


@pytest.mark.parametrize("keep", [0, 10, 30, 200, -1])
def test_truncation_detected(saved, tmp_path, keep):
    _, path = saved
    data = path.read_bytes()
    cut = tmp_path / "cut.bin"
    cut.write_bytes(data[:keep] if keep >= 0 else data[:-1])
    with pytest.raises(CheckpointTruncatedError):
        read_checkpoint(cut)


def test_unknown_version_rejected(saved):
    _, path = saved
    data = bytearray(path.read_bytes())
    data[8:12] = struct.pack("<I", 2)
    path.write_bytes(bytes(data))
    with pytest.raises(CheckpointVersionError, match="version 2"):
        read_checkpoint(path)


def test_dimension_mismatch_names_both_sides(saved):
    _, path = saved
    with pytest.raises(CheckpointDimensionError, match="D1=20.*D1=19"):
        read_checkpoint(path, expected_d1=19)
    with pytest.raises(CheckpointDimensionError, match="D2"):
        load_checkpoint(path, expected_d2=D2_DEFAULT + 1)


def test_corrupt_body_and_magic(saved, tmp_path):
    _, path = saved
    data = bytearray(path.read_bytes())
    flipped = tmp_path / "flip.bin"
    data[-40] ^= 0xFF
    flipped.write_bytes(bytes(data))
    with pytest.raises(CheckpointCorruptError):
        read_checkpoint(flipped)
    bad = tmp_path / "magic.bin"
    bad.write_bytes(b"NOTACKPT" + path.read_bytes()[8:])
    with pytest.raises(CheckpointCorruptError):
        read_checkpoint(bad)
    assert issubclass(CheckpointCorruptError, CheckpointError)


def test_unfitted_schema_cannot_be_saved(tmp_path):
    from conftest import small_model
    with pytest.raises(CheckpointError):
        save_checkpoint(Checkpoint(small_model()), tmp_path / "x.bin")


def test_version_tracks_content(saved, tmp_path, tiny_params):
    _, path = saved
    other = tmp_path / "o.bin"
    save_checkpoint(tiny_params, other)
    assert checkpoint_version(path) != checkpoint_version(other)
    assert checkpoint_version(path).startswith("v1-")
