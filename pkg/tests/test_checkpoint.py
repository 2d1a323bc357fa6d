import json

import numpy as np
import pytest

from lno.checkpoint import MAGIC, PREFIX, load_checkpoint, read_checkpoint_header, save_checkpoint
from lno.errors import FormatError
from lno.tensor import GridField


def _rewrite_header(path, **changes):
    data = path.read_bytes()
    _, version, header_len = PREFIX.unpack_from(data)
    header = json.loads(data[PREFIX.size:PREFIX.size + header_len])
    header.update(changes)
    encoded = json.dumps(header).encode('utf-8')
    path.write_bytes(PREFIX.pack(MAGIC, version, len(encoded)) + encoded + data[PREFIX.size + header_len:])


def test_round_trip_is_bitwise(tiny_model, tmp_path, rng):
    path = save_checkpoint(tiny_model, tmp_path / "nested" / "model.lnoc")
    loaded = load_checkpoint(path)
    assert loaded.config == tiny_model.config
    for a, b in zip(tiny_model.weights(), loaded.weights()):
        assert a.name == b.name
        np.testing.assert_array_equal(a.values, b.values)
    field = GridField(rng.standard_normal((2, 14, 14)), dx=0.125)
    np.testing.assert_array_equal(tiny_model.forward(field).values, loaded.forward(field).values)


def test_header(tiny_model, tmp_path):
    path = save_checkpoint(tiny_model, tmp_path / "model.lnoc")
    header = read_checkpoint_header(path)
    assert header["weight_count"] == tiny_model.weight_count
    assert header["order"][0] == tiny_model.weights()[0].name
    assert header["sections"][-1]["offset"] + header["sections"][-1]["bytes"] == header["blob_bytes"]
    assert path.read_bytes()[:4] == MAGIC


def test_corrupt_files(tiny_model, tmp_path):
    path = save_checkpoint(tiny_model, tmp_path / "model.lnoc")
    original = path.read_bytes()

    data = bytearray(original)
    data[-1] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(FormatError, match="checksum"):
        load_checkpoint(path)

    path.write_bytes(original[:-8])
    with pytest.raises(FormatError, match="truncated"):
        load_checkpoint(path)

    path.write_bytes(b'XXXX' + original[4:])
    with pytest.raises(FormatError, match="magic"):
        load_checkpoint(path)

    path.write_bytes(original[:4] + bytes([2]) + original[5:])
    with pytest.raises(FormatError, match="version 2"):
        load_checkpoint(path)

    path.write_bytes(original[:3])
    with pytest.raises(FormatError, match="too short"):
        load_checkpoint(path)


def test_header_disagreements(tiny_model, tmp_path):
    path = save_checkpoint(tiny_model, tmp_path / "model.lnoc")
    _rewrite_header(path, weight_count=tiny_model.weight_count + 1)
    with pytest.raises(FormatError, match="weight_count"):
        load_checkpoint(path)

    path = save_checkpoint(tiny_model, tmp_path / "model2.lnoc")
    config = tiny_model.config.to_dict()
    config["M"] = 7
    _rewrite_header(path, config=config)
    with pytest.raises(FormatError, match="config"):
        load_checkpoint(path)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "missing.lnoc")
