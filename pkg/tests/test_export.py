import json

import numpy as np
import pytest

from lno.checkpoint import save_checkpoint
from lno.errors import FormatError
from lno.export import export_frames, get_info, write_frame
from lno.format import DatasetFile, Trajectory
from lno.manifest import RunManifest, manifest_path


def _trajectory(rng):
    return Trajectory(rng.standard_normal((5, 2, 3, 4)), dx=0.5, dt=0.1, equation="burgers2d", parameter=0.05)


def test_write_frame_txt(tmp_path):
    values = np.arange(12.0).reshape(2, 2, 3)
    path = write_frame(values, tmp_path / "f.txt")
    blocks = path.read_text().split("\n\n")
    assert len(blocks) == 2
    np.testing.assert_array_equal(np.loadtxt(blocks[1].splitlines()), values[1])


def test_write_frame_bin(tmp_path):
    values = np.arange(6.0).reshape(1, 6)
    path = write_frame(values, tmp_path / "f.bin", fmt="bin")
    np.testing.assert_array_equal(np.fromfile(path, dtype='<f8'), values.ravel())
    with pytest.raises(ValueError):
        write_frame(values, tmp_path / "f.png", fmt="png")


def test_export_every(rng, tmp_path):
    calls = []
    created = export_frames(_trajectory(rng), tmp_path / "frames", fmt="bin", every=2,
                            progress_callback=lambda i, n, msg: calls.append((i, n)))
    assert [p.rsplit("/", 1)[-1] for p in created] == ["frame_0000000.bin", "frame_0000002.bin",
                                                       "frame_0000004.bin"]
    assert calls[-1] == (3, 3)
    with pytest.raises(ValueError):
        export_frames(_trajectory(rng), tmp_path, every=0)


def test_info_dataset(rng, tmp_path):
    path = DatasetFile.create(_trajectory(rng), seed=3).save(tmp_path / "d.lnod")
    info = get_info(path)
    assert info["kind"] == "dataset"
    assert info["dims"] == [3, 4] and info["trajectory_count"] == 1
    assert info["duration_seconds"] == pytest.approx(0.4)


def test_info_checkpoint(tiny_model, tmp_path):
    info = get_info(save_checkpoint(tiny_model, tmp_path / "m.lnoc"))
    assert info["kind"] == "checkpoint"
    assert info["weight_count"] == tiny_model.weight_count


def test_info_unknown(tmp_path):
    path = tmp_path / "x.dat"
    path.write_bytes(b"\x00\x01\x02\x03\x04")
    with pytest.raises(FormatError):
        get_info(path)
    with pytest.raises(FileNotFoundError):
        get_info(tmp_path / "none")


def test_manifest_paths(tmp_path):
    assert manifest_path(tmp_path) == tmp_path / "manifest.json"
    assert manifest_path(tmp_path / "run") == tmp_path / "run" / "manifest.json"
    assert manifest_path(tmp_path / "d.lnod") == tmp_path / "d.lnod.manifest.json"


def test_manifest_round_trip(tmp_path):
    manifest = RunManifest("gen-data", ["gen-data", "--seed", "3"], {"seed": 3}, seed=3,
                           outputs=[str(tmp_path / "d.lnod")])
    path = manifest.save(tmp_path / "d.lnod")
    loaded = RunManifest.load(path)
    assert loaded == manifest
    assert loaded.tool_version


def test_manifest_errors(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"subcommand": "train"}))
    with pytest.raises(FormatError, match="argv"):
        RunManifest.load(path)
    path.write_text(json.dumps({"subcommand": "train", "argv": [1], "args": {}}))
    with pytest.raises(FormatError, match="list of strings"):
        RunManifest.load(path)
    with pytest.raises(FileNotFoundError):
        RunManifest.load(tmp_path / "none.json")
