"""
Checkpoint file format.

Layout:
    - MAGIC (4 bytes): "LNOC"
    - VERSION (1 byte): format version
    - HEADER_LEN (4 bytes, little-endian): length of the JSON header
    - HEADER: UTF-8 JSON with config, section offsets, ordering manifest, CRC32
    - BLOB: little-endian float64 weights in canonical order
            (lifting, per block conv1/conv2/mix, proj1, proj2)
"""

import json
import logging
import struct
import zlib
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ConfigError, FormatError
from .model import LnoConfig, LnoModel, assemble, count_weights, weight_shapes

logger = logging.getLogger(__name__)

MAGIC = b'LNOC'
FORMAT_VERSION = 1
PREFIX = struct.Struct('<4sBI')
WEIGHT_DTYPE = np.dtype('<f8')


def _build_header(model: LnoModel, blob: bytes) -> dict:
    from . import __version__

    sections = []
    offset = 0
    for tensor in model.weights():
        nbytes = tensor.size * WEIGHT_DTYPE.itemsize
        sections.append({
            "name": tensor.name,
            "shape": list(tensor.shape),
            "offset": offset,
            "bytes": nbytes,
        })
        offset += nbytes
    return {
        "format_version": FORMAT_VERSION,
        "tool_version": __version__,
        "config": model.config.to_dict(),
        "weight_count": model.weight_count,
        "order": [s["name"] for s in sections],
        "sections": sections,
        "blob_bytes": len(blob),
        "crc32": zlib.crc32(blob) & 0xFFFFFFFF,
    }


def save_checkpoint(model: LnoModel, path: Union[str, Path]) -> Path:
    """
    Write a model to disk.

    Args:
        model: model to save
        path: destination file

    Returns:
        Path of the written file
    """
    path = Path(path)
    blob = b''.join(t.values.astype(WEIGHT_DTYPE).tobytes() for t in model.weights())
    header = json.dumps(_build_header(model, blob), separators=(',', ':')).encode('utf-8')
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(PREFIX.pack(MAGIC, FORMAT_VERSION, len(header)))
        f.write(header)
        f.write(blob)
    logger.info("Saved checkpoint %s (%d weights)", path, model.weight_count)
    return path


def _read(path: Path):
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    data = path.read_bytes()
    if len(data) < PREFIX.size:
        raise FormatError(f"Invalid checkpoint file: {path} is too short")
    magic, version, header_len = PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"Invalid checkpoint file: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"Invalid checkpoint file: version {version}, expected {FORMAT_VERSION}")
    start = PREFIX.size
    try:
        header = json.loads(data[start:start + header_len].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"Invalid checkpoint file: unreadable header ({e})") from e
    if header.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"Invalid checkpoint file: header format_version "
                          f"{header.get('format_version')!r}, expected {FORMAT_VERSION}")
    return header, data[start + header_len:]


def read_checkpoint_header(path: Union[str, Path]) -> dict:
    """Header only, for inspection"""
    header, _ = _read(Path(path))
    return header


def load_checkpoint(path: Union[str, Path]) -> LnoModel:
    """
    Load a model saved by :func:`save_checkpoint`.

    Raises:
        FormatError: version mismatch, truncated blob, CRC mismatch, or a
            config that disagrees with the stored weights
    """
    path = Path(path)
    header, blob = _read(path)
    for key in ("config", "weight_count", "sections", "blob_bytes", "crc32"):
        if key not in header:
            raise FormatError(f"Invalid checkpoint file: header is missing '{key}'")
    try:
        config = LnoConfig.from_dict(header["config"])
    except (ConfigError, TypeError) as e:
        raise FormatError(f"Invalid checkpoint file: config rejected ({e})") from e

    expected = count_weights(config)
    if header["weight_count"] != expected:
        raise FormatError(f"Invalid checkpoint file: weight_count {header['weight_count']} "
                          f"disagrees with config ({expected})")
    if len(blob) < header["blob_bytes"] or header["blob_bytes"] != expected * WEIGHT_DTYPE.itemsize:
        raise FormatError(f"Invalid checkpoint file: truncated weight blob "
                          f"({len(blob)} of {expected * WEIGHT_DTYPE.itemsize} bytes)")
    blob = blob[:header["blob_bytes"]]
    if zlib.crc32(blob) & 0xFFFFFFFF != header["crc32"]:
        raise FormatError("Invalid checkpoint file: weight checksum mismatch")

    shapes = weight_shapes(config)
    sections = header["sections"]
    if [s.get("name") for s in sections] != [name for name, _ in shapes]:
        raise FormatError("Invalid checkpoint file: section order does not match the config")
    arrays = []
    for (name, shape), section in zip(shapes, sections):
        if tuple(section["shape"]) != shape:
            raise FormatError(f"Invalid checkpoint file: section '{name}' has shape "
                              f"{section['shape']}, config implies {list(shape)}")
        count = int(np.prod(shape))
        values = np.frombuffer(blob, dtype=WEIGHT_DTYPE, count=count, offset=section["offset"])
        arrays.append(values.reshape(shape).astype(np.float64))
    model = assemble(config, arrays)
    logger.info("Loaded checkpoint %s: %r", path, model)
    return model
