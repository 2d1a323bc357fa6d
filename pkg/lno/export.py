"""
Per-frame field export and file inspection.

Frames are written for external plotting tools; nothing is rendered here.

    txt   ASCII grid, one row (fixed first index) per line, channel blocks
          separated by a blank line
    bin   flat little-endian float64 [channel, i_0, (i_1)]
"""

import logging
from pathlib import Path
from typing import Callable, List, Optional, Union

import numpy as np

from .checkpoint import MAGIC, read_checkpoint_header
from .errors import FormatError
from .format import DatasetFile, Trajectory

logger = logging.getLogger(__name__)

EXPORT_FORMATS = ("txt", "bin")


def write_frame(values: np.ndarray, path: Union[str, Path], fmt: str = "txt") -> Path:
    """Write one (channels, *dims) frame"""
    path = Path(path)
    if fmt == "bin":
        path.write_bytes(np.ascontiguousarray(values, dtype='<f8').tobytes())
        return path
    if fmt != "txt":
        raise ValueError(f"export format must be one of {EXPORT_FORMATS}, got {fmt!r}")
    with open(path, 'w', encoding='utf-8') as f:
        for c, channel in enumerate(values):
            if c:
                f.write("\n")
            np.savetxt(f, np.atleast_2d(channel), fmt="%.10g")
    return path


def export_frames(trajectory: Trajectory, output_dir: Union[str, Path], fmt: str = "txt",
                  every: int = 1,
                  progress_callback: Optional[Callable[[int, int, str], None]] = None) -> List[str]:
    """
    Write every ``every``-th frame as ``frame_<index>.<fmt>``.

    Returns:
        Paths of the created files
    """
    if fmt not in EXPORT_FORMATS:
        raise ValueError(f"export format must be one of {EXPORT_FORMATS}, got {fmt!r}")
    if every < 1:
        raise ValueError(f"every must be >= 1, got {every}")
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    created = []
    indices = range(0, trajectory.frame_count, every)
    for n, i in enumerate(indices, start=1):
        frame_path = output_dir / f"frame_{i:07d}.{fmt}"
        write_frame(trajectory.values[i], frame_path, fmt)
        created.append(str(frame_path))
        if progress_callback:
            progress_callback(n, len(indices), "Exporting frames")
    logger.info("Exported %d frames to %s", len(created), output_dir)
    return created


def get_info(input_path: Union[str, Path]) -> dict:
    """
    Header information of a dataset or checkpoint without loading its payload.

    Returns:
        Dictionary with a "kind" entry ("dataset" or "checkpoint") and the
        header fields
    """
    input_path = Path(input_path)
    if not input_path.exists():
        raise FileNotFoundError(f"Input file not found: {input_path}")
    file_size = input_path.stat().st_size
    with open(input_path, 'rb') as f:
        head = f.read(len(MAGIC))

    if head == MAGIC:
        header = read_checkpoint_header(input_path)
        return {
            "kind": "checkpoint",
            "tool_version": header.get("tool_version"),
            "config": header["config"],
            "weight_count": header["weight_count"],
            "sections": len(header["sections"]),
            "file_size_bytes": file_size,
            "file_size_mb": file_size / (1024 * 1024),
        }
    if head[:1] == b'{':
        header = DatasetFile.read_header(input_path)
        return {
            "kind": "dataset",
            "equation": header.equation,
            "parameter": header.parameter,
            "d": header.d,
            "d_u": header.d_u,
            "dims": list(header.dims),
            "dx": header.dx,
            "dt": header.dt,
            "frame_count": header.frame_count,
            "duration_seconds": (header.frame_count - 1) * header.dt,
            "trajectory_count": header.trajectory_count,
            "seed": header.seed,
            "compression": header.compression,
            "created_at": header.created_at,
            "file_size_bytes": file_size,
            "file_size_mb": file_size / (1024 * 1024),
        }
    raise FormatError(f"Unrecognized file (neither dataset nor checkpoint): {input_path}")
