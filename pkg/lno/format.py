"""
Trajectory dataset file format and data structures

Format:
    Line 1: Header JSON (one line) - format version, equation, parameter,
            d, d_u, dims, dx, dt, frame count, seed, trajectory count,
            compression
    Rest:   Frames, trajectory after trajectory, each frame in time order as
            little-endian float32 values [channel, i_0, (i_1)]

Compression:
    - "none": frames are contiguous raw float32
    - "zlib": each frame is a 4-byte little-endian length followed by the
      zlib-compressed float32 bytes
"""

import json
import logging
import struct
import zlib
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import FormatError, ShapeError
from .tensor import GridField

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
FRAME_DTYPE = np.dtype('<f4')
COMPRESSIONS = ("none", "zlib")
LENGTH_PREFIX = struct.Struct('<I')


@dataclass(eq=False)
class Trajectory:
    """
    Time-ordered frames on one grid.

    Args:
        values: array of shape (frames, channels, *dims)
        dx: grid spacing
        dt: time between frames
        equation: tag such as "burgers", "wave", "ns", "lno"
        parameter: viscosity or wave speed
        origin: coordinate of grid index 0 per axis
    """
    values: np.ndarray
    dx: float
    dt: float
    equation: str = "unknown"
    parameter: float = 0.0
    origin: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim not in (3, 4):
            raise ShapeError(f"Trajectory values must be (frames, channels, *dims), got {self.values.shape}")
        if self.values.shape[0] < 1:
            raise ShapeError("Trajectory needs at least one frame")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.dx > 0:
            raise ValueError(f"dx must be positive, got {self.dx}")
        if self.origin is None:
            self.origin = (0.0,) * self.d
        self.origin = tuple(float(o) for o in self.origin)

    @classmethod
    def from_frames(cls, frames: Sequence[GridField], dt: float, equation: str = "unknown",
                    parameter: float = 0.0) -> 'Trajectory':
        if not frames:
            raise ShapeError("Trajectory needs at least one frame")
        shape = frames[0].values.shape
        for i, frame in enumerate(frames):
            if frame.values.shape != shape:
                raise ShapeError(f"frame {i} has shape {frame.values.shape}, expected {shape}")
        return cls(np.stack([f.values for f in frames]), dx=frames[0].dx, dt=dt,
                   equation=equation, parameter=parameter, origin=frames[0].origin)

    @property
    def frame_count(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(self.values.shape[2:])

    @property
    def d(self) -> int:
        return self.values.ndim - 2

    @property
    def duration(self) -> float:
        return (self.frame_count - 1) * self.dt

    def frame(self, index: int) -> GridField:
        if index < 0 or index >= self.frame_count:
            raise IndexError(f"Frame index {index} out of range (max: {self.frame_count - 1})")
        return GridField(self.values[index].copy(), dx=self.dx, origin=self.origin)

    def frame_index(self, time: float) -> int:
        """Index of the frame at ``time``; the time must be a multiple of dt"""
        index = int(round(time / self.dt))
        if abs(index * self.dt - time) > 1e-9 * max(1.0, abs(time)):
            raise ValueError(f"time {time} is not a multiple of dt={self.dt}")
        if index >= self.frame_count:
            raise IndexError(f"time {time} is beyond the trajectory ({self.duration:g})")
        return index

    def __len__(self) -> int:
        return self.frame_count

    def __iter__(self) -> Iterator[GridField]:
        for i in range(self.frame_count):
            yield self.frame(i)

    def __repr__(self) -> str:
        return (f"Trajectory(equation='{self.equation}', frames={self.frame_count}, "
                f"channels={self.channels}, dims={self.dims}, dt={self.dt:g})")


_REQUIRED = {
    "format_version": int, "equation": str, "parameter": (int, float), "d": int, "d_u": int,
    "dims": list, "dx": (int, float), "dt": (int, float), "frame_count": int,
    "trajectory_count": int, "compression": str,
}


@dataclass
class DatasetHeader:
    """First line of a dataset file"""
    equation: str
    parameter: float
    d: int
    d_u: int
    dims: Tuple[int, ...]
    dx: float
    dt: float
    frame_count: int
    seed: Optional[int] = None
    trajectory_count: int = 0
    compression: str = "none"
    origin: Optional[Tuple[float, ...]] = None
    created_at: str = field(default_factory=lambda: datetime.now().strftime("%Y-%m-%dT%H:%M:%SZ"))
    format_version: int = FORMAT_VERSION

    def to_json_line(self) -> str:
        data = {
            "format_version": self.format_version,
            "equation": self.equation,
            "parameter": self.parameter,
            "d": self.d,
            "d_u": self.d_u,
            "dims": list(self.dims),
            "dx": self.dx,
            "dt": self.dt,
            "frame_count": self.frame_count,
            "seed": self.seed,
            "trajectory_count": self.trajectory_count,
            "compression": self.compression,
            "origin": list(self.origin) if self.origin is not None else None,
            "created_at": self.created_at,
        }
        return json.dumps(data, separators=(',', ':'))

    @classmethod
    def from_json_line(cls, line: Union[str, bytes]) -> 'DatasetHeader':
        try:
            data = json.loads(line)
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise FormatError(f"Invalid dataset file: unreadable header ({e})") from e
        if not isinstance(data, dict):
            raise FormatError("Invalid dataset file: header is not a JSON object")
        for key, kind in _REQUIRED.items():
            if key not in data:
                raise FormatError(f"Invalid dataset file: header is missing '{key}'")
            if not isinstance(data[key], kind) or isinstance(data[key], bool):
                raise FormatError(f"Invalid dataset file: header field '{key}' has bad value {data[key]!r}")
        if data["format_version"] != FORMAT_VERSION:
            raise FormatError(f"Invalid dataset file: format_version {data['format_version']}, "
                              f"expected {FORMAT_VERSION}")
        if data["compression"] not in COMPRESSIONS:
            raise FormatError(f"Invalid dataset file: header field 'compression' is {data['compression']!r}")
        if data["d"] not in (1, 2) or len(data["dims"]) != data["d"]:
            raise FormatError(f"Invalid dataset file: header fields 'd'/'dims' disagree "
                              f"({data['d']}, {data['dims']})")
        if any(not isinstance(n, int) or n < 1 for n in data["dims"]):
            raise FormatError(f"Invalid dataset file: header field 'dims' is {data['dims']}")
        for key in ("d_u", "frame_count"):
            if data[key] < 1:
                raise FormatError(f"Invalid dataset file: header field '{key}' must be >= 1")
        for key in ("dx", "dt"):
            if not data[key] > 0:
                raise FormatError(f"Invalid dataset file: header field '{key}' must be positive")
        origin = data.get("origin")
        return cls(
            equation=data["equation"],
            parameter=float(data["parameter"]),
            d=data["d"],
            d_u=data["d_u"],
            dims=tuple(data["dims"]),
            dx=float(data["dx"]),
            dt=float(data["dt"]),
            frame_count=data["frame_count"],
            seed=data.get("seed"),
            trajectory_count=data["trajectory_count"],
            compression=data["compression"],
            origin=tuple(origin) if origin is not None else None,
            created_at=data.get("created_at", ""),
        )

    @property
    def frame_values(self) -> int:
        return self.d_u * int(np.prod(self.dims))


class DatasetFile:
    """
    A set of trajectories sharing one grid, equation and frame count.

    Usage for creating:
        dataset = DatasetFile.create(first_trajectory, seed=7)
        dataset.add_trajectory(other)
        dataset.save("burgers.lnod")

    Usage for reading:
        dataset = DatasetFile.load("burgers.lnod")
        for trajectory in dataset.trajectories:
            ...
    """

    def __init__(self, header: DatasetHeader, trajectories: Optional[List[Trajectory]] = None):
        self.header = header
        self.trajectories: List[Trajectory] = []
        for trajectory in trajectories or []:
            self.add_trajectory(trajectory)

    @classmethod
    def create(cls, template: Trajectory, seed: Optional[int] = None,
               compression: str = "none") -> 'DatasetFile':
        """New dataset whose header is taken from ``template`` (which is added)"""
        if compression not in COMPRESSIONS:
            raise ValueError(f"compression must be one of {COMPRESSIONS}, got {compression!r}")
        header = DatasetHeader(
            equation=template.equation,
            parameter=template.parameter,
            d=template.d,
            d_u=template.channels,
            dims=template.dims,
            dx=template.dx,
            dt=template.dt,
            frame_count=template.frame_count,
            seed=seed,
            compression=compression,
            origin=template.origin,
        )
        return cls(header, [template])

    def add_trajectory(self, trajectory: Trajectory) -> None:
        h = self.header
        expected = (h.frame_count, h.d_u) + tuple(h.dims)
        if trajectory.values.shape != expected:
            raise ShapeError(f"trajectory shape {trajectory.values.shape} does not match dataset {expected}")
        if not np.isclose(trajectory.dt, h.dt) or not np.isclose(trajectory.dx, h.dx):
            raise ShapeError(f"trajectory dt/dx ({trajectory.dt}, {trajectory.dx}) "
                             f"differ from dataset ({h.dt}, {h.dx})")
        self.trajectories.append(trajectory)
        h.trajectory_count = len(self.trajectories)

    def get_trajectory(self, index: int) -> Trajectory:
        if index < 0 or index >= len(self.trajectories):
            raise IndexError(f"Trajectory index {index} out of range (count: {len(self.trajectories)})")
        return self.trajectories[index]

    def save(self, filepath: Union[str, Path]) -> Path:
        path = Path(filepath)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'wb') as f:
            f.write(self.header.to_json_line().encode('utf-8') + b'\n')
            for trajectory in self.trajectories:
                for frame in trajectory.values:
                    raw = frame.astype(FRAME_DTYPE).tobytes()
                    if self.header.compression == "zlib":
                        packed = zlib.compress(raw, level=6)
                        f.write(LENGTH_PREFIX.pack(len(packed)))
                        f.write(packed)
                    else:
                        f.write(raw)
        logger.info("Saved dataset %s (%d trajectories)", path, len(self.trajectories))
        return path

    @staticmethod
    def read_header(filepath: Union[str, Path]) -> DatasetHeader:
        path = Path(filepath)
        if not path.exists():
            raise FileNotFoundError(f"Dataset not found: {path}")
        with open(path, 'rb') as f:
            return DatasetHeader.from_json_line(f.readline())

    @classmethod
    def load(cls, filepath: Union[str, Path]) -> 'DatasetFile':
        path = Path(filepath)
        if not path.exists():
            raise FileNotFoundError(f"Dataset not found: {path}")
        with open(path, 'rb') as f:
            header = DatasetHeader.from_json_line(f.readline())
            body = f.read()

        frame_bytes = header.frame_values * FRAME_DTYPE.itemsize
        total_frames = header.frame_count * header.trajectory_count
        frames = []
        if header.compression == "none":
            if len(body) != total_frames * frame_bytes:
                raise FormatError(f"Invalid dataset file: expected {total_frames * frame_bytes} bytes "
                                  f"of frames, found {len(body)}")
            data = np.frombuffer(body, dtype=FRAME_DTYPE)
            frames = data.reshape((total_frames, header.frame_values))
        else:
            offset = 0
            for i in range(total_frames):
                if offset + LENGTH_PREFIX.size > len(body):
                    raise FormatError(f"Invalid dataset file: truncated at frame {i}")
                (size,) = LENGTH_PREFIX.unpack_from(body, offset)
                offset += LENGTH_PREFIX.size
                try:
                    raw = zlib.decompress(body[offset:offset + size])
                except zlib.error as e:
                    raise FormatError(f"Invalid dataset file: frame {i} does not decompress ({e})") from e
                if len(raw) != frame_bytes:
                    raise FormatError(f"Invalid dataset file: frame {i} has {len(raw)} bytes, "
                                      f"expected {frame_bytes}")
                frames.append(np.frombuffer(raw, dtype=FRAME_DTYPE))
                offset += size
            frames = np.stack(frames) if frames else np.empty((0, header.frame_values), FRAME_DTYPE)

        shape = (header.trajectory_count, header.frame_count, header.d_u) + tuple(header.dims)
        stacked = np.asarray(frames, dtype=np.float64).reshape(shape)
        dataset = cls(header)
        for values in stacked:
            dataset.add_trajectory(Trajectory(values, dx=header.dx, dt=header.dt, equation=header.equation,
                                              parameter=header.parameter, origin=header.origin))
        return dataset

    @property
    def trajectory_count(self) -> int:
        return len(self.trajectories)

    def __repr__(self) -> str:
        h = self.header
        return (f"DatasetFile(equation='{h.equation}', parameter={h.parameter:g}, "
                f"{self.trajectory_count} trajectories x {h.frame_count} frames, dims={h.dims})")
