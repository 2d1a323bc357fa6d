"""
Direct-forcing immersed boundary correction for solid walls on a 2-D grid.

The wall is a set of Lagrange points X_j with arc spacing ds and prescribed
velocity U_BC. One correction pass:

    U*_j  = sum_i u*(x_i) dh(x_i - X_j) dx^2          interpolate
    F_j   = (U_BC_j - U*_j) / dt                       wall force
    f(x)  = sum_j F_j dh(x - X_j) dx ds                spread
    u     = u* + f dt

with dh(r) = w(r_x / dx) w(r_y / dx) / dx^2 and w the 4-point kernel.
"""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import FormatError, ShapeError
from .tensor import GridField

logger = logging.getLogger(__name__)

SUPPORT = 4


def ibm_delta(r):
    """4-point kernel w(r), r in grid units; zero for |r| >= 2"""
    r = np.abs(np.asarray(r, dtype=np.float64))
    inner = (3.0 - 2.0 * r + np.sqrt(np.clip(1.0 + 4.0 * r - 4.0 * r ** 2, 0.0, None))) / 8.0
    outer = (5.0 - 2.0 * r - np.sqrt(np.clip(-7.0 + 12.0 * r - 4.0 * r ** 2, 0.0, None))) / 8.0
    w = np.where(r < 1.0, inner, np.where(r < 2.0, outer, 0.0))
    return w if w.ndim else float(w)


def delta_h(offset: Sequence[float], dx: float) -> float:
    """Regularized delta: product of w over axes divided by dx^d"""
    offset = np.asarray(offset, dtype=np.float64)
    return float(np.prod(ibm_delta(offset / dx)) / dx ** offset.size)


@dataclass
class IbmGeometry:
    """
    Lagrange points describing a wall.

    Args:
        points: positions, shape (n, 2), length units
        ds: arc spacing between consecutive points
        u_bc: prescribed velocity per point, shape (n, channels); zeros for no-slip
    """
    points: np.ndarray
    ds: float
    u_bc: np.ndarray

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        self.u_bc = np.atleast_2d(np.asarray(self.u_bc, dtype=np.float64))
        if self.points.shape[1] != 2:
            raise ShapeError(f"Lagrange points must be 2-D, got shape {self.points.shape}")
        if self.u_bc.shape[0] != self.points.shape[0]:
            raise ShapeError(f"{self.points.shape[0]} points but {self.u_bc.shape[0]} wall velocities")
        if not self.ds > 0:
            raise ValueError(f"ds must be positive, got {self.ds}")

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @classmethod
    def no_slip(cls, points: np.ndarray, ds: Optional[float] = None, channels: int = 2) -> 'IbmGeometry':
        points = np.asarray(points, dtype=np.float64)
        if ds is None:
            ds = mean_spacing(points)
        return cls(points=points, ds=ds, u_bc=np.zeros((len(points), channels)))

    @classmethod
    def from_csv(cls, path: Union[str, Path], ds: Optional[float] = None) -> 'IbmGeometry':
        """
        Load (x, y, u_bc, v_bc) rows; a non-numeric first row is a header.
        ``ds`` defaults to the mean distance between consecutive points.
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Geometry file not found: {path}")
        rows = []
        with open(path, newline='', encoding='utf-8') as f:
            for line_no, row in enumerate(csv.reader(f), start=1):
                if not row or row[0].strip().startswith('#'):
                    continue
                try:
                    values = [float(v) for v in row]
                except ValueError:
                    if not rows and line_no == 1:
                        continue
                    raise FormatError(f"Invalid geometry file: non-numeric row {line_no} in {path}")
                if len(values) != 4:
                    raise FormatError(f"Invalid geometry file: row {line_no} has {len(values)} "
                                      f"columns, expected x,y,u_bc,v_bc")
                rows.append(values)
        if len(rows) < 2:
            raise FormatError(f"Invalid geometry file: {path} needs at least 2 points")
        data = np.array(rows)
        if ds is None:
            ds = mean_spacing(data[:, :2])
        return cls(points=data[:, :2], ds=ds, u_bc=data[:, 2:])

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(["x", "y", "u_bc", "v_bc"])
            for (x, y), (u, v) in zip(self.points, self.u_bc[:, :2]):
                writer.writerow([repr(float(x)), repr(float(y)), repr(float(u)), repr(float(v))])


def mean_spacing(points: np.ndarray) -> float:
    steps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return float(np.mean(steps))


def naca0012(chord: float = 1.0, center: Tuple[float, float] = (0.0, 0.0),
             stagger_deg: float = 0.0, ds: float = 1.0 / 64, channels: int = 2) -> IbmGeometry:
    """
    No-slip Lagrange points on a NACA 0012 section.

    The chord midpoint sits at ``center``; the section is rotated clockwise by
    ``stagger_deg`` so a positive stagger points the trailing edge downward.
    Points are spaced ``ds`` apart along the closed outline.
    """
    beta = np.linspace(0.0, np.pi, 400)
    xc = 0.5 * (1.0 - np.cos(beta))
    thickness = 0.6 * (0.2969 * np.sqrt(xc) - 0.1260 * xc - 0.3516 * xc ** 2
                       + 0.2843 * xc ** 3 - 0.1015 * xc ** 4)
    upper = np.stack([xc[::-1], thickness[::-1]], axis=1)
    lower = np.stack([xc[1:], -thickness[1:]], axis=1)
    outline = np.concatenate([upper, lower]) * chord

    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(outline, axis=0), axis=1))])
    count = max(int(round(arc[-1] / ds)), 8)
    targets = np.linspace(0.0, arc[-1], count, endpoint=False)
    sampled = np.stack([np.interp(targets, arc, outline[:, 0]), np.interp(targets, arc, outline[:, 1])], axis=1)

    sampled[:, 0] -= 0.5 * chord
    angle = -math.radians(stagger_deg)
    rotation = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    sampled = sampled @ rotation.T + np.asarray(center, dtype=np.float64)
    logger.debug("NACA0012: %d Lagrange points, ds=%.4g", count, arc[-1] / count)
    return IbmGeometry(points=sampled, ds=float(arc[-1] / count), u_bc=np.zeros((count, channels)))


def _stencil(field: GridField, geom: IbmGeometry):
    """Per point and axis: 4 grid indices and their kernel weights"""
    if field.d != 2:
        raise ShapeError(f"immersed boundary correction needs a 2-D field, got {field.d}-D")
    if geom.u_bc.shape[1] != field.channels:
        raise ShapeError(f"wall velocity has {geom.u_bc.shape[1]} components, field has {field.channels}")
    indices, weights = [], []
    for axis in range(2):
        position = (geom.points[:, axis] - field.origin[axis]) / field.dx
        base = np.floor(position).astype(int) - 1
        index = base[:, None] + np.arange(SUPPORT)[None, :]
        if index.min() < 0 or index.max() > field.dims[axis] - 1:
            bad = int(np.argmax((index.min(axis=1) < 0) | (index.max(axis=1) > field.dims[axis] - 1)))
            raise ShapeError(
                f"Lagrange point {bad} at {tuple(geom.points[bad])} has kernel support outside the "
                f"grid on axis {axis}", axis=axis)
        indices.append(index)
        weights.append(ibm_delta(position[:, None] - index))
    return indices, weights


def interpolate(field: GridField, geom: IbmGeometry) -> np.ndarray:
    """Field velocity at every Lagrange point, shape (n, channels)"""
    (ix, iy), (wx, wy) = _stencil(field, geom)
    local = field.values[:, ix[:, :, None], iy[:, None, :]]
    return np.einsum('cnab,na,nb->nc', local, wx, wy)


def ibm_correct(u_star: GridField, geom: IbmGeometry, dt: float) -> GridField:
    """
    One direct-forcing pass.

    Args:
        u_star: predicted velocity on the grid
        geom: Lagrange points with wall velocity
        dt: time step (cancels between force and update)

    Returns:
        Corrected field; only points inside some 4x4 support change
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    (ix, iy), (wx, wy) = _stencil(u_star, geom)
    local = u_star.values[:, ix[:, :, None], iy[:, None, :]]
    wall = np.einsum('cnab,na,nb->nc', local, wx, wy)
    force = (geom.u_bc - wall) / dt

    dx = u_star.dx
    spread = np.einsum('nc,na,nb->cnab', force, wx, wy) / dx ** 2 * dx * geom.ds
    forcing = np.zeros_like(u_star.values)
    rows = np.broadcast_to(ix[:, :, None], spread.shape[1:])
    cols = np.broadcast_to(iy[:, None, :], spread.shape[1:])
    for c in range(u_star.channels):
        np.add.at(forcing[c], (rows, cols), spread[c])
    return u_star.like(u_star.values + forcing * dt)
