"""
Square-symmetry augmentation of training frames.

Each transform is a signed permutation matrix A acting on coordinates taken
about the grid centre. The transformed field is u'(X) = A u(A^T X) for vector
channels and u'(X) = u(A^T X) for scalar channels.
"""

import logging
from enum import Enum
from typing import Tuple

import numpy as np

from .errors import ShapeError
from .tensor import GridField

logger = logging.getLogger(__name__)


class AugmentTransform(Enum):
    """
    The eight symmetries of the square.

    Mirror lines and rotation centres pass through the grid centre, so a flip
    maps index i to n - 1 - i. On the periodic node grid x_i = -1 + i dx that
    is x -> -x - dx: the reflection about x = 0 followed by a one-cell shift.
    """
    IDENTITY = "identity"
    ROT90 = "rot90"
    ROT180 = "rot180"
    ROT270 = "rot270"
    FLIP_X = "flip_x"        # x -> -x
    FLIP_Y = "flip_y"        # y -> -y
    FLIP_DIAG = "flip_diag"  # x <-> y
    FLIP_ANTI = "flip_anti"  # x <-> -y

    @property
    def matrix(self) -> np.ndarray:
        return np.array(_MATRICES[self], dtype=np.int64)

    @property
    def swaps_axes(self) -> bool:
        return self.matrix[0, 0] == 0

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> 'AugmentTransform':
        key = tuple(tuple(int(v) for v in row) for row in np.asarray(matrix))
        for member, value in _MATRICES.items():
            if value == key:
                return member
        raise ValueError(f"{key} is not a square symmetry")

    def compose(self, other: 'AugmentTransform') -> 'AugmentTransform':
        """self after other"""
        return AugmentTransform.from_matrix(self.matrix @ other.matrix)

    def inverse(self) -> 'AugmentTransform':
        return AugmentTransform.from_matrix(self.matrix.T)


_MATRICES = {
    AugmentTransform.IDENTITY: ((1, 0), (0, 1)),
    AugmentTransform.ROT90: ((0, -1), (1, 0)),
    AugmentTransform.ROT180: ((-1, 0), (0, -1)),
    AugmentTransform.ROT270: ((0, 1), (-1, 0)),
    AugmentTransform.FLIP_X: ((-1, 0), (0, 1)),
    AugmentTransform.FLIP_Y: ((1, 0), (0, -1)),
    AugmentTransform.FLIP_DIAG: ((0, 1), (1, 0)),
    AugmentTransform.FLIP_ANTI: ((0, -1), (-1, 0)),
}

# x -> -x is the only non-trivial symmetry of a line
TRANSFORMS_1D: Tuple[AugmentTransform, ...] = (AugmentTransform.IDENTITY, AugmentTransform.FLIP_X)
TRANSFORMS_2D: Tuple[AugmentTransform, ...] = tuple(AugmentTransform)


def available_transforms(d: int) -> Tuple[AugmentTransform, ...]:
    return TRANSFORMS_1D if d == 1 else TRANSFORMS_2D


def augment(frame: GridField, t: AugmentTransform, vector: bool = True) -> GridField:
    """
    Apply a square symmetry to a frame.

    Args:
        frame: field with 1 or 2 spatial axes
        t: the transform
        vector: transform the channels as a d-component vector (velocity);
            False leaves channel values untouched (pressure, dp/dt)

    Raises:
        ShapeError: axis-swapping transform on a non-square grid, a 2-D-only
            transform on a 1-D frame, or a vector frame with channels != d
    """
    if t is AugmentTransform.IDENTITY:
        return frame
    if vector and frame.channels != frame.d:
        raise ShapeError(f"vector augmentation needs {frame.d} channels, got {frame.channels}")

    if frame.d == 1:
        if t is not AugmentTransform.FLIP_X:
            raise ShapeError(f"{t.value} needs a 2-D frame")
        values = frame.values[:, ::-1]
        if vector:
            values = -values
        return frame.like(np.ascontiguousarray(values))

    if t.swaps_axes and frame.dims[0] != frame.dims[1]:
        raise ShapeError(f"{t.value} needs a square grid, got {frame.dims}")

    a = t.matrix
    centers = [(n - 1) / 2.0 for n in frame.dims]
    offsets = np.stack(np.meshgrid(*[np.arange(n) - c for n, c in zip(frame.dims, centers)],
                                   indexing='ij'))
    source = np.einsum('ji,j...->i...', a, offsets)
    ix = np.rint(source[0] + centers[0]).astype(np.int64)
    iy = np.rint(source[1] + centers[1]).astype(np.int64)
    values = frame.values[:, ix, iy]
    if vector:
        values = np.einsum('ij,j...->i...', a.astype(np.float64), values)
    return frame.like(values)
