"""
Grid tensors, convolution primitives and a reverse-mode tape.

Every layer of the operator reduces to the handful of primitives in this
module: valid (unpadded) strided cross-correlation, its fractionally strided
transpose, per-channel mode mixing, GELU, crops and sums. Each primitive can
record itself on a :class:`Tape`; :func:`backward` replays the recorded
adjoints in reverse order.

Array layout:
    GridField.values      [channel, i_0, (i_1)]
    conv kernel           [out_per_group, in_per_group, taps...]
    deconv kernel         [in_per_group, out_per_group, taps...]
    mix weight            [channel, mode_in, mode_out]

All arithmetic is float64.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ShapeError, NumericalError

logger = logging.getLogger(__name__)

GELU_COEFF = float(np.sqrt(2.0 / np.pi))
GELU_CUBIC = 0.044715


@dataclass(eq=False)
class GridField:
    """
    Equidistant-grid sample of a multi-channel function.

    Args:
        values: array of shape (channels, *dims), d = len(dims) in {1, 2}
        dx: grid spacing in length units
        origin: coordinate of grid index 0 per axis (defaults to zeros)
        requires_grad: collect the input adjoint in ``grad`` on backward
    """
    values: np.ndarray
    dx: float = 1.0
    origin: Optional[Tuple[float, ...]] = None
    requires_grad: bool = False
    grad: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim not in (2, 3):
            raise ShapeError(
                f"GridField values must have shape (channels, *dims) with 1 or 2 "
                f"spatial axes, got shape {self.values.shape}"
            )
        if min(self.values.shape) < 1:
            raise ShapeError(f"GridField has an empty axis: shape {self.values.shape}")
        if not self.dx > 0:
            raise ValueError(f"dx must be positive, got {self.dx}")
        if self.origin is None:
            self.origin = (0.0,) * self.d
        else:
            self.origin = tuple(float(o) for o in self.origin)
            if len(self.origin) != self.d:
                raise ShapeError(f"origin has {len(self.origin)} entries for a {self.d}-D field")

    @classmethod
    def zeros(cls, channels: int, dims: Sequence[int], dx: float = 1.0,
              origin: Optional[Tuple[float, ...]] = None) -> 'GridField':
        return cls(np.zeros((channels,) + tuple(dims)), dx=dx, origin=origin)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(self.values.shape[1:])

    @property
    def d(self) -> int:
        return self.values.ndim - 1

    def like(self, values: np.ndarray, origin: Optional[Tuple[float, ...]] = None) -> 'GridField':
        """New field on the same grid spacing (and origin unless given)"""
        return GridField(values, dx=self.dx, origin=self.origin if origin is None else origin)

    def coordinates(self, axis: int) -> np.ndarray:
        """Node coordinates along one axis"""
        return self.origin[axis] + self.dx * np.arange(self.dims[axis])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __repr__(self) -> str:
        return f"GridField(channels={self.channels}, dims={self.dims}, dx={self.dx:g})"


@dataclass(eq=False)
class WeightTensor:
    """Learnable (or frozen) array with a gradient accumulator"""
    values: np.ndarray
    requires_grad: bool = True
    name: str = ""
    grad: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.requires_grad and self.grad is None:
            self.grad = np.zeros_like(self.values)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return int(self.values.size)

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.values)

    def __repr__(self) -> str:
        return f"WeightTensor(name='{self.name}', shape={self.shape})"


@dataclass(eq=False)
class Scalar:
    """A recorded scalar, typically a loss"""
    value: float

    def __float__(self) -> float:
        return float(self.value)


TapeValue = Union[GridField, WeightTensor, Scalar]


@dataclass(eq=False)
class TapeNode:
    op: str
    inputs: Tuple[TapeValue, ...]
    output: TapeValue
    adjoint: Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tape:
    """
    Records operations in execution order for reverse-mode differentiation.

    One tape per forward pass; a tape is consumed by :func:`backward`.
    """

    def __init__(self):
        self.nodes: List[TapeNode] = []
        self.consumed = False

    def record(self, op: str, inputs: Tuple[TapeValue, ...], output: TapeValue,
               adjoint: Callable) -> None:
        if self.consumed:
            raise RuntimeError("Cannot record on a consumed tape")
        self.nodes.append(TapeNode(op, inputs, output, adjoint))

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return f"Tape({len(self.nodes)} nodes, consumed={self.consumed})"


def backward(tape: Tape, loss: Scalar, seed: float = 1.0) -> None:
    """
    Replay adjoints in reverse order.

    Gradients are accumulated into ``WeightTensor.grad`` for every weight with
    ``requires_grad`` and into ``GridField.grad`` for leaf fields that asked for
    it. The tape is consumed.
    """
    if tape.consumed:
        raise RuntimeError("backward called on a consumed tape")
    if not tape.nodes:
        raise RuntimeError("backward called on an empty tape")

    adjoints = {id(loss): np.asarray(seed, dtype=np.float64)}
    leaves = {}
    for node in reversed(tape.nodes):
        grad_out = adjoints.pop(id(node.output), None)
        if grad_out is None:
            continue
        for value, grad in zip(node.inputs, node.adjoint(grad_out)):
            if grad is None:
                continue
            if isinstance(value, WeightTensor):
                if value.requires_grad:
                    value.grad = value.grad + grad
                continue
            key = id(value)
            adjoints[key] = adjoints[key] + grad if key in adjoints else grad
            if isinstance(value, GridField) and value.requires_grad:
                leaves[key] = value

    for key, leaf in leaves.items():
        grad = adjoints.get(key)
        if grad is not None:
            leaf.grad = grad if leaf.grad is None else leaf.grad + grad

    tape.nodes.clear()
    tape.consumed = True


# --------------------------------------------------------------------------
# Shape helpers
# --------------------------------------------------------------------------

def _window_slices(offset: Tuple[int, ...], count: Tuple[int, ...], stride: int):
    return tuple(slice(o, o + stride * (n - 1) + 1, stride) for o, n in zip(offset, count))


def _weight_contract(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Sum a[g, p, *x] * b[g, q, *x] over the group and every spatial axis, giving (p, q)"""
    axes = [0] + list(range(2, a.ndim))
    return np.tensordot(a, b, axes=(axes, axes))


def _check_spatial(field_: GridField, taps: Tuple[int, ...], what: str) -> None:
    if len(taps) != field_.d:
        raise ShapeError(f"{what}: kernel has {len(taps)} spatial axes, field has {field_.d}")


# --------------------------------------------------------------------------
# Primitives
# --------------------------------------------------------------------------

def conv_forward(input: GridField, kernel: WeightTensor, stride: int = 1,
                 groups: int = 1, tape: Optional[Tape] = None) -> GridField:
    """
    Valid (no padding) strided cross-correlation.

    With ``groups > 1`` the input channels are split into equal groups and the
    same kernel is applied to each group (used for the window transform, where
    one kernel acts on every channel independently).

    Args:
        input: field with groups * in_per_group channels
        kernel: weights of shape (out_per_group, in_per_group, *taps)
        stride: window step in grid points
        groups: number of independent channel groups sharing the kernel
        tape: optional tape to record on

    Returns:
        Field with groups * out_per_group channels and
        (dim - taps) / stride + 1 points per axis
    """
    if stride < 1:
        raise ShapeError(f"stride must be positive, got {stride}")
    w = kernel.values
    out_g, in_g = w.shape[:2]
    taps = tuple(w.shape[2:])
    _check_spatial(input, taps, "conv_forward")
    if input.channels != groups * in_g:
        raise ShapeError(
            f"conv_forward: kernel expects {groups * in_g} input channels, field has {input.channels}"
        )
    out_dims = []
    for axis, (n, t) in enumerate(zip(input.dims, taps)):
        if t > n:
            raise ShapeError(f"conv_forward: kernel extent {t} exceeds field size {n} on axis {axis}",
                             axis=axis, suggested=t)
        if (n - t) % stride:
            suggested = n + (-(n - t)) % stride
            raise ShapeError(
                f"conv_forward: (size {n} - kernel {t}) is not divisible by stride {stride} on axis {axis}",
                axis=axis, suggested=suggested)
        out_dims.append((n - t) // stride + 1)
    out_dims = tuple(out_dims)

    x = input.values.reshape((groups, in_g) + input.dims)
    y = np.zeros((groups, out_g) + out_dims)
    lead = (slice(None), slice(None))
    for offset in np.ndindex(*taps):
        xs = x[lead + _window_slices(offset, out_dims, stride)]
        y += np.einsum('oi,gi...->go...', w[lead + offset], xs)

    out_origin = input.origin
    if stride == 1:
        out_origin = tuple(o + input.dx * (t // 2) for o, t in zip(input.origin, taps))
    output = GridField(y.reshape((groups * out_g,) + out_dims), dx=input.dx, origin=out_origin)

    if tape is not None:
        def adjoint(grad_out):
            gy = grad_out.reshape(y.shape)
            gx = np.zeros_like(x)
            gw = np.zeros_like(w) if kernel.requires_grad else None
            for offset in np.ndindex(*taps):
                sl = lead + _window_slices(offset, out_dims, stride)
                gx[sl] += np.einsum('oi,go...->gi...', w[lead + offset], gy)
                if gw is not None:
                    gw[lead + offset] += _weight_contract(gy, x[sl])
            return gx.reshape(input.values.shape), gw

        tape.record("conv", (input, kernel), output, adjoint)
    return output


def deconv_forward(input: GridField, kernel: WeightTensor, stride: int, overlap: int,
                   groups: int = 1, crop_interior: bool = True,
                   tape: Optional[Tape] = None) -> GridField:
    """
    Fractionally strided transpose convolution with overlap normalization.

    Each input point scatters ``kernel`` into a window of N = stride * overlap
    points; overlapping windows are summed and the sum is scaled by
    1 / overlap^d. With ``crop_interior`` only points covered by overlap^d
    windows are returned, which drops (overlap - 1) * stride points per side.

    Args:
        input: coefficient field with groups * in_per_group channels, one point per window
        kernel: weights of shape (in_per_group, out_per_group, *taps), taps == N
        stride: window step
        overlap: windows covering each interior point per axis (K)
        groups: channel groups sharing the kernel
        crop_interior: keep only the fully covered interior
        tape: optional tape to record on
    """
    w = kernel.values
    in_g, out_g = w.shape[:2]
    taps = tuple(w.shape[2:])
    _check_spatial(input, taps, "deconv_forward")
    if overlap < 1 or stride < 1:
        raise ShapeError(f"deconv_forward: stride {stride} and overlap {overlap} must be positive")
    for axis, t in enumerate(taps):
        if t != stride * overlap:
            raise ShapeError(
                f"deconv_forward: kernel extent {t} on axis {axis} must equal stride * overlap "
                f"= {stride * overlap}", axis=axis)
    if input.channels != groups * in_g:
        raise ShapeError(
            f"deconv_forward: kernel expects {groups * in_g} input channels, field has {input.channels}"
        )
    d = input.d
    windows = input.dims
    full_dims = tuple((n - 1) * stride + t for n, t in zip(windows, taps))
    cut = (overlap - 1) * stride if crop_interior else 0
    for axis, n in enumerate(windows):
        if full_dims[axis] - 2 * cut < 1:
            raise ShapeError(
                f"deconv_forward: {n} windows on axis {axis} leave no fully covered interior "
                f"(need at least {overlap})", axis=axis, suggested=overlap)
    scale = 1.0 / overlap ** d

    x = input.values.reshape((groups, in_g) + windows)
    y = np.zeros((groups, out_g) + full_dims)
    lead = (slice(None), slice(None))
    for offset in np.ndindex(*taps):
        y[lead + _window_slices(offset, windows, stride)] += np.einsum('io,gi...->go...', w[lead + offset], x)
    y *= scale
    interior = lead + tuple(slice(cut, n - cut) for n in full_dims)
    out = y[interior]
    out_dims = out.shape[2:]

    # window p covers input origin + p*stride*dx; interior starts `cut` points later
    out_origin = tuple(o + input.dx * cut for o in input.origin)
    output = GridField(out.reshape((groups * out_g,) + out_dims), dx=input.dx, origin=out_origin)

    if tape is not None:
        def adjoint(grad_out):
            gfull = np.zeros_like(y)
            gfull[interior] = grad_out.reshape(out.shape) * scale
            gx = np.zeros_like(x)
            gw = np.zeros_like(w) if kernel.requires_grad else None
            for offset in np.ndindex(*taps):
                gs = gfull[lead + _window_slices(offset, windows, stride)]
                gx += np.einsum('io,go...->gi...', w[lead + offset], gs)
                if gw is not None:
                    gw[lead + offset] += _weight_contract(x, gs)
            return gx.reshape(input.values.shape), gw

        tape.record("deconv", (input, kernel), output, adjoint)
    return output


def mix_forward(input: GridField, weight: WeightTensor, tape: Optional[Tape] = None) -> GridField:
    """Per-channel linear map over modes: y[c, n] = sum_m W[c, m, n] x[c, m]"""
    w = weight.values
    channels, modes_in, modes_out = w.shape
    if input.channels != channels * modes_in:
        raise ShapeError(
            f"mix_forward: weight expects {channels} x {modes_in} coefficient channels, "
            f"field has {input.channels}"
        )
    x = input.values.reshape((channels, modes_in) + input.dims)
    y = np.einsum('cmn,cm...->cn...', w, x)
    output = input.like(y.reshape((channels * modes_out,) + input.dims))

    if tape is not None:
        def adjoint(grad_out):
            gy = grad_out.reshape(y.shape)
            gx = np.einsum('cmn,cn...->cm...', w, gy)
            gw = None
            if weight.requires_grad:
                gw = np.einsum('cms,cns->cmn', x.reshape(channels, modes_in, -1),
                               gy.reshape(channels, modes_out, -1))
            return gx.reshape(input.values.shape), gw

        tape.record("mix", (input, weight), output, adjoint)
    return output


def gelu(input: GridField, tape: Optional[Tape] = None) -> GridField:
    """Tanh-form GELU, elementwise"""
    x = input.values
    t = np.tanh(GELU_COEFF * (x + GELU_CUBIC * x ** 3))
    output = input.like(0.5 * x * (1.0 + t))

    if tape is not None:
        def adjoint(grad_out):
            dt = (1.0 - t ** 2) * GELU_COEFF * (1.0 + 3.0 * GELU_CUBIC * x ** 2)
            return (grad_out * (0.5 * (1.0 + t) + 0.5 * x * dt),)

        tape.record("gelu", (input,), output, adjoint)
    return output


def add(a: GridField, b: GridField, tape: Optional[Tape] = None) -> GridField:
    if a.values.shape != b.values.shape:
        raise ShapeError(f"add: shapes {a.values.shape} and {b.values.shape} differ")
    output = a.like(a.values + b.values)
    if tape is not None:
        tape.record("add", (a, b), output, lambda g: (g, g))
    return output


def crop(input: GridField, low: Sequence[int], high: Sequence[int],
         tape: Optional[Tape] = None) -> GridField:
    """Remove ``low[a]`` points from the start and ``high[a]`` from the end of each axis"""
    if len(low) != input.d or len(high) != input.d:
        raise ShapeError(f"crop: expected {input.d} widths per side")
    for axis, (n, lo, hi) in enumerate(zip(input.dims, low, high)):
        if lo < 0 or hi < 0 or lo + hi >= n:
            raise ShapeError(f"crop: cannot remove {lo}+{hi} points from size {n} on axis {axis}",
                             axis=axis)
    if not any(low) and not any(high):
        return input
    region = (slice(None),) + tuple(slice(lo, n - hi) for n, lo, hi in zip(input.dims, low, high))
    origin = tuple(o + input.dx * lo for o, lo in zip(input.origin, low))
    output = GridField(input.values[region].copy(), dx=input.dx, origin=origin)

    if tape is not None:
        def adjoint(grad_out):
            g = np.zeros_like(input.values)
            g[region] = grad_out
            return (g,)

        tape.record("crop", (input,), output, adjoint)
    return output


def center_crop(input: GridField, width: int, tape: Optional[Tape] = None) -> GridField:
    """Remove ``width`` points from both ends of every axis"""
    return crop(input, (width,) * input.d, (width,) * input.d, tape=tape)


def field_sum(input: GridField, tape: Optional[Tape] = None) -> Scalar:
    output = Scalar(float(np.sum(input.values)))
    if tape is not None:
        tape.record("sum", (input,), output, lambda g: (np.full_like(input.values, float(g)),))
    return output


def mean_l2(prediction: GridField, target: GridField, tape: Optional[Tape] = None) -> Scalar:
    """Grid mean of the pointwise Euclidean norm over channels"""
    if prediction.values.shape != target.values.shape:
        raise ShapeError(
            f"mean_l2: prediction {prediction.values.shape} and target {target.values.shape} differ"
        )
    diff = prediction.values - target.values
    norm = np.sqrt(np.sum(diff ** 2, axis=0))
    points = norm.size
    output = Scalar(float(np.mean(norm)))

    if tape is not None:
        def adjoint(grad_out):
            safe = np.where(norm > 0.0, norm, 1.0)
            g = float(grad_out) * np.where(norm > 0.0, 1.0, 0.0) * diff / safe / points
            return g, -g

        tape.record("mean_l2", (prediction, target), output, adjoint)
    return output


def scalar_mean(values: Sequence[Scalar], tape: Optional[Tape] = None) -> Scalar:
    if not values:
        raise ValueError("scalar_mean of an empty sequence")
    count = len(values)
    output = Scalar(sum(float(v) for v in values) / count)
    if tape is not None:
        tape.record("mean", tuple(values), output,
                    lambda g: tuple(np.asarray(float(g) / count) for _ in range(count)))
    return output


def ensure_finite(input: GridField, what: str) -> GridField:
    if not input.is_finite():
        raise NumericalError(f"{what}: non-finite values (max |u| = {np.nanmax(np.abs(input.values))})")
    return input
