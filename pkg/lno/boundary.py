"""
Artificial-boundary padding.

A forward pass shrinks the field by R points per side, so before each step
the state is grown by R with a rule per axis side:

    periodic   circular wrap (both sides of the axis)
    constant   fill with a per-channel far-field value
    none       no padding (the side corrodes)

Specs can be written as compact strings::

    x:periodic,y:constant=1.0,0.0
    x:periodic,y-:constant=0,0,y+:none
"""

import logging
import math
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import GridField, Tape, crop

logger = logging.getLogger(__name__)

AXIS_NAMES = ("x", "y")


class PadRule(Enum):
    PERIODIC = "periodic"
    CONSTANT = "constant"
    NONE = "none"


@dataclass(frozen=True)
class SideRule:
    rule: PadRule
    values: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.rule is PadRule.CONSTANT and not self.values:
            raise ConfigError("constant padding needs one value per channel")

    def to_string(self) -> str:
        if self.rule is PadRule.CONSTANT:
            return "constant=" + ",".join(f"{v:g}" for v in self.values)
        return self.rule.value


PERIODIC = SideRule(PadRule.PERIODIC)
NO_PAD = SideRule(PadRule.NONE)


@dataclass(frozen=True)
class BoundarySpec:
    """
    Per-axis (low, high) padding rules and the pad width R.

    Usage:
        spec = BoundarySpec.parse("x:periodic,y:constant=1.0,0.0").with_pad(25)
        big = extend(field, spec)
    """
    sides: Tuple[Tuple[SideRule, SideRule], ...]
    pad: int = 0

    def __post_init__(self):
        if self.pad < 0:
            raise ConfigError(f"pad width must be >= 0, got {self.pad}")
        if len(self.sides) not in (1, 2):
            raise ConfigError(f"boundary spec must cover 1 or 2 axes, got {len(self.sides)}")
        for axis, (low, high) in enumerate(self.sides):
            if (low.rule is PadRule.PERIODIC) != (high.rule is PadRule.PERIODIC):
                raise ConfigError(f"axis {AXIS_NAMES[axis]}: periodic must apply to both sides")

    @property
    def d(self) -> int:
        return len(self.sides)

    @classmethod
    def periodic(cls, d: int, pad: int = 0) -> 'BoundarySpec':
        return cls(sides=((PERIODIC, PERIODIC),) * d, pad=pad)

    @classmethod
    def constant(cls, d: int, values: Sequence[float], pad: int = 0) -> 'BoundarySpec':
        side = SideRule(PadRule.CONSTANT, tuple(float(v) for v in values))
        return cls(sides=((side, side),) * d, pad=pad)

    @classmethod
    def far_field(cls, angle_deg: float, pad: int = 0, periodic_y: bool = True) -> 'BoundarySpec':
        """Inflow at angle gamma: constant (cos gamma, -sin gamma) in x, periodic (cascade) in y"""
        values = far_field_velocity(angle_deg)
        side = SideRule(PadRule.CONSTANT, values)
        y_sides = (PERIODIC, PERIODIC) if periodic_y else (side, side)
        return cls(sides=((side, side), y_sides), pad=pad)

    @classmethod
    def parse(cls, text: str, pad: int = 0) -> 'BoundarySpec':
        """
        Parse a compact boundary string.

        Items are separated by commas; each is ``<axis>[-|+]:<rule>`` with rule
        ``periodic``, ``none`` or ``constant=v1,v2,...``.
        """
        items = [s.strip() for s in re.split(r',(?=\s*[a-z][+-]?\s*:)', text.strip()) if s.strip()]
        if not items:
            raise ConfigError("empty boundary spec")
        found = {}
        for item in items:
            match = re.fullmatch(r'([a-z])([+-]?)\s*:\s*(periodic|none|constant\s*=\s*(.+))', item)
            if not match:
                raise ConfigError(f"cannot parse boundary item '{item}'")
            axis_name, side, rule_text, values_text = match.groups()
            if axis_name not in AXIS_NAMES:
                raise ConfigError(f"unknown axis '{axis_name}' (use x or y)")
            axis = AXIS_NAMES.index(axis_name)
            if rule_text.startswith("constant"):
                try:
                    values = tuple(float(v) for v in values_text.split(","))
                except ValueError as e:
                    raise ConfigError(f"bad constant values in '{item}'") from e
                rule = SideRule(PadRule.CONSTANT, values)
            else:
                rule = SideRule(PadRule(rule_text))
            targets = {"": (0, 1), "-": (0,), "+": (1,)}[side]
            for t in targets:
                if (axis, t) in found:
                    raise ConfigError(f"boundary for axis {axis_name} side {'-+'[t]} given twice")
                found[(axis, t)] = rule
        d = max(axis for axis, _ in found) + 1
        sides = []
        for axis in range(d):
            missing = [t for t in (0, 1) if (axis, t) not in found]
            if missing:
                raise ConfigError(f"boundary spec does not cover axis {AXIS_NAMES[axis]}")
            sides.append((found[(axis, 0)], found[(axis, 1)]))
        return cls(sides=tuple(sides), pad=pad)

    def to_string(self) -> str:
        parts = []
        for axis, (low, high) in enumerate(self.sides):
            name = AXIS_NAMES[axis]
            if low == high:
                parts.append(f"{name}:{low.to_string()}")
            else:
                parts.append(f"{name}-:{low.to_string()}")
                parts.append(f"{name}+:{high.to_string()}")
        return ",".join(parts)

    def with_pad(self, pad: int) -> 'BoundarySpec':
        return replace(self, pad=pad)

    def pads_everywhere(self) -> bool:
        return all(side.rule is not PadRule.NONE for pair in self.sides for side in pair)

    def widths(self, extra_high: Optional[Sequence[int]] = None) -> List[Tuple[int, int]]:
        """Points added (low, high) per axis"""
        extra_high = extra_high or (0,) * self.d
        widths = []
        for (low, high), extra in zip(self.sides, extra_high):
            lo = 0 if low.rule is PadRule.NONE else self.pad
            hi = 0 if high.rule is PadRule.NONE else self.pad + extra
            widths.append((lo, hi))
        return widths


def far_field_velocity(angle_deg: float) -> Tuple[float, float]:
    gamma = math.radians(angle_deg)
    return (math.cos(gamma), -math.sin(gamma))


def _axis_index(size: int, low: int, high: int, low_rule: SideRule, high_rule: SideRule) -> np.ndarray:
    """Source index for every padded position, -1 where a constant is filled"""
    index = np.arange(-low, size + high)
    if low_rule.rule is PadRule.PERIODIC:
        return index % size
    index[index < 0] = -1
    index[index >= size] = -1
    return index


def extend(field: GridField, spec: BoundarySpec, extra_high: Optional[Sequence[int]] = None,
           tape: Optional[Tape] = None) -> GridField:
    """
    Grow each padded side by ``spec.pad`` points.

    Args:
        field: state to extend
        spec: rules per axis side and pad width R
        extra_high: additional points on the high side of each axis, filled by
            the same rule (used to align the grid to the window stride)
        tape: optional tape; the adjoint folds gradients back onto the source points
    """
    if spec.d != field.d:
        raise ShapeError(f"boundary spec covers {spec.d} axes, field has {field.d}")
    widths = spec.widths(extra_high)
    if not any(lo or hi for lo, hi in widths):
        return field

    values = field.values
    indices = []
    for axis, ((lo, hi), (low_rule, high_rule)) in enumerate(zip(widths, spec.sides)):
        for side in (low_rule, high_rule):
            if side.rule is PadRule.CONSTANT and len(side.values) != field.channels:
                raise ConfigError(
                    f"constant padding on axis {AXIS_NAMES[axis]} has {len(side.values)} values "
                    f"for {field.channels} channels")
        index = _axis_index(field.dims[axis], lo, hi, low_rule, high_rule)
        indices.append(index)
        grown = np.take(values, np.maximum(index, 0), axis=axis + 1)
        if lo and low_rule.rule is PadRule.CONSTANT:
            region = [slice(None)] * grown.ndim
            region[axis + 1] = slice(0, lo)
            grown[tuple(region)] = np.reshape(low_rule.values, (-1,) + (1,) * field.d)
        if hi and high_rule.rule is PadRule.CONSTANT:
            region = [slice(None)] * grown.ndim
            region[axis + 1] = slice(grown.shape[axis + 1] - hi, None)
            grown[tuple(region)] = np.reshape(high_rule.values, (-1,) + (1,) * field.d)
        values = grown

    origin = tuple(o - field.dx * lo for o, (lo, _) in zip(field.origin, widths))
    output = GridField(values, dx=field.dx, origin=origin)

    if tape is not None:
        def adjoint(grad_out):
            g = grad_out
            for axis in reversed(range(field.d)):
                index = indices[axis]
                keep = index >= 0
                moved = np.moveaxis(g, axis + 1, 0)[keep]
                target_shape = list(np.moveaxis(g, axis + 1, 0).shape)
                target_shape[0] = field.dims[axis]
                folded = np.zeros(target_shape)
                np.add.at(folded, index[keep], moved)
                g = np.moveaxis(folded, 0, axis + 1)
            return (g,)

        tape.record("extend", (field,), output, adjoint)
    return output


def trim(field: GridField, spec: BoundarySpec, extra_high: Optional[Sequence[int]] = None,
         tape: Optional[Tape] = None) -> GridField:
    """Inverse of :func:`extend`: remove the padded points"""
    widths = spec.widths(extra_high)
    return crop(field, [lo for lo, _ in widths], [hi for _, hi in widths], tape=tape)


def split_regions(dims: Sequence[int], spec: BoundarySpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Interior / band masks for a domain whose non-padded sides corrode.

    Returns:
        (interior, band): boolean arrays of shape ``dims``. Interior points are
        at least ``spec.pad`` points away from every side whose rule is
        ``none``; the band is the rest and must be repaired by other means.
    """
    if len(dims) != spec.d:
        raise ShapeError(f"boundary spec covers {spec.d} axes, dims has {len(dims)}")
    interior = np.ones(tuple(dims), dtype=bool)
    for axis, (size, (low, high)) in enumerate(zip(dims, spec.sides)):
        coords = np.arange(size)
        keep = np.ones(size, dtype=bool)
        if low.rule is PadRule.NONE:
            keep &= coords >= spec.pad
        if high.rule is PadRule.NONE:
            keep &= coords < size - spec.pad
        shape = [1] * len(dims)
        shape[axis] = size
        interior &= keep.reshape(shape)
    return interior, ~interior
