import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lno.boundary import (
    NO_PAD, PERIODIC, BoundarySpec, PadRule, SideRule, extend, far_field_velocity,
    split_regions, trim,
)
from lno.errors import ConfigError, ShapeError
from lno.tensor import GridField, Tape, backward, field_sum


def test_parse_and_format():
    spec = BoundarySpec.parse("x:periodic,y:constant=1.0,0.0", pad=3)
    assert spec.d == 2 and spec.pad == 3
    assert spec.sides[0] == (PERIODIC, PERIODIC)
    low, high = spec.sides[1]
    assert low == high == SideRule(PadRule.CONSTANT, (1.0, 0.0))
    assert spec.to_string() == "x:periodic,y:constant=1,0"
    assert BoundarySpec.parse(spec.to_string()).sides == spec.sides


def test_parse_per_side():
    spec = BoundarySpec.parse("x:periodic, y-:constant=0,0, y+:none")
    assert spec.sides[1] == (SideRule(PadRule.CONSTANT, (0.0, 0.0)), NO_PAD)
    assert not spec.pads_everywhere()
    assert spec.to_string() == "x:periodic,y-:constant=0,0,y+:none"


@pytest.mark.parametrize("text", [
    "",
    "x-:periodic,x+:none",
    "y:periodic",
    "z:periodic",
    "x:wrap",
    "x:constant=a,b",
    "x:periodic,x+:none",
])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        BoundarySpec.parse(text)


def test_far_field():
    assert far_field_velocity(0.0) == pytest.approx((1.0, 0.0))
    assert far_field_velocity(30.0) == pytest.approx((math.cos(math.pi / 6), -0.5))
    spec = BoundarySpec.far_field(30.0, pad=4)
    assert spec.sides[0][0].values == pytest.approx(far_field_velocity(30.0))
    assert spec.sides[1] == (PERIODIC, PERIODIC)


def test_extend_periodic_1d():
    field = GridField(np.arange(5.0)[None], dx=0.5, origin=(0.0,))
    out = extend(field, BoundarySpec.periodic(1, pad=2))
    np.testing.assert_array_equal(out.values[0], [3, 4, 0, 1, 2, 3, 4, 0, 1])
    assert out.origin == (-1.0,)


def test_extend_extra_high_points():
    field = GridField(np.arange(4.0)[None])
    spec = BoundarySpec.periodic(1, pad=1)
    out = extend(field, spec, extra_high=(2,))
    np.testing.assert_array_equal(out.values[0], [3, 0, 1, 2, 3, 0, 1, 2])
    np.testing.assert_array_equal(trim(out, spec, extra_high=(2,)).values, field.values)


def test_extend_constant_fills_corners():
    field = GridField(np.ones((2, 3, 4)))
    spec = BoundarySpec.parse("x:constant=5,-5,y:periodic", pad=2)
    out = extend(field, spec)
    assert out.values.shape == (2, 7, 8)
    assert np.all(out.values[0, :2] == 5.0) and np.all(out.values[1, -2:] == -5.0)
    assert np.all(out.values[:, 2:5] == 1.0)


def test_extend_channel_mismatch():
    spec = BoundarySpec.constant(1, (1.0, 2.0, 3.0), pad=1)
    with pytest.raises(ConfigError):
        extend(GridField(np.ones((2, 5))), spec)
    with pytest.raises(ShapeError):
        extend(GridField(np.ones((1, 5, 5))), BoundarySpec.periodic(1, pad=1))


def test_no_pad_side_is_untouched():
    spec = BoundarySpec.parse("x-:constant=0,x+:none", pad=2)
    out = extend(GridField(np.ones((1, 4))), spec)
    np.testing.assert_array_equal(out.values[0], [0, 0, 1, 1, 1, 1])


@settings(max_examples=30, deadline=None)
@given(nx=st.integers(3, 9), ny=st.integers(3, 9), pad=st.integers(0, 6), seed=st.integers(0, 1000))
def test_extend_then_trim_is_identity(nx, ny, pad, seed):
    values = np.random.default_rng(seed).standard_normal((2, nx, ny))
    field = GridField(values, dx=0.1, origin=(0.3, -0.2))
    spec = BoundarySpec.parse("x:periodic,y:constant=1,2", pad=pad)
    back = trim(extend(field, spec), spec)
    np.testing.assert_array_equal(back.values, values)
    assert back.origin == pytest.approx(field.origin)


def test_extend_adjoint_folds_copies():
    field = GridField(np.arange(5.0)[None], requires_grad=True)
    tape = Tape()
    backward(tape, field_sum(extend(field, BoundarySpec.periodic(1, pad=2), tape=tape), tape=tape))
    np.testing.assert_array_equal(field.grad[0], [2, 2, 1, 2, 2])

    field = GridField(np.ones((1, 3, 3)), requires_grad=True)
    tape = Tape()
    spec = BoundarySpec.parse("x:constant=0,y:periodic", pad=1)
    backward(tape, field_sum(extend(field, spec, tape=tape), tape=tape))
    # every point is copied once more along the periodic axis when it sits at an edge
    np.testing.assert_array_equal(field.grad[0], [[2, 1, 2]] * 3)


def test_split_regions():
    spec = BoundarySpec.parse("x:none,y:periodic", pad=2)
    interior, band = split_regions((10, 8), spec)
    assert interior.sum() == 6 * 8
    assert np.all(band[:2]) and np.all(band[-2:])
    assert not np.any(interior & band)
