import logging

import numpy as np
import pytest

from lno.boundary import BoundarySpec, extend
from lno.errors import ConfigError, NumericalError
from lno.ibm import IbmGeometry, ibm_correct
from lno.marching import alignment_padding, cfl_number, march, rollout
from lno.tensor import GridField


def test_alignment_padding(tiny_model):
    # padded sizes must be even and at least 8
    assert alignment_padding(tiny_model, (8, 7)) == (0, 1)
    assert alignment_padding(tiny_model, (1, 10)) == (1, 0)


def test_march_matches_manual_extension(tiny_model, rng):
    state = GridField(rng.standard_normal((2, 8, 8)), dx=0.125, origin=(0.5, -0.25))
    spec = BoundarySpec.periodic(2)
    out = march(tiny_model, state, spec)
    manual = tiny_model.forward(extend(state, spec.with_pad(tiny_model.R)))
    np.testing.assert_array_equal(out.values, manual.values)
    assert out.origin == pytest.approx(state.origin)


def test_march_keeps_odd_dims(tiny_model, rng):
    state = GridField(rng.standard_normal((2, 7, 9)), dx=0.125)
    out = march(tiny_model, state, BoundarySpec.parse("x:constant=1,0,y:periodic"))
    assert out.dims == (7, 9)
    assert out.origin == pytest.approx((0.0, 0.0))


def test_march_needs_padding_everywhere(tiny_model):
    with pytest.raises(ConfigError):
        march(tiny_model, GridField(np.zeros((2, 8, 8))), BoundarySpec.parse("x:none,y:periodic"))


def test_march_applies_wall_correction(tiny_model, rng):
    state = GridField(rng.standard_normal((2, 8, 8)), dx=0.125)
    spec = BoundarySpec.periodic(2)
    geom = IbmGeometry(points=[[0.5, 0.5]], ds=0.125, u_bc=[[0.0, 0.0]])
    expected = ibm_correct(march(tiny_model, state, spec), geom, tiny_model.config.dt)
    np.testing.assert_array_equal(march(tiny_model, state, spec, geom).values, expected.values)


def test_rollout(tiny_model, rng):
    calls = []
    initial = GridField(rng.standard_normal((2, 8, 8)), dx=0.125)
    trajectory = rollout(tiny_model, initial, 3, BoundarySpec.periodic(2),
                         progress_callback=lambda i, n, msg: calls.append(i))
    assert trajectory.values.shape == (4, 2, 8, 8)
    assert trajectory.dt == tiny_model.config.dt and trajectory.equation == "lno"
    np.testing.assert_array_equal(trajectory.values[0], initial.values)
    assert calls == [1, 2, 3]
    with pytest.raises(ValueError):
        rollout(tiny_model, initial, 0, BoundarySpec.periodic(2))


def test_two_marches_equal_two_step_rollout(tiny_model, rng):
    initial = GridField(rng.standard_normal((2, 8, 8)), dx=0.125)
    spec = BoundarySpec.periodic(2)
    twice = march(tiny_model, march(tiny_model, initial, spec), spec)
    trajectory = rollout(tiny_model, initial, 2, spec)
    np.testing.assert_array_equal(trajectory.values[2], twice.values)


def test_rollout_blow_up(tiny_model):
    initial = GridField(np.full((2, 8, 8), np.inf), dx=0.125)
    with pytest.raises(NumericalError, match="step 1"):
        rollout(tiny_model, initial, 2, BoundarySpec.periodic(2))


def test_cfl_number():
    state = GridField(np.stack([np.full((4, 4), 3.0), np.full((4, 4), 4.0)]), dx=0.5)
    assert cfl_number(state, 0.1) == pytest.approx(1.0)


def test_rollout_warns_once_on_cfl(tiny_model, monkeypatch, caplog):
    monkeypatch.setattr("lno.marching.march", lambda model, state, spec, geom=None: state)
    with caplog.at_level(logging.WARNING, logger="lno.marching"):
        rollout(tiny_model, GridField(np.full((2, 8, 8), 50.0), dx=0.125), 3, BoundarySpec.periodic(2))
    assert caplog.text.count("CFL") == 1
