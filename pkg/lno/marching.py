"""
Recurrent time marching with boundary-aware extension.

One step: extend the state by R (plus stride alignment on the high side),
run the operator, drop the alignment points, then optionally apply the
immersed boundary correction. The state keeps its dims from step to step.
"""

import logging
from typing import Callable, Optional, Tuple

import numpy as np

from .boundary import BoundarySpec, extend
from .errors import ConfigError, NumericalError
from .format import Trajectory
from .ibm import IbmGeometry, ibm_correct
from .model import LnoModel
from .tensor import GridField, Tape, crop

logger = logging.getLogger(__name__)


def alignment_padding(model: LnoModel, dims: Tuple[int, ...]) -> Tuple[int, ...]:
    """Extra high-side points per axis so that dims + 2R is a valid input size"""
    extra = []
    for size in dims:
        padded = size + 2 * model.R
        extra.append(model.valid_size(padded) - padded)
    return tuple(extra)


def cfl_number(state: GridField, dt: float) -> float:
    """max |u| dt / dx with |u| the channel norm"""
    speed = np.sqrt(np.sum(state.values ** 2, axis=0))
    return float(np.max(speed) * dt / state.dx)


def march(model: LnoModel, state: GridField, spec: BoundarySpec,
          geom: Optional[IbmGeometry] = None, tape: Optional[Tape] = None) -> GridField:
    """
    Advance ``state`` by one model time step.

    Args:
        model: trained operator
        state: current field (dims are preserved)
        spec: padding rule per axis side; its pad width is replaced by the model's R
        geom: optional wall for the immersed boundary correction
        tape: optional tape (the wall correction is not recorded)

    Returns:
        Field on the same grid one step later
    """
    if not spec.pads_everywhere():
        raise ConfigError("marching needs a periodic or constant rule on every side")
    spec = spec.with_pad(model.R)
    extra = alignment_padding(model, state.dims)
    extended = extend(state, spec, extra_high=extra, tape=tape)
    predicted = model.forward(extended, tape=tape)
    if any(extra):
        predicted = crop(predicted, (0,) * state.d, extra, tape=tape)
    if geom is not None:
        predicted = ibm_correct(predicted, geom, model.config.dt)
    return predicted


def rollout(model: LnoModel, initial: GridField, steps: int, spec: BoundarySpec,
            geom: Optional[IbmGeometry] = None,
            progress_callback: Optional[Callable[[int, int, str], None]] = None) -> Trajectory:
    """
    March ``steps`` times; the trajectory holds steps + 1 frames.

    Raises:
        NumericalError: a frame contains non-finite values
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    dt = model.config.dt
    frames = [initial.values.copy()]
    state = initial
    warned = False
    for step in range(1, steps + 1):
        state = march(model, state, spec, geom)
        if not state.is_finite():
            finite = state.values[np.isfinite(state.values)]
            peak = float(np.max(np.abs(finite))) if finite.size else float('nan')
            raise NumericalError(
                f"rollout blew up at step {step}: non-finite values (max finite |u| = {peak:.4g})")
        cfl = cfl_number(state, dt)
        if cfl > 1.0 and not warned:
            logger.warning("CFL number %.3g exceeds 1 at step %d", cfl, step)
            warned = True
        frames.append(state.values.copy())
        if progress_callback:
            progress_callback(step, steps, "Rolling out")
    return Trajectory(np.stack(frames), dx=initial.dx, dt=dt, equation="lno",
                      origin=initial.origin)
