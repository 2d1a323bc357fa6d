"""
Supervised training of the one-step operator as a recurrent network.

Each iteration draws a batch of windows (u_t, u_{t+dt}, ..., u_{t+K dt}) from
the dataset, marches the model K steps with periodic extension, and averages
the per-step mean L2 error. Gradients flow through every step and are summed
over the batch before one Adam update.
"""

import csv
import logging
import math
from dataclasses import dataclass, asdict, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .augment import AugmentTransform, augment, available_transforms
from .boundary import BoundarySpec
from .checkpoint import save_checkpoint
from .errors import ConfigError, NumericalError, ShapeError
from .format import DatasetFile, Trajectory
from .marching import march, rollout
from .model import LnoConfig, LnoModel, build
from .tensor import GridField, Scalar, Tape, WeightTensor, backward, mean_l2, scalar_mean

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[int, int, str], None]

# equations whose channels are not a velocity vector
SCALAR_EQUATIONS = ("wave",)


@dataclass
class TrainSchedule:
    """Optimizer schedule; lr(i) = lr0 * decay ** (i // decay_interval)"""
    iterations: int = 100_000
    lr0: float = 1e-3
    decay: float = 0.7
    decay_interval: int = 10_000
    rollout: int = 10
    batch_size: int = 4
    log_every: int = 100
    checkpoint_every: int = 0
    divergence_factor: float = 1e3
    augment: bool = True

    def __post_init__(self):
        problems = []
        for name in ("iterations", "decay_interval", "rollout", "batch_size", "log_every"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                problems.append(f"{name} must be a positive integer (got {value!r})")
        if not isinstance(self.checkpoint_every, (int, np.integer)) or self.checkpoint_every < 0:
            problems.append(f"checkpoint_every must be >= 0 (got {self.checkpoint_every!r})")
        for name in ("lr0", "decay", "divergence_factor"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be positive (got {getattr(self, name)!r})")
        if problems:
            raise ConfigError("Invalid TrainSchedule: " + "; ".join(problems))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'TrainSchedule':
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown TrainSchedule field(s): {', '.join(sorted(unknown))}")
        values = dict(data)
        for name in ("iterations", "decay_interval", "rollout", "batch_size", "log_every", "checkpoint_every"):
            if name in values and isinstance(values[name], float) and values[name].is_integer():
                values[name] = int(values[name])
        return cls(**values)


def learning_rate(schedule: TrainSchedule, iteration: int) -> float:
    return schedule.lr0 * schedule.decay ** (iteration // schedule.decay_interval)


# --------------------------------------------------------------------------
# Adam
# --------------------------------------------------------------------------

@dataclass
class AdamState:
    """First/second moment estimates per weight and the step counter"""
    m: List[np.ndarray]
    v: List[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_weights(cls, weights: Sequence[WeightTensor]) -> 'AdamState':
        return cls(m=[np.zeros_like(w.values) for w in weights],
                   v=[np.zeros_like(w.values) for w in weights])


def adam_step(weights: Sequence[WeightTensor], grads: Sequence[np.ndarray],
              state: AdamState, lr: float) -> None:
    """Bias-corrected Adam update, in place on ``weights`` and ``state``"""
    if len(weights) != len(state.m) or len(grads) != len(weights):
        raise ShapeError(f"Adam state tracks {len(state.m)} weights, got {len(weights)} "
                         f"weights and {len(grads)} gradients")
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for i, (w, g) in enumerate(zip(weights, grads)):
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        w.values = w.values - lr * m_hat / (np.sqrt(v_hat) + state.eps)


# --------------------------------------------------------------------------
# Windows and loss
# --------------------------------------------------------------------------

def _trajectories(dataset: Union[DatasetFile, Sequence[Trajectory]]) -> List[Trajectory]:
    if isinstance(dataset, DatasetFile):
        return dataset.trajectories
    return list(dataset)


def sample_window(dataset: Union[DatasetFile, Sequence[Trajectory]], rng: np.random.Generator,
                  rollout_length: int = 10, use_augment: bool = True
                  ) -> Tuple[GridField, List[GridField]]:
    """
    Draw (u_t, [u_{t+dt}, ..., u_{t+K dt}]) uniformly over trajectories, start
    frames and symmetry transforms.

    Raises:
        ShapeError: no trajectory has K + 1 frames
    """
    trajectories = [t for t in _trajectories(dataset) if t.frame_count >= rollout_length + 1]
    if not trajectories:
        raise ShapeError(f"dataset has no window of {rollout_length + 1} frames")
    trajectory = trajectories[int(rng.integers(len(trajectories)))]
    start = int(rng.integers(trajectory.frame_count - rollout_length))
    choices = available_transforms(trajectory.d) if use_augment else (AugmentTransform.IDENTITY,)
    transform = choices[int(rng.integers(len(choices)))]
    vector = trajectory.equation not in SCALAR_EQUATIONS and trajectory.channels == trajectory.d
    if trajectory.d == 2 and transform.swaps_axes and trajectory.dims[0] != trajectory.dims[1]:
        transform = AugmentTransform.IDENTITY

    frames = [augment(trajectory.frame(start + k), transform, vector=vector)
              for k in range(rollout_length + 1)]
    return frames[0], frames[1:]


def rollout_loss(model: LnoModel, u_t: GridField, targets: Sequence[GridField],
                 spec: Optional[BoundarySpec] = None, tape: Optional[Tape] = None) -> Scalar:
    """
    Mean over steps of the per-step mean L2 error of the recurrent prediction.

    Raises:
        NumericalError: the loss is not finite
    """
    if not targets:
        raise ValueError("rollout_loss needs at least one target")
    spec = spec or BoundarySpec.periodic(u_t.d)
    state = u_t
    losses = []
    for target in targets:
        state = march(model, state, spec, tape=tape)
        losses.append(mean_l2(state, target, tape=tape))
    loss = scalar_mean(losses, tape=tape)
    if not math.isfinite(float(loss)):
        per_step = ", ".join(f"{float(s):.4g}" for s in losses)
        raise NumericalError(f"non-finite rollout loss (per-step: {per_step})")
    return loss


# --------------------------------------------------------------------------
# Training loop
# --------------------------------------------------------------------------

@dataclass
class TrainResult:
    model: LnoModel
    curve: List[Tuple[int, float, float]] = field(default_factory=list)
    checkpoint: Optional[Path] = None
    curve_path: Optional[Path] = None

    @property
    def initial_loss(self) -> float:
        return self.curve[0][2]

    @property
    def final_loss(self) -> float:
        return self.curve[-1][2]


def check_compatible(config: LnoConfig, dataset: Union[DatasetFile, Sequence[Trajectory]]) -> None:
    trajectories = _trajectories(dataset)
    if not trajectories:
        raise ShapeError("dataset is empty")
    first = trajectories[0]
    if first.d != config.d or first.channels != config.d_u:
        raise ConfigError(f"dataset has d={first.d}, channels={first.channels} but the model "
                          f"expects d={config.d}, d_u={config.d_u}")
    if not np.isclose(first.dt, config.dt):
        logger.warning("dataset dt=%g differs from model dt=%g", first.dt, config.dt)
    if not np.isclose(first.dx, config.dx):
        logger.warning("dataset dx=%g differs from model dx=%g", first.dx, config.dx)


def write_loss_curve(curve: Sequence[Tuple[int, float, float]], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(["iteration", "lr", "loss"])
        for iteration, lr, loss in curve:
            writer.writerow([iteration, repr(lr), repr(loss)])
    return path


class Trainer:
    """
    Owns the model, the optimizer state and the sampling RNG.

    Usage:
        trainer = Trainer(config, dataset, TrainSchedule(iterations=2000), seed=0)
        trainer.set_progress_callback(lambda i, n, msg: ...)
        result = trainer.run(out_dir="runs/burgers")
    """

    def __init__(self, config: LnoConfig, dataset: Union[DatasetFile, Sequence[Trajectory]],
                 schedule: TrainSchedule, seed: int = 0, model: Optional[LnoModel] = None):
        check_compatible(config, dataset)
        self.config = config
        self.dataset = dataset
        self.schedule = schedule
        self.model = model if model is not None else build(config, seed)
        self.rng = np.random.default_rng(seed)
        self.weights = [w for w in self.model.weights() if w.requires_grad]
        self.state = AdamState.for_weights(self.weights)
        self.spec = BoundarySpec.periodic(config.d)
        self.progress_callback: Optional[ProgressCallback] = None

    def set_progress_callback(self, callback: ProgressCallback) -> None:
        self.progress_callback = callback

    def _report_progress(self, current: int, total: int, message: str) -> None:
        if self.progress_callback:
            self.progress_callback(current, total, message)

    def iteration(self, lr: float) -> float:
        """One batch: summed gradients, one Adam step; returns the batch-mean loss"""
        self.model.zero_grad()
        total = 0.0
        for _ in range(self.schedule.batch_size):
            u_t, targets = sample_window(self.dataset, self.rng, self.schedule.rollout, self.schedule.augment)
            tape = Tape()
            loss = rollout_loss(self.model, u_t, targets, self.spec, tape=tape)
            backward(tape, loss)
            total += float(loss)
        adam_step(self.weights, [w.grad for w in self.weights], self.state, lr)
        return total / self.schedule.batch_size

    def run(self, out_dir: Optional[Union[str, Path]] = None) -> TrainResult:
        schedule = self.schedule
        out = Path(out_dir) if out_dir is not None else None
        result = TrainResult(model=self.model)
        initial = None
        logger.info("Training %d weights for %d iterations", self.model.weight_count, schedule.iterations)

        for i in range(schedule.iterations):
            lr = learning_rate(schedule, i)
            loss = self.iteration(lr)
            if initial is None:
                initial = loss
            elif loss > schedule.divergence_factor * initial:
                raise NumericalError(
                    f"training diverged at iteration {i}: loss {loss:.4g} exceeds "
                    f"{schedule.divergence_factor:g} x initial loss {initial:.4g}")

            last = i == schedule.iterations - 1
            if i % schedule.log_every == 0 or last:
                result.curve.append((i, lr, loss))
                logger.info("iteration %d  lr %.3g  loss %.6g", i, lr, loss)
            if out is not None and schedule.checkpoint_every and i > 0 and i % schedule.checkpoint_every == 0:
                save_checkpoint(self.model, out / f"checkpoint_{i:07d}.lnoc")
            self._report_progress(i + 1, schedule.iterations, "Training")

        if out is not None:
            result.checkpoint = save_checkpoint(self.model, out / "model.lnoc")
            result.curve_path = write_loss_curve(result.curve, out / "loss.csv")
        return result


def train_loop(config: LnoConfig, dataset: Union[DatasetFile, Sequence[Trajectory]],
               schedule: TrainSchedule, seed: int = 0,
               out_dir: Optional[Union[str, Path]] = None,
               progress_callback: Optional[ProgressCallback] = None) -> TrainResult:
    """Build a model from ``config`` and train it; see :class:`Trainer`"""
    trainer = Trainer(config, dataset, schedule, seed)
    if progress_callback:
        trainer.set_progress_callback(progress_callback)
    return trainer.run(out_dir)


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------

def trajectory_error(prediction: Trajectory, truth: Trajectory, times: Sequence[float]) -> Dict[float, float]:
    """E_t = grid mean of the pointwise channel-norm error at each time"""
    if prediction.values.shape[1:] != truth.values.shape[1:]:
        raise ShapeError(f"prediction frames {prediction.values.shape[1:]} and truth frames "
                         f"{truth.values.shape[1:]} differ")
    errors = {}
    for time in times:
        p = prediction.frame(prediction.frame_index(time))
        t = truth.frame(truth.frame_index(time))
        errors[time] = float(mean_l2(p, t))
    return errors


def validate_error(model: LnoModel, trajectories: Sequence[Trajectory], times: Sequence[float],
                   spec: Optional[BoundarySpec] = None,
                   progress_callback: Optional[ProgressCallback] = None) -> Dict[float, float]:
    """
    Roll the model out from frame 0 of each trajectory and average E_t.

    Raises:
        ConfigError: a time beyond a trajectory or not a multiple of dt
    """
    if not trajectories:
        raise ShapeError("no trajectories to validate on")
    dt = model.config.dt
    steps = 0
    for time in times:
        index = int(round(time / dt))
        if index < 1 or abs(index * dt - time) > 1e-9 * max(1.0, abs(time)):
            raise ConfigError(f"time {time} is not a positive multiple of dt={dt}")
        for trajectory in trajectories:
            if not np.isclose(trajectory.dt, dt):
                raise ConfigError(f"trajectory dt={trajectory.dt} differs from model dt={dt}")
            if index >= trajectory.frame_count:
                raise ConfigError(f"time {time} is beyond the trajectory ({trajectory.duration:g})")
        steps = max(steps, index)

    spec = spec or BoundarySpec.periodic(model.config.d)
    totals = {time: 0.0 for time in times}
    for i, truth in enumerate(trajectories):
        predicted = rollout(model, truth.frame(0), steps, spec)
        for time, error in trajectory_error(predicted, truth, times).items():
            totals[time] += error
        if progress_callback:
            progress_callback(i + 1, len(trajectories), "Validating")
    return {time: total / len(trajectories) for time, total in totals.items()}
