"""
Local neural operator architecture.

    lifting   (2H+1)^d conv, d_u -> width
    n blocks  gelu( conv2(gelu(conv1(v))) + spectral(v) ), both paths cropped to r2
    projection 1x1 conv width -> hidden, gelu, 1x1 conv hidden -> d_u

No layer has a bias, so a zero input maps to a zero output. The output loses
R = H + n * r2 points per side, r2 = max((k-1) * N/k, 2H).
"""

import logging
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ShapeError
from .legendre import SpectralLayer, make_kernels, spectral_forward
from .tensor import (
    GridField, Tape, WeightTensor,
    add, center_crop, conv_forward, gelu,
)

logger = logging.getLogger(__name__)


@dataclass
class LnoConfig:
    """Hyperparameters of one operator"""
    d: int = 2
    d_u: int = 2
    width: int = 40
    proj_hidden: int = 128
    n: int = 4
    N: int = 12
    M: int = 6
    k: int = 2
    H: int = 1
    dx: float = 1.0 / 64
    dt: float = 0.05

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ConfigError("Invalid LnoConfig: " + "; ".join(problems))

    def problems(self) -> List[str]:
        """Every violated constraint, in field order"""
        found = []
        if self.d not in (1, 2):
            found.append(f"d must be 1 or 2 (got {self.d})")
        for name in ("d_u", "width", "proj_hidden", "n", "N", "M", "k", "H"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                found.append(f"{name} must be a positive integer (got {value!r})")
        if found:
            return found
        if self.N < 2:
            found.append(f"N must be >= 2 (got {self.N})")
        if self.N % self.k:
            found.append(f"N={self.N} is not divisible by k={self.k}")
        if self.M > self.N:
            found.append(f"M={self.M} exceeds N={self.N}")
        if not self.dx > 0:
            found.append(f"dx must be positive (got {self.dx})")
        if not self.dt > 0:
            found.append(f"dt must be positive (got {self.dt})")
        if not found and self.n > 1 and (2 * self.r2) % self.stride:
            found.append(f"block corrosion 2*{self.r2} is not a multiple of the stride {self.stride}; "
                         f"no grid size satisfies every block")
        return found

    @property
    def stride(self) -> int:
        return self.N // self.k

    @property
    def kernel_size(self) -> int:
        return 2 * self.H + 1

    @property
    def spectral_corrosion(self) -> int:
        return (self.k - 1) * self.stride

    @property
    def r2(self) -> int:
        return max(self.spectral_corrosion, 2 * self.H)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'LnoConfig':
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown LnoConfig field(s): {', '.join(sorted(unknown))}")
        values = dict(data)
        for name in ("d", "d_u", "width", "proj_hidden", "n", "N", "M", "k", "H"):
            if name in values and isinstance(values[name], float) and values[name].is_integer():
                values[name] = int(values[name])
        return cls(**values)


@dataclass(frozen=True)
class CorrosionReport:
    """Corrosion per stage and the local-related range, all in grid points"""
    r1: int
    r2: int
    r3: int
    R: int
    r_min: int

    def in_length(self, dx: float) -> Dict[str, float]:
        return {"R": self.R * dx, "r_min": self.r_min * dx}


def corrosion(config: LnoConfig) -> CorrosionReport:
    """R = r1 + n * r2 + r3 with r1 = H, r3 = 0; r_min = N/k + R"""
    r1, r2, r3 = config.H, config.r2, 0
    total = r1 + config.n * r2 + r3
    return CorrosionReport(r1=r1, r2=r2, r3=r3, R=total, r_min=config.stride + total)


def count_weights(config: LnoConfig) -> int:
    taps = config.kernel_size ** config.d
    modes = config.M ** config.d
    w = config.width
    return (taps * config.d_u * w
            + config.n * (2 * taps * w * w + w * modes * modes)
            + w * config.proj_hidden
            + config.proj_hidden * config.d_u)


@dataclass
class Block:
    conv1: WeightTensor
    conv2: WeightTensor
    spectral: SpectralLayer

    @property
    def mix(self) -> WeightTensor:
        return self.spectral.mix


@dataclass
class LnoModel:
    """
    Assembled operator.

    Usage:
        model = build(LnoConfig(d=1, d_u=1, width=20), seed=0)
        out = model.forward(field)          # dims shrink by 2R
    """
    config: LnoConfig
    lifting: WeightTensor
    blocks: List[Block]
    proj1: WeightTensor
    proj2: WeightTensor
    _report: CorrosionReport = field(init=False, repr=False)

    def __post_init__(self):
        self._report = corrosion(self.config)

    @property
    def report(self) -> CorrosionReport:
        return self._report

    @property
    def R(self) -> int:
        return self._report.R

    def weights(self) -> List[WeightTensor]:
        """Canonical order: lifting, per block (conv1, conv2, mix), proj1, proj2"""
        ordered = [self.lifting]
        for block in self.blocks:
            ordered.extend([block.conv1, block.conv2, block.mix])
        ordered.extend([self.proj1, self.proj2])
        return ordered

    def named_weights(self) -> List[Tuple[str, WeightTensor]]:
        return [(w.name, w) for w in self.weights()]

    @property
    def weight_count(self) -> int:
        return sum(w.size for w in self.weights())

    def zero_grad(self) -> None:
        for w in self.weights():
            w.zero_grad()

    # ------------------------------------------------------------------
    # Shape calculus
    # ------------------------------------------------------------------

    def _axis_ok(self, size: int) -> bool:
        cfg = self.config
        current = size - 2 * cfg.H
        for _ in range(cfg.n):
            if current - cfg.N < 0 or (current - cfg.N) % cfg.stride:
                return False
            windows = (current - cfg.N) // cfg.stride + 1
            if windows < cfg.k or current - 4 * cfg.H < 1:
                return False
            current -= 2 * cfg.r2
        return current >= 1

    def valid_size(self, size: int) -> int:
        """Smallest input size >= ``size`` that the forward pass accepts"""
        candidate = max(size, 2 * self.R + 1)
        for _ in range(self.config.stride * 4 + 2 * self.config.N):
            if self._axis_ok(candidate):
                return candidate
            candidate += 1
        raise ShapeError(f"No valid input size near {size} for this configuration")

    def check_input(self, input: GridField) -> None:
        cfg = self.config
        if input.d != cfg.d:
            raise ShapeError(f"model is {cfg.d}-D, field is {input.d}-D")
        if input.channels != cfg.d_u:
            raise ShapeError(f"model expects {cfg.d_u} channels, field has {input.channels}")
        for axis, size in enumerate(input.dims):
            if size <= 2 * self.R:
                raise ShapeError(
                    f"axis {axis}: size {size} must exceed 2R = {2 * self.R}",
                    axis=axis, suggested=self.valid_size(size))
            if not self._axis_ok(size):
                raise ShapeError(
                    f"axis {axis}: size {size} violates the window alignment "
                    f"(size - 2R must be a multiple of {cfg.stride})",
                    axis=axis, suggested=self.valid_size(size))

    def output_dims(self, dims: Sequence[int]) -> Tuple[int, ...]:
        return tuple(n - 2 * self.R for n in dims)

    # ------------------------------------------------------------------
    # Forward
    # ------------------------------------------------------------------

    def forward(self, input: GridField, tape: Optional[Tape] = None) -> GridField:
        """One time step on an already extended field; dims shrink by 2R per axis"""
        self.check_input(input)
        cfg = self.config
        v = conv_forward(input, self.lifting, tape=tape)
        for block in self.blocks:
            physical = conv_forward(gelu(conv_forward(v, block.conv1, tape=tape), tape=tape),
                                    block.conv2, tape=tape)
            spectral = spectral_forward(block.spectral, v, tape=tape)
            physical = center_crop(physical, cfg.r2 - 2 * cfg.H, tape=tape)
            spectral = center_crop(spectral, cfg.r2 - cfg.spectral_corrosion, tape=tape)
            v = gelu(add(physical, spectral, tape=tape), tape=tape)
        v = gelu(conv_forward(v, self.proj1, tape=tape), tape=tape)
        return conv_forward(v, self.proj2, tape=tape)

    def __repr__(self) -> str:
        cfg = self.config
        return (f"LnoModel(d={cfg.d}, d_u={cfg.d_u}, width={cfg.width}, n={cfg.n}, "
                f"N={cfg.N}, M={cfg.M}, k={cfg.k}, weights={self.weight_count}, R={self.R})")


def weight_shapes(config: LnoConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    """Names and shapes of every weight in canonical order"""
    taps = (config.kernel_size,) * config.d
    ones = (1,) * config.d
    modes = config.M ** config.d
    w = config.width
    shapes = [("lifting", (w, config.d_u) + taps)]
    for i in range(config.n):
        shapes.append((f"block{i}.conv1", (w, w) + taps))
        shapes.append((f"block{i}.conv2", (w, w) + taps))
        shapes.append((f"block{i}.mix", (w, modes, modes)))
    shapes.append(("proj1", (config.proj_hidden, w) + ones))
    shapes.append(("proj2", (config.d_u, config.proj_hidden) + ones))
    return shapes


def _fan_in(name: str, shape: Tuple[int, ...]) -> int:
    if name.endswith(".mix"):
        return shape[1]
    return int(np.prod(shape[1:]))


def assemble(config: LnoConfig, arrays: Sequence[np.ndarray]) -> LnoModel:
    """Build a model around existing weight arrays given in canonical order"""
    shapes = weight_shapes(config)
    if len(arrays) != len(shapes):
        raise ConfigError(f"expected {len(shapes)} weight arrays, got {len(arrays)}")
    tensors = []
    for (name, shape), values in zip(shapes, arrays):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != shape:
            raise ConfigError(f"weight '{name}' has shape {values.shape}, expected {shape}")
        tensors.append(WeightTensor(values, name=name))

    kernels = make_kernels(config.N, config.M, config.d)
    blocks = []
    for i in range(config.n):
        conv1, conv2, mix = tensors[1 + 3 * i: 4 + 3 * i]
        blocks.append(Block(conv1, conv2, SpectralLayer(kernels, mix, config.k)))
    return LnoModel(config=config, lifting=tensors[0], blocks=blocks,
                    proj1=tensors[-2], proj2=tensors[-1])


def build(config: LnoConfig, seed: int = 0) -> LnoModel:
    """
    Create a model with weights uniform in +-fan_in^-1/2.

    Args:
        config: validated hyperparameters
        seed: RNG seed; identical seeds give identical weights

    Returns:
        LnoModel
    """
    rng = np.random.default_rng(seed)
    arrays = []
    for name, shape in weight_shapes(config):
        bound = 1.0 / np.sqrt(_fan_in(name, shape))
        arrays.append(rng.uniform(-bound, bound, size=shape))
    model = assemble(config, arrays)
    logger.info("Built %r", model)
    return model


def forward(model: LnoModel, input: GridField, tape: Optional[Tape] = None) -> GridField:
    return model.forward(input, tape=tape)
