"""
Reference solvers used to generate training and validation data.

All solvers work on the periodic square [-1, 1)^d sampled at
x_i = -1 + i dx, dx = 2 / n. Frame 0 of every trajectory is the initial state.

    solve_burgers       implicit (theta) Euler, central differences, Newton
    solve_wave          Newmark average acceleration, 5-point Laplacian
    solve_ns_periodic   vorticity-streamfunction pseudo-spectral, RK4 sub-steps
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, NumericalError, ShapeError
from .format import Trajectory
from .tensor import GridField

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence, None]

NEWTON_TOLERANCE = 1e-7
NEWTON_MAX_ITERATIONS = 50
FORCE_DURATION = 0.05
MAX_SUBSTEPS = 100_000


def periodic_grid(points: int, d: int) -> Tuple[float, Tuple[float, ...]]:
    """(dx, origin) of the periodic grid on [-1, 1)^d"""
    return 2.0 / points, (-1.0,) * d


def _basis(x: np.ndarray) -> np.ndarray:
    """[sin pi x, sin 2 pi x, cos pi x, cos 2 pi x] stacked on axis 0"""
    return np.stack([np.sin(np.pi * x), np.sin(2 * np.pi * x),
                     np.cos(np.pi * x), np.cos(2 * np.pi * x)])


# --------------------------------------------------------------------------
# Random fields
# --------------------------------------------------------------------------

class FieldKind(Enum):
    FORCE_2D = "force2d"
    IC_1D = "ic1d"


@dataclass(frozen=True)
class RandomFieldSpec:
    """Seeded random field; the same seed always yields the same field"""
    seed: int
    kind: FieldKind
    channels: int = 1

    def generate(self, dims: Sequence[int], dx: float,
                 origin: Optional[Tuple[float, ...]] = None) -> GridField:
        if self.kind is FieldKind.FORCE_2D:
            return random_force_2d(self.seed, dims, dx, channels=self.channels, origin=origin)
        return random_ic_1d(self.seed, dims, dx, channels=self.channels, origin=origin)


def random_force_2d(seed: SeedLike, dims: Sequence[int], dx: float, channels: int = 2,
                    origin: Optional[Tuple[float, float]] = None,
                    coefficients: Optional[np.ndarray] = None) -> GridField:
    """
    F_c(x, y) = a(x)^T L_c b(y) with a, b the 4-term trig basis and L_c a
    4x4 standard-normal matrix drawn per channel.

    Args:
        seed: RNG seed
        dims: (nx, ny)
        dx: grid spacing
        channels: independent draws
        origin: grid origin, defaults to (-1, -1)
        coefficients: explicit (channels, 4, 4) matrices instead of a draw
    """
    if len(dims) != 2:
        raise ShapeError(f"random_force_2d needs 2 dims, got {dims}")
    origin = origin or (-1.0, -1.0)
    if coefficients is None:
        coefficients = np.random.default_rng(seed).standard_normal((channels, 4, 4))
    coefficients = np.asarray(coefficients, dtype=np.float64).reshape(-1, 4, 4)
    ax = _basis(origin[0] + dx * np.arange(dims[0]))
    by = _basis(origin[1] + dx * np.arange(dims[1]))
    values = np.einsum('ix,cij,jy->cxy', ax, coefficients, by)
    return GridField(values, dx=dx, origin=origin)


def ic_1d_from_coefficients(coefficients: Sequence[float], x) -> np.ndarray:
    """l1 sin(pi x) + l2 sin(2 pi x) + l3 cos(pi x) + l4 cos(2 pi x)"""
    return np.tensordot(np.asarray(coefficients, dtype=np.float64), _basis(np.asarray(x, dtype=np.float64)), 1)


def random_ic_1d(seed: SeedLike, dims: Sequence[int], dx: float, channels: int = 1,
                 origin: Optional[Tuple[float]] = None,
                 coefficients: Optional[np.ndarray] = None) -> GridField:
    """Four-term trig initial condition with standard-normal coefficients per channel"""
    if len(dims) != 1:
        raise ShapeError(f"random_ic_1d needs 1 dim, got {dims}")
    origin = origin or (-1.0,)
    if coefficients is None:
        coefficients = np.random.default_rng(seed).standard_normal((channels, 4))
    coefficients = np.asarray(coefficients, dtype=np.float64).reshape(-1, 4)
    x = origin[0] + dx * np.arange(dims[0])
    values = np.stack([ic_1d_from_coefficients(c, x) for c in coefficients])
    return GridField(values, dx=dx, origin=origin)


# --------------------------------------------------------------------------
# Finite-difference operators
# --------------------------------------------------------------------------

def _shift(n: int) -> sp.csr_matrix:
    """(S u)_i = u_{i+1} with periodic wrap"""
    if n < 3:
        raise ShapeError(f"periodic finite differences need at least 3 points per axis, got {n}")
    return (sp.eye(n, k=1) + sp.eye(n, k=-(n - 1))).tocsr()


def difference_operators(dims: Sequence[int], dx: float):
    """Central first derivatives per axis and the (2d+1)-point Laplacian on the flattened grid"""
    derivatives = []
    laplacian = None
    for axis, n in enumerate(dims):
        s = _shift(n)
        d1 = (s - s.T) / (2.0 * dx)
        d2 = (s + s.T - 2.0 * sp.eye(n)) / dx ** 2
        left = sp.eye(int(np.prod(dims[:axis])))
        right = sp.eye(int(np.prod(dims[axis + 1:])))
        derivatives.append(sp.kron(sp.kron(left, d1), right).tocsr())
        term = sp.kron(sp.kron(left, d2), right).tocsr()
        laplacian = term if laplacian is None else laplacian + term
    return derivatives, laplacian.tocsr()


# --------------------------------------------------------------------------
# Burgers
# --------------------------------------------------------------------------

def _newton(residual, jacobian, guess: np.ndarray, step: int) -> np.ndarray:
    u = guess.copy()
    for iteration in range(1, NEWTON_MAX_ITERATIONS + 1):
        delta = spla.spsolve(jacobian(u).tocsc(), -residual(u))
        if not np.all(np.isfinite(delta)):
            raise NumericalError(f"Newton step {iteration} produced non-finite values at time step {step}")
        u += delta
        if np.max(np.abs(delta)) < NEWTON_TOLERANCE:
            logger.debug("time step %d: Newton converged in %d iterations", step, iteration)
            return u
    raise NumericalError(
        f"Newton iteration did not converge within {NEWTON_MAX_ITERATIONS} iterations at time step {step}")


def solve_burgers(ic: GridField, mu: float, dt: float, steps: int, theta: float = 1.0) -> Trajectory:
    """
    Viscous Burgers u_t + u . grad u = mu lap u on a periodic grid.

    Args:
        ic: initial velocity, 1 channel in 1-D or 2 channels in 2-D
        mu: viscosity (> 0)
        dt: time step
        steps: number of steps; the trajectory has steps + 1 frames
        theta: 1 for implicit Euler, 0.5 for Crank-Nicolson

    Returns:
        Trajectory tagged "burgers"
    """
    if not mu > 0:
        raise ConfigError(f"viscosity must be positive, got {mu}")
    if not 0.5 <= theta <= 1.0:
        raise ConfigError(f"theta must lie in [0.5, 1], got {theta}")
    if ic.channels != ic.d:
        raise ShapeError(f"{ic.d}-D Burgers needs {ic.d} velocity channels, got {ic.channels}")
    (dxs, laplacian) = difference_operators(ic.dims, ic.dx)
    size = int(np.prod(ic.dims))
    eye = sp.eye(ic.channels * size, format='csr')

    if ic.d == 1:
        (d,) = dxs

        def rate(u):
            return d @ (0.5 * u * u) - mu * (laplacian @ u)

        def rate_jacobian(u):
            return d @ sp.diags(u) - mu * laplacian
    else:
        dx_op, dy_op = dxs

        def rate(w):
            u, v = w[:size], w[size:]
            return np.concatenate([
                u * (dx_op @ u) + v * (dy_op @ u) - mu * (laplacian @ u),
                u * (dx_op @ v) + v * (dy_op @ v) - mu * (laplacian @ v),
            ])

        def rate_jacobian(w):
            u, v = w[:size], w[size:]
            advect = sp.diags(u) @ dx_op + sp.diags(v) @ dy_op - mu * laplacian
            return sp.bmat([
                [advect + sp.diags(dx_op @ u), sp.diags(dy_op @ u)],
                [sp.diags(dx_op @ v), advect + sp.diags(dy_op @ v)],
            ])

    frames = np.empty((steps + 1,) + ic.values.shape)
    frames[0] = ic.values
    state = ic.values.reshape(-1).copy()
    for step in range(1, steps + 1):
        previous = state
        explicit = (1.0 - theta) * rate(previous) if theta < 1.0 else 0.0

        def residual(w):
            return w - previous + dt * (theta * rate(w) + explicit)

        def jacobian(w):
            return eye + dt * theta * rate_jacobian(w)

        state = _newton(residual, jacobian, previous, step)
        frames[step] = state.reshape(ic.values.shape)
    return Trajectory(frames, dx=ic.dx, dt=dt, equation="burgers", parameter=mu, origin=ic.origin)


# --------------------------------------------------------------------------
# Wave
# --------------------------------------------------------------------------

def wave_energy(p: np.ndarray, p_t: np.ndarray, speed: float, dx: float) -> float:
    """1/2 |p_t|^2 + 1/2 c^2 |grad_h p|^2 with forward differences (grid sums)"""
    gradient = sum(np.sum(((np.roll(p, -1, axis=a) - p) / dx) ** 2) for a in range(p.ndim))
    return 0.5 * float(np.sum(p_t ** 2)) + 0.5 * speed ** 2 * float(gradient)


def solve_wave(ic_p: GridField, speed: float, dt: float, steps: int,
               beta: float = 0.25, gamma: float = 0.5) -> Trajectory:
    """
    Linear wave equation p_tt = c^2 lap p, starting from rest.

    Frames carry two channels (p, dp/dt).
    """
    if ic_p.channels != 1:
        raise ShapeError(f"wave initial condition must have 1 channel, got {ic_p.channels}")
    if not speed > 0:
        raise ConfigError(f"wave speed must be positive, got {speed}")
    _, laplacian = difference_operators(ic_p.dims, ic_p.dx)
    stiffness = (-speed ** 2) * laplacian
    size = stiffness.shape[0]

    a0 = 1.0 / (beta * dt * dt)
    a2 = 1.0 / (beta * dt)
    a3 = 1.0 / (2.0 * beta) - 1.0
    a6 = dt * (1.0 - gamma)
    a7 = gamma * dt
    try:
        solver = spla.splu((stiffness + a0 * sp.eye(size)).tocsc())
    except RuntimeError as e:
        raise NumericalError(f"wave system factorization failed: {e}") from e

    p = ic_p.values.reshape(-1).copy()
    v = np.zeros(size)
    a = -(stiffness @ p)
    frames = np.empty((steps + 1, 2) + ic_p.dims)
    frames[0, 0] = p.reshape(ic_p.dims)
    frames[0, 1] = 0.0
    for step in range(1, steps + 1):
        p_next = solver.solve(a0 * p + a2 * v + a3 * a)
        if not np.all(np.isfinite(p_next)):
            raise NumericalError(f"wave solve produced non-finite values at step {step}")
        a_next = a0 * (p_next - p) - a2 * v - a3 * a
        v = v + a6 * a + a7 * a_next
        p, a = p_next, a_next
        frames[step, 0] = p.reshape(ic_p.dims)
        frames[step, 1] = v.reshape(ic_p.dims)
    return Trajectory(frames, dx=ic_p.dx, dt=dt, equation="wave", parameter=speed, origin=ic_p.origin)


# --------------------------------------------------------------------------
# Navier-Stokes (periodic)
# --------------------------------------------------------------------------

class _SpectralGrid:
    """Wavenumbers of the periodic square of side 2"""

    def __init__(self, n: int):
        integers = np.fft.fftfreq(n, d=1.0 / n)
        self.n = n
        self.kx = (np.pi * integers)[:, None]
        self.ky = (np.pi * integers)[None, :]
        self.k2 = self.kx ** 2 + self.ky ** 2
        self.inverse_k2 = np.where(self.k2 > 0, 1.0 / np.where(self.k2 > 0, self.k2, 1.0), 0.0)
        cutoff = n / 3.0
        self.keep = (np.abs(integers)[:, None] < cutoff) & (np.abs(integers)[None, :] < cutoff)
        self.k_max = float(np.pi * np.max(np.abs(integers)))

    def velocity(self, omega_hat: np.ndarray, mean: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        psi_hat = omega_hat * self.inverse_k2
        u = mean[0] + np.real(np.fft.ifft2(1j * self.ky * psi_hat))
        v = mean[1] + np.real(np.fft.ifft2(-1j * self.kx * psi_hat))
        return u, v

    def curl_hat(self, fx: np.ndarray, fy: np.ndarray) -> np.ndarray:
        return 1j * self.kx * np.fft.fft2(fy) - 1j * self.ky * np.fft.fft2(fx)

    def divergence(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.real(np.fft.ifft2(1j * self.kx * np.fft.fft2(u) + 1j * self.ky * np.fft.fft2(v)))


def spectral_divergence(frame: np.ndarray) -> np.ndarray:
    """Divergence of a (2, n, n) periodic velocity frame"""
    return _SpectralGrid(frame.shape[1]).divergence(frame[0], frame[1])


def _ns_rate(grid: _SpectralGrid, omega_hat, mean, mu, forcing_hat):
    u, v = grid.velocity(omega_hat, mean)
    wx = np.real(np.fft.ifft2(1j * grid.kx * omega_hat))
    wy = np.real(np.fft.ifft2(1j * grid.ky * omega_hat))
    advection = np.fft.fft2(-(u * wx + v * wy)) * grid.keep
    rate = advection - mu * grid.k2 * omega_hat
    if forcing_hat is not None:
        rate = rate + forcing_hat
    return rate


def _ns_advance(grid: _SpectralGrid, omega_hat, mean, mu, duration, forcing_hat, forcing_mean):
    """RK4 over ``duration`` with automatic sub-steps"""
    u, v = grid.velocity(omega_hat, mean)
    speed = float(np.max(np.sqrt(u ** 2 + v ** 2)))
    limits = [duration]
    if mu > 0:
        limits.append(2.5 / (mu * grid.k_max ** 2))
    if speed > 0:
        limits.append(1.5 / (grid.k_max * speed))
    substeps = int(math.ceil(duration / min(limits) - 1e-12))
    if substeps > MAX_SUBSTEPS or not np.isfinite(speed):
        raise NumericalError(f"N-S sub-step underflow: {substeps} sub-steps needed (max |u| = {speed:.4g})")
    h = duration / max(substeps, 1)
    for _ in range(max(substeps, 1)):
        k1 = _ns_rate(grid, omega_hat, mean, mu, forcing_hat)
        k2 = _ns_rate(grid, omega_hat + 0.5 * h * k1, mean, mu, forcing_hat)
        k3 = _ns_rate(grid, omega_hat + 0.5 * h * k2, mean, mu, forcing_hat)
        k4 = _ns_rate(grid, omega_hat + h * k3, mean, mu, forcing_hat)
        omega_hat = omega_hat + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        if forcing_mean is not None:
            mean = mean + h * forcing_mean
    return omega_hat, mean


def solve_ns_periodic(ic: GridField, mu: float, dt: float, steps: int,
                      force: Optional[GridField] = None,
                      force_duration: Optional[float] = None) -> Trajectory:
    """
    Incompressible Navier-Stokes on the doubly periodic square.

    Args:
        ic: initial velocity (2, n, n); only its divergence-free part is kept
        mu: viscosity
        dt: time between recorded frames
        steps: recorded steps; the trajectory has steps + 1 frames
        force: optional body force (2, n, n)
        force_duration: if given, the force acts only for this long before
            frame 0 (warm-up); otherwise it acts throughout

    Returns:
        Trajectory tagged "ns" of velocity frames
    """
    if ic.d != 2 or ic.channels != 2 or ic.dims[0] != ic.dims[1]:
        raise ShapeError(f"N-S needs a (2, n, n) velocity field, got {ic.values.shape}")
    if mu < 0:
        raise ConfigError(f"viscosity must be >= 0, got {mu}")
    grid = _SpectralGrid(ic.dims[0])
    omega_hat = grid.curl_hat(ic.values[0], ic.values[1])
    mean = ic.values.reshape(2, -1).mean(axis=1)

    forcing_hat = forcing_mean = None
    if force is not None:
        if force.values.shape != ic.values.shape:
            raise ShapeError(f"force shape {force.values.shape} differs from ic {ic.values.shape}")
        forcing_hat = grid.curl_hat(force.values[0], force.values[1])
        forcing_mean = force.values.reshape(2, -1).mean(axis=1)

    if forcing_hat is not None and force_duration:
        logger.debug("N-S warm-up: force active for %.3g s", force_duration)
        omega_hat, mean = _ns_advance(grid, omega_hat, mean, mu, force_duration, forcing_hat, forcing_mean)
        forcing_hat = forcing_mean = None

    frames = np.empty((steps + 1, 2) + ic.dims)
    frames[0] = np.stack(grid.velocity(omega_hat, mean))
    for step in range(1, steps + 1):
        omega_hat, mean = _ns_advance(grid, omega_hat, mean, mu, dt, forcing_hat, forcing_mean)
        frames[step] = np.stack(grid.velocity(omega_hat, mean))
        if not np.all(np.isfinite(frames[step])):
            raise NumericalError(f"N-S solution became non-finite at step {step}")
    return Trajectory(frames, dx=ic.dx, dt=dt, equation="ns", parameter=mu, origin=ic.origin)


# --------------------------------------------------------------------------
# Data generation
# --------------------------------------------------------------------------

EQUATIONS = ("burgers", "burgers2d", "wave", "ns")


def generate_trajectory(equation: str, parameter: float, points: int, dt: float, steps: int,
                        seed: SeedLike) -> Trajectory:
    """
    One random trajectory of the named equation.

    burgers     1-D random trig initial condition
    burgers2d   2-D velocity drawn from the random force basis
    wave        2-D pressure drawn from the random force basis, at rest
    ns          fluid at rest driven by a random force for 0.05 s, then free decay
    """
    if equation == "burgers":
        dx, origin = periodic_grid(points, 1)
        return solve_burgers(random_ic_1d(seed, (points,), dx, origin=origin), parameter, dt, steps)
    dx, origin = periodic_grid(points, 2)
    if equation == "burgers2d":
        ic = random_force_2d(seed, (points, points), dx, channels=2, origin=origin)
        return solve_burgers(ic, parameter, dt, steps)
    if equation == "wave":
        ic = random_force_2d(seed, (points, points), dx, channels=1, origin=origin)
        return solve_wave(ic, parameter, dt, steps)
    if equation == "ns":
        force = random_force_2d(seed, (points, points), dx, channels=2, origin=origin)
        rest = GridField.zeros(2, (points, points), dx=dx, origin=origin)
        return solve_ns_periodic(rest, parameter, dt, steps, force=force, force_duration=FORCE_DURATION)
    raise ConfigError(f"unknown equation '{equation}' (choose from {', '.join(EQUATIONS)})")
