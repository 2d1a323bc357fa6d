import math

import numpy as np
import pytest

from lno.augment import AugmentTransform, augment
from lno.errors import ConfigError, ShapeError
from lno.solvers import (
    FieldKind, RandomFieldSpec, generate_trajectory, ic_1d_from_coefficients, periodic_grid,
    random_force_2d, random_ic_1d, solve_burgers, solve_ns_periodic, solve_wave,
    spectral_divergence, wave_energy,
)
from lno.tensor import GridField


def _grid_1d(points):
    dx, origin = periodic_grid(points, 1)
    return dx, origin, origin[0] + dx * np.arange(points)


def test_random_force_is_seeded():
    dx, origin = periodic_grid(16, 2)
    a = random_force_2d(7, (16, 16), dx, origin=origin)
    b = random_force_2d(7, (16, 16), dx, origin=origin)
    c = random_force_2d(8, (16, 16), dx, origin=origin)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert a.values.shape == (2, 16, 16)
    spec = RandomFieldSpec(seed=7, kind=FieldKind.FORCE_2D, channels=2)
    np.testing.assert_array_equal(spec.generate((16, 16), dx, origin).values, a.values)


def test_random_force_basis():
    dx, origin = periodic_grid(8, 2)
    coefficients = np.zeros((1, 4, 4))
    coefficients[0, 0, 0] = 1.0
    coefficients[0, 3, 2] = 2.0
    field = random_force_2d(None, (8, 8), dx, channels=1, origin=origin, coefficients=coefficients)
    x = -1 + dx * np.arange(8)
    expected = (np.sin(np.pi * x)[:, None] * np.sin(np.pi * x)[None, :]
                + 2.0 * np.cos(2 * np.pi * x)[:, None] * np.cos(np.pi * x)[None, :])
    np.testing.assert_allclose(field.values[0], expected, atol=1e-14)


def test_random_ic_1d_basis():
    dx, origin, x = _grid_1d(16)
    field = random_ic_1d(None, (16,), dx, origin=origin, coefficients=[[0.0, 1.0, 0.5, 0.0]])
    np.testing.assert_allclose(field.values[0], np.sin(2 * np.pi * x) + 0.5 * np.cos(np.pi * x), atol=1e-14)
    np.testing.assert_allclose(ic_1d_from_coefficients([1, 0, 0, 0], 0.5), 1.0)
    with pytest.raises(ShapeError):
        random_ic_1d(0, (4, 4), dx)


def test_burgers_1d_conserves_mean():
    dx, origin, x = _grid_1d(32)
    ic = GridField((0.5 + np.sin(np.pi * x))[None], dx=dx, origin=origin)
    trajectory = solve_burgers(ic, mu=0.05, dt=0.01, steps=20)
    assert trajectory.values.shape == (21, 1, 32)
    assert trajectory.equation == "burgers"
    sums = trajectory.values.sum(axis=(1, 2))
    assert np.max(np.abs(sums - sums[0])) < 1e-8
    assert np.max(np.abs(np.diff(sums)) / np.abs(sums[:-1])) < 1e-6


def test_burgers_1d_maximum_decays():
    dx, origin, x = _grid_1d(64)
    ic = GridField(np.sin(np.pi * x)[None], dx=dx, origin=origin)
    trajectory = solve_burgers(ic, mu=0.1, dt=0.02, steps=25)
    peaks = np.max(np.abs(trajectory.values), axis=(1, 2))
    assert np.all(np.diff(peaks) <= 1e-10)
    assert peaks[-1] < peaks[0]


def test_burgers_crank_nicolson_self_convergence():
    solutions = []
    for points, dt in [(32, 0.02), (64, 0.01), (128, 0.005)]:
        dx, origin, x = _grid_1d(points)
        ic = GridField((0.5 * np.sin(np.pi * x))[None], dx=dx, origin=origin)
        steps = int(round(0.2 / dt))
        solutions.append(solve_burgers(ic, mu=0.1, dt=dt, steps=steps, theta=0.5).values[-1, 0])
    coarse = np.linalg.norm(solutions[0] - solutions[1][::2])
    fine = np.linalg.norm(solutions[1][::2] - solutions[2][::4])
    assert math.log2(coarse / fine) >= 1.8


def _sine_burgers(points, dt, theta):
    dx, origin, x = _grid_1d(points)
    ic = GridField(np.sin(np.pi * x)[None], dx=dx, origin=origin)
    return solve_burgers(ic, mu=0.01, dt=dt, steps=int(round(1.0 / dt)), theta=theta).values[-1, 0]


def _difference_to_finer_run(points, theta):
    coarse = _sine_burgers(points, 0.05, theta)
    fine = _sine_burgers(4 * points, 0.0125, theta)[::4]
    return np.linalg.norm(coarse - fine) / np.linalg.norm(fine)


@pytest.mark.slow
def test_burgers_steep_front_against_finer_run():
    # mu = 0.01 steepens sin(pi x) into a front of width ~0.01 by t = 1
    implicit_euler = _difference_to_finer_run(128, theta=1.0)
    crank_nicolson = {points: _difference_to_finer_run(points, theta=0.5) for points in (64, 128)}
    assert implicit_euler < 3e-2
    assert crank_nicolson[128] < 5e-3
    assert crank_nicolson[128] < 0.5 * crank_nicolson[64]
    assert crank_nicolson[128] < implicit_euler


def test_burgers_2d_commutes_with_rotation():
    dx, origin = periodic_grid(16, 2)
    force = random_force_2d(3, (16, 16), dx, channels=2, origin=origin)
    ic = GridField(0.1 * force.values, dx=dx, origin=origin)
    evolved = solve_burgers(ic, mu=0.05, dt=0.01, steps=5)
    last = GridField(evolved.values[-1], dx=dx, origin=origin)
    for transform in (AugmentTransform.ROT90, AugmentTransform.ROT180, AugmentTransform.FLIP_DIAG):
        rotated = solve_burgers(augment(ic, transform), mu=0.05, dt=0.01, steps=5)
        np.testing.assert_allclose(rotated.values[-1], augment(last, transform).values, atol=1e-8)


def test_burgers_rejects_bad_input():
    dx, origin, x = _grid_1d(16)
    ic = GridField(np.sin(np.pi * x)[None], dx=dx, origin=origin)
    with pytest.raises(ConfigError):
        solve_burgers(ic, mu=0.0, dt=0.01, steps=1)
    with pytest.raises(ConfigError):
        solve_burgers(ic, mu=0.1, dt=0.01, steps=1, theta=0.3)
    with pytest.raises(ShapeError):
        solve_burgers(GridField(np.zeros((2, 16))), mu=0.1, dt=0.01, steps=1)


def test_wave_energy_is_conserved():
    dx, origin = periodic_grid(32, 2)
    ic = random_force_2d(5, (32, 32), dx, channels=1, origin=origin)
    trajectory = solve_wave(ic, speed=1.0, dt=0.05, steps=100)
    assert trajectory.values.shape == (101, 2, 32, 32)
    assert np.all(trajectory.values[0, 1] == 0.0)
    energies = np.array([wave_energy(f[0], f[1], 1.0, dx) for f in trajectory.values])
    assert np.max(np.abs(energies - energies[0])) / energies[0] < 1e-8
    # the state actually moves
    assert np.max(np.abs(trajectory.values[-1, 0] - trajectory.values[0, 0])) > 1e-2


def test_wave_self_convergence():
    solutions = []
    for points, dt in [(32, 0.04), (64, 0.02), (128, 0.01)]:
        dx, origin, x = _grid_1d(points)
        ic = GridField((np.sin(np.pi * x) + 0.5 * np.cos(2 * np.pi * x))[None], dx=dx, origin=origin)
        solutions.append(solve_wave(ic, speed=1.0, dt=dt, steps=int(round(0.4 / dt))).values[-1, 0])
    coarse = np.linalg.norm(solutions[0] - solutions[1][::2])
    fine = np.linalg.norm(solutions[1][::2] - solutions[2][::4])
    assert math.log2(coarse / fine) >= 1.8


def test_wave_single_mode_follows_scalar_recurrence():
    points, speed, dt, steps = 16, 1.0, 0.1, 30
    dx, origin = periodic_grid(points, 2)
    x = origin[0] + dx * np.arange(points)
    mode = np.cos(np.pi * x)[:, None] * np.cos(np.pi * x)[None, :]
    trajectory = solve_wave(GridField(mode[None], dx=dx, origin=origin), speed=speed, dt=dt, steps=steps)

    # the mode is an eigenvector of the 5-point Laplacian; average acceleration
    # turns each step into a rotation by theta with tan(theta / 2) = omega dt / 2
    omega = speed * math.sqrt(2.0 * (2.0 - 2.0 * math.cos(math.pi * dx))) / dx
    theta = 2.0 * math.atan(0.5 * omega * dt)
    n = np.arange(steps + 1)
    np.testing.assert_allclose(trajectory.values[:, 0], np.cos(n * theta)[:, None, None] * mode, atol=1e-10)
    np.testing.assert_allclose(trajectory.values[:, 1], -omega * np.sin(n * theta)[:, None, None] * mode,
                               atol=1e-10)


def test_wave_rejects_vector_ic():
    with pytest.raises(ShapeError):
        solve_wave(GridField(np.zeros((2, 8, 8))), speed=1.0, dt=0.1, steps=1)


def _taylor_green(points):
    dx, origin = periodic_grid(points, 2)
    x = origin[0] + dx * np.arange(points)
    xx, yy = np.meshgrid(x, x, indexing='ij')
    u = np.sin(np.pi * xx) * np.cos(np.pi * yy)
    v = -np.cos(np.pi * xx) * np.sin(np.pi * yy)
    return GridField(np.stack([u, v]), dx=dx, origin=origin)


def test_taylor_green_decay():
    ic = _taylor_green(32)
    trajectory = solve_ns_periodic(ic, mu=0.01, dt=0.05, steps=20)
    ratio = np.max(np.abs(trajectory.values[-1])) / np.max(np.abs(trajectory.values[0]))
    assert ratio == pytest.approx(math.exp(-2 * 0.01 * math.pi ** 2), rel=1e-3)
    assert ratio == pytest.approx(0.8209, abs=1e-4)
    for frame in trajectory.values[::5]:
        assert np.max(np.abs(spectral_divergence(frame))) < 1e-10


def test_ns_keeps_mean_flow():
    ic = _taylor_green(16)
    shifted = GridField(ic.values + np.array([1.0, 0.5])[:, None, None], dx=ic.dx, origin=ic.origin)
    trajectory = solve_ns_periodic(shifted, mu=0.01, dt=0.05, steps=4)
    np.testing.assert_allclose(trajectory.values[-1].mean(axis=(1, 2)), [1.0, 0.5], atol=1e-12)


def test_ns_forced_warm_up():
    dx, origin = periodic_grid(16, 2)
    force = random_force_2d(0, (16, 16), dx, channels=2, origin=origin)
    rest = GridField.zeros(2, (16, 16), dx=dx, origin=origin)
    trajectory = solve_ns_periodic(rest, mu=0.01, dt=0.05, steps=3, force=force, force_duration=0.05)
    assert np.all(np.isfinite(trajectory.values))
    assert np.max(np.abs(trajectory.values[0])) > 1e-3
    for frame in trajectory.values:
        assert np.max(np.abs(spectral_divergence(frame))) < 1e-10
    # unforced after the warm-up, so the flow only decays
    energy = np.sum(trajectory.values ** 2, axis=(1, 2, 3))
    assert energy[-1] < energy[0]


def test_generate_trajectory():
    trajectory = generate_trajectory("burgers", 0.05, 16, 0.05, 2, seed=1)
    assert trajectory.values.shape == (3, 1, 16)
    assert trajectory.origin == (-1.0,)
    wave = generate_trajectory("wave", 1.0, 8, 0.05, 2, seed=np.random.SeedSequence(4))
    assert wave.values.shape == (3, 2, 8, 8)
    with pytest.raises(ConfigError, match="unknown equation"):
        generate_trajectory("heat", 0.1, 8, 0.05, 1, seed=0)
