"""
Legendre machinery and the windowed spectral layer.

The spectral path of a block decomposes every window of N points into M
Legendre modes (per axis), mixes the modes per channel with a learnable
matrix, and scatters the mixed modes back. Windows advance by s = N / k points
so each interior point is covered by k windows per axis.

Kernel construction:
    - window points are N equidistant points on [-1, 1] including both ends
    - values are linearly interpolated onto the N Legendre-Gauss-Lobatto nodes
    - mode m is extracted with the LGL rule and normalized by the discrete
      norm of L_m
    - reconstruction evaluates L_m at the equidistant window points
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Optional

import numpy as np

from .errors import ConfigError, NumericalError
from .tensor import GridField, Tape, WeightTensor, conv_forward, deconv_forward, mix_forward

logger = logging.getLogger(__name__)


def legendre_eval(m: int, x):
    """
    Legendre polynomial L_m(x) by Bonnet's recurrence.

    Args:
        m: mode index >= 0
        x: scalar or array in [-1, 1]

    Returns:
        L_m(x) with the shape of x
    """
    if m < 0:
        raise ValueError(f"Legendre mode must be >= 0, got {m}")
    x = np.asarray(x, dtype=np.float64)
    previous = np.ones_like(x)
    if m == 0:
        return previous if previous.ndim else float(previous)
    current = x.copy()
    for n in range(1, m):
        previous, current = current, ((2 * n + 1) * x * current - n * previous) / (n + 1)
    return current if current.ndim else float(current)


def legendre_closed_form(m: int, x):
    """L_m(x) from the explicit power sum (reference for the recurrence)"""
    x = np.asarray(x, dtype=np.float64)
    total = np.zeros_like(x)
    for j in range(m // 2 + 1):
        total = total + (-1) ** j * comb(m, j) * comb(2 * m - 2 * j, m) * x ** (m - 2 * j)
    total = total / 2.0 ** m
    return total if total.ndim else float(total)


@dataclass(frozen=True)
class LglRule:
    """Legendre-Gauss-Lobatto quadrature of order N on [-1, 1]"""
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values: np.ndarray) -> float:
        """Quadrature of a function sampled at the nodes"""
        return float(np.dot(self.weights, values))


@lru_cache(maxsize=None)
def lgl_rule(order: int, tolerance: float = 1e-14, max_iterations: int = 100) -> LglRule:
    """
    LGL nodes and weights.

    Nodes are the zeros of (1 - x^2) L'_{N-1}(x), found by Newton iteration on
    all nodes at once, starting from the Chebyshev-Gauss-Lobatto points.
    Weights are 2 / (N (N-1) L_{N-1}(x_k)^2).
    """
    if order < 2:
        raise ValueError(f"LGL rule needs at least 2 nodes, got {order}")
    n = order - 1
    x = -np.cos(np.pi * np.arange(order) / n)
    table = np.zeros((order, order))

    def fill_table(points):
        table[:, 0] = 1.0
        table[:, 1] = points
        for k in range(2, order):
            table[:, k] = ((2 * k - 1) * points * table[:, k - 1] - (k - 1) * table[:, k - 2]) / k

    for iteration in range(max_iterations):
        fill_table(x)
        previous = x
        x = previous - (previous * table[:, n] - table[:, n - 1]) / (order * table[:, n])
        if np.max(np.abs(x - previous)) < tolerance:
            break
    else:
        raise NumericalError(f"LGL Newton iteration did not converge for N={order}")

    x[0], x[-1] = -1.0, 1.0
    fill_table(x)
    weights = 2.0 / (n * order * table[:, n] ** 2)
    logger.debug("LGL rule N=%d converged in %d iterations", order, iteration + 1)
    x.setflags(write=False)
    weights.setflags(write=False)
    return LglRule(order=order, nodes=x, weights=weights)


def window_points(window: int) -> np.ndarray:
    """Equidistant reference coordinates of the window, endpoints included"""
    return -1.0 + 2.0 * np.arange(window) / (window - 1)


def interpolation_matrix(window: int) -> np.ndarray:
    """a[k, i]: weight of window point i in the linear interpolant at LGL node k"""
    nodes = lgl_rule(window).nodes
    points = window_points(window)
    eye = np.eye(window)
    return np.stack([np.interp(nodes, points, eye[i]) for i in range(window)], axis=1)


@dataclass(frozen=True)
class SpectralKernels:
    """
    Decomposition (phi) and reconstruction (psi) kernels.

    Shapes are (M^d, N) in 1-D and (M^d, N, N) in 2-D; 2-D mode index is
    m = p * M + q with p along axis 0 and q along axis 1.
    """
    window: int
    modes: int
    d: int
    phi: np.ndarray
    psi: np.ndarray

    @property
    def mode_count(self) -> int:
        return self.modes ** self.d

    def decomposition_kernel(self) -> WeightTensor:
        """phi as a frozen conv kernel (M^d, 1, taps)"""
        return WeightTensor(self.phi[:, None], requires_grad=False, name="phi")

    def reconstruction_kernel(self) -> WeightTensor:
        """psi as a frozen deconv kernel (M^d, 1, taps)"""
        return WeightTensor(self.psi[:, None], requires_grad=False, name="psi")


def _check_sizes(window: int, modes: int) -> None:
    if window < 2:
        raise ConfigError(f"window N must be >= 2, got {window}")
    if not 1 <= modes <= window:
        raise ConfigError(f"modes M must satisfy 1 <= M <= N, got M={modes}, N={window}")


@lru_cache(maxsize=None)
def make_kernels_1d(window: int, modes: int) -> SpectralKernels:
    """Normalized Legendre kernels for one axis"""
    _check_sizes(window, modes)
    rule = lgl_rule(window)
    a = interpolation_matrix(window)
    points = window_points(window)
    phi = np.empty((modes, window))
    psi = np.empty((modes, window))
    for m in range(modes):
        at_nodes = rule.weights * legendre_eval(m, rule.nodes)
        phi[m] = (at_nodes @ a) / np.dot(at_nodes, legendre_eval(m, rule.nodes))
        psi[m] = legendre_eval(m, points)
    phi.setflags(write=False)
    psi.setflags(write=False)
    return SpectralKernels(window=window, modes=modes, d=1, phi=phi, psi=psi)


@lru_cache(maxsize=None)
def make_kernels_2d(window: int, modes: int) -> SpectralKernels:
    """Tensor-product kernels, mode m = p * M + q"""
    base = make_kernels_1d(window, modes)
    phi = np.einsum('pi,qj->pqij', base.phi, base.phi).reshape(modes * modes, window, window)
    psi = np.einsum('pi,qj->pqij', base.psi, base.psi).reshape(modes * modes, window, window)
    phi.setflags(write=False)
    psi.setflags(write=False)
    return SpectralKernels(window=window, modes=modes, d=2, phi=phi, psi=psi)


def make_kernels(window: int, modes: int, d: int) -> SpectralKernels:
    if d == 1:
        return make_kernels_1d(window, modes)
    if d == 2:
        return make_kernels_2d(window, modes)
    raise ConfigError(f"Only 1-D and 2-D kernels are supported, got d={d}")


@dataclass
class SpectralLayer:
    """
    Windowed Legendre transform -> per-channel mode mixing -> reconstruction.

    Args:
        kernels: shared phi/psi pair
        mix: weight of shape (channels, M^d, M^d)
        repetitions: windows covering each point per axis (k); stride = N / k
    """
    kernels: SpectralKernels
    mix: WeightTensor
    repetitions: int

    def __post_init__(self):
        if self.repetitions < 1 or self.kernels.window % self.repetitions:
            raise ConfigError(
                f"repetitions k={self.repetitions} must divide the window N={self.kernels.window}"
            )
        expected = self.kernels.mode_count
        if self.mix.values.ndim != 3 or self.mix.shape[1:] != (expected, expected):
            raise ConfigError(f"mix weight must have shape (channels, {expected}, {expected}), "
                              f"got {self.mix.shape}")
        self._phi = self.kernels.decomposition_kernel()
        self._psi = self.kernels.reconstruction_kernel()

    @property
    def stride(self) -> int:
        return self.kernels.window // self.repetitions

    @property
    def channels(self) -> int:
        return self.mix.shape[0]

    @property
    def corrosion(self) -> int:
        """Points lost per side: (k - 1) * s"""
        return (self.repetitions - 1) * self.stride


def spectral_forward(layer: SpectralLayer, input: GridField, tape: Optional[Tape] = None) -> GridField:
    """
    Apply the spectral layer.

    Requires (dim - N) divisible by the stride on every axis; the output loses
    ``layer.corrosion`` points on each side of every axis.
    """
    coefficients = conv_forward(input, layer._phi, stride=layer.stride, groups=layer.channels, tape=tape)
    mixed = mix_forward(coefficients, layer.mix, tape=tape)
    return deconv_forward(mixed, layer._psi, stride=layer.stride, overlap=layer.repetitions,
                          groups=layer.channels, tape=tape)
