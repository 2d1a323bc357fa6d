import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lno.errors import ConfigError
from lno.legendre import (
    SpectralLayer, legendre_closed_form, legendre_eval, lgl_rule, make_kernels,
    make_kernels_1d, spectral_forward,
)
from lno.tables import TABLE_TOLERANCE, has_table, table_deviation
from lno.tensor import GridField, WeightTensor


@pytest.mark.parametrize("m", range(9))
def test_recurrence_matches_closed_form(m):
    x = np.linspace(-1, 1, 41)
    np.testing.assert_allclose(legendre_eval(m, x), legendre_closed_form(m, x), atol=1e-12)


def test_lgl_three_nodes():
    rule = lgl_rule(3)
    np.testing.assert_allclose(rule.nodes, [-1.0, 0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(rule.weights, [1 / 3, 4 / 3, 1 / 3], atol=1e-14)


@pytest.mark.parametrize("order", [4, 7, 12, 24])
def test_lgl_exact_up_to_degree_2n_minus_3(order):
    rule = lgl_rule(order)
    assert rule.nodes[0] == -1.0 and rule.nodes[-1] == 1.0
    assert np.all(np.diff(rule.nodes) > 0)
    for degree in range(2 * order - 2):
        exact = 0.0 if degree % 2 else 2.0 / (degree + 1)
        assert rule.integrate(rule.nodes ** degree) == pytest.approx(exact, abs=1e-12)


@pytest.mark.parametrize("window", [12, 18, 24])
def test_kernels_match_reference_tables(window):
    assert has_table(window, 8)
    kernels = make_kernels_1d(window, 8)
    assert table_deviation(window, kernels.phi, kernels.psi) < TABLE_TOLERANCE


def test_smallest_kernels():
    kernels = make_kernels_1d(2, 2)
    assert kernels.phi.shape == (2, 2)
    np.testing.assert_allclose(kernels.psi[0], [1.0, 1.0])
    np.testing.assert_allclose(kernels.psi[1], [-1.0, 1.0])
    np.testing.assert_allclose(kernels.phi @ np.array([3.0, 5.0]), [4.0, 1.0], atol=1e-14)


def test_kernel_arrays_are_read_only():
    kernels = make_kernels(12, 6, 2)
    assert kernels.phi.shape == (36, 12, 12)
    with pytest.raises(ValueError):
        kernels.phi[0, 0, 0] = 1.0


def test_invalid_sizes():
    with pytest.raises(ConfigError):
        make_kernels_1d(6, 7)
    with pytest.raises(ConfigError):
        make_kernels(6, 2, 3)


def _identity_layer(window, modes, d, channels, k=2):
    kernels = make_kernels(window, modes, d)
    mix = np.broadcast_to(np.eye(kernels.mode_count), (channels,) + (kernels.mode_count,) * 2).copy()
    return SpectralLayer(kernels, WeightTensor(mix), k)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_identity_mix_preserves_affine_1d(a, b):
    layer = _identity_layer(12, 6, 1, channels=2)
    i = np.arange(36.0)
    values = np.stack([np.full(36, a), a + b * i / 36])
    out = spectral_forward(layer, GridField(values))
    assert out.dims == (24,)
    np.testing.assert_allclose(out.values[0], a, atol=1e-10)
    np.testing.assert_allclose(out.values[1], values[1, 6:30], atol=1e-8)


def test_identity_mix_preserves_affine_2d():
    layer = _identity_layer(8, 3, 2, channels=1)
    i, j = np.meshgrid(np.arange(16.0), np.arange(16.0), indexing='ij')
    values = (0.2 + 0.05 * i - 0.03 * j)[None]
    out = spectral_forward(layer, GridField(values, dx=0.1))
    assert out.dims == (8, 8)
    np.testing.assert_allclose(out.values, values[:, 4:12, 4:12], atol=1e-8)
    assert out.origin == pytest.approx((0.4, 0.4))


def test_layer_rejects_bad_mix_shape():
    kernels = make_kernels(8, 3, 1)
    with pytest.raises(ConfigError):
        SpectralLayer(kernels, WeightTensor(np.zeros((2, 3, 2))), 2)
    with pytest.raises(ConfigError):
        SpectralLayer(kernels, WeightTensor(np.zeros((2, 3, 3))), 3)


def test_2d_kernels_are_outer_products():
    base = make_kernels_1d(8, 4)
    kernels = make_kernels(8, 4, 2)
    for p in range(4):
        for q in range(4):
            np.testing.assert_allclose(kernels.phi[p * 4 + q], np.outer(base.phi[p], base.phi[q]), atol=1e-12)
            np.testing.assert_allclose(kernels.psi[p * 4 + q], np.outer(base.psi[p], base.psi[q]), atol=1e-12)


def test_bilinear_field_has_single_coefficient():
    kernels = make_kernels(12, 4, 2)
    x = -1.0 + 2.0 * np.arange(12) / 11
    coefficients = np.tensordot(kernels.phi, np.outer(x, x), axes=([1, 2], [0, 1]))
    expected = np.zeros(16)
    expected[1 * 4 + 1] = 1.0
    np.testing.assert_allclose(coefficients, expected, atol=1e-10)


def test_decomposition_inverts_linear_reconstruction():
    kernels = make_kernels_1d(12, 8)
    pairing = kernels.phi @ kernels.psi.T
    # linear psi rows are interpolated exactly, so their columns are exact
    np.testing.assert_allclose(pairing[:, :2], np.eye(8)[:, :2], atol=1e-10)


@pytest.mark.parametrize("d, window, modes, dims, shift", [
    (1, 12, 6, (36,), (6,)),
    (2, 8, 3, (24, 24), (4, 8)),
])
def test_spectral_forward_commutes_with_window_shift(rng, d, window, modes, dims, shift):
    kernels = make_kernels(window, modes, d)
    layer = SpectralLayer(kernels, WeightTensor(rng.standard_normal((2, kernels.mode_count, kernels.mode_count))), 2)
    values = rng.standard_normal((2,) + tuple(n + s for n, s in zip(dims, shift)))
    head = tuple(slice(0, n) for n in dims)
    tail = tuple(slice(s, n + s) for n, s in zip(dims, shift))
    first = spectral_forward(layer, GridField(values[(slice(None),) + head])).values
    moved = spectral_forward(layer, GridField(values[(slice(None),) + tail])).values
    overlap_first = tuple(slice(s, None) for s in shift)
    overlap_moved = tuple(slice(0, n - s) for n, s in zip(first.shape[1:], shift))
    np.testing.assert_allclose(moved[(slice(None),) + overlap_moved], first[(slice(None),) + overlap_first],
                               atol=1e-12)
