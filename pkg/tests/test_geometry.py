import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from msgas import geometry as geo


def tensors(n):
    return arrays(float, (n, n), elements=st.floats(-0.3, 0.3)).map(lambda a: np.eye(n) + a)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([2, 3]).flatmap(tensors))
def test_cofactor_identity(X):
    n = X.shape[0]
    J = geo.jacobian(X)
    A = geo.cofactor(X)
    assert J == pytest.approx(np.linalg.det(X), abs=1e-14)
    np.testing.assert_allclose(A @ X.T, J * np.eye(n), atol=1e-13)
    np.testing.assert_allclose(geo.inverse_gradient(X, J), np.linalg.inv(X), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([2, 3]).flatmap(tensors), st.integers(0, 2**32 - 1))
def test_cofactor_derivative_is_exact_directional_derivative(X, seed):
    n = X.shape[0]
    dX = np.random.default_rng(seed).uniform(-1, 1, (n, n))
    h = 1e-30
    cs = np.imag(geo.cofactor(X + 1j * h * dX)) / h
    np.testing.assert_allclose(geo.cofactor_derivative(X, dX), cs, atol=1e-13)


def test_jacobian_derivative_is_cofactor():
    X = np.eye(3) + 0.2 * np.random.default_rng(0).uniform(-1, 1, (3, 3))
    A = geo.cofactor(X)
    for i in range(3):
        for j in range(3):
            dX = np.zeros((3, 3))
            dX[i, j] = 1.0
            cs = np.imag(geo.jacobian(X + 1e-30j * dX)) / 1e-30
            assert cs == pytest.approx(A[i, j], abs=1e-14)


@pytest.mark.parametrize("order, expected", [(2, 4.0), (4, 16.0)])
def test_periodic_difference_order(order, expected):
    errs = []
    for N in (16, 32, 64):
        h = 1.0 / N
        m = np.arange(N) * h
        f = np.sin(2 * np.pi * m) + 0.3 * np.cos(4 * np.pi * m)
        exact = 2 * np.pi * np.cos(2 * np.pi * m) - 1.2 * np.pi * np.sin(4 * np.pi * m)
        errs.append(np.max(np.abs(geo.periodic_difference(f, 0, h, order) - exact)))
    for a, b in zip(errs, errs[1:]):
        assert 0.75 * expected <= a / b <= 1.25 * expected


def test_periodic_difference_kills_constants_and_rejects_order():
    f = np.full(16, 3.7)
    assert np.all(geo.periodic_difference(f, 0, 0.1, 4) == 0.0)
    with pytest.raises(ValueError):
        geo.periodic_difference(f, 0, 0.1, 6)


def test_grid_validation():
    with pytest.raises(ValueError):
        geo.LabelGrid((8, 8, 8, 8), (0.1,) * 4)
    with pytest.raises(ValueError):
        geo.LabelGrid((4, 8), (0.1, 0.1))
    with pytest.raises(ValueError):
        geo.LabelGrid((8, 8), (0.1, -0.1))
    with pytest.raises(ValueError):
        geo.LabelGrid((8, 8), (0.1, 0.1), fd_order=3)
    g = geo.LabelGrid.uniform(2, 16, length=2.0)
    assert g.lengths == (2.0, 2.0)
    assert g.cell_volume == pytest.approx(1.0 / 64)
    assert g.total_volume == pytest.approx(4.0)


def test_piola_divergence_vanishes_in_two_dimensions():
    grid = geo.LabelGrid.uniform(2, 32)
    rng = np.random.default_rng(1)
    disp = 0.05 * rng.standard_normal((2, 32, 32))
    A = geo.cofactor(geo.deformation_gradient(grid, disp))
    assert np.max(np.abs(geo.piola_divergence(grid, A))) < 1e-10


def test_eulerian_gradient_on_mapped_grid():
    """Gradient of a function of position, pulled back through a non-trivial map."""
    errs = []
    for N in (16, 32):
        grid = geo.LabelGrid.uniform(2, N)
        m = grid.coords * 2 * np.pi
        disp = 0.03 * np.stack([np.sin(m[1]), np.cos(m[0])])
        x = grid.coords + disp
        xg = geo.deformation_gradient(grid, disp)
        y = geo.inverse_gradient(xg, geo.jacobian(xg))
        k = 2 * np.pi
        f = np.sin(k * x[0]) * np.cos(k * x[1])
        exact = np.stack([k * np.cos(k * x[0]) * np.cos(k * x[1]), -k * np.sin(k * x[0]) * np.sin(k * x[1])])
        errs.append(np.max(np.abs(geo.eulerian_gradient(grid, f, y) - exact)))
    assert errs[0] / errs[1] > 12


def test_singular_map_reports_indices():
    xg = np.zeros((2, 2, 8, 8))
    xg[0, 0] = xg[1, 1] = 1.0
    xg[0, 0, 3, 5] = -0.5
    with pytest.raises(geo.SingularMapError) as info:
        geo.check_jacobian(geo.jacobian(xg))
    assert info.value.indices.tolist() == [[3, 5]]
    assert "(3, 5)" in str(info.value)
    assert info.value.min_J == -0.5


def test_cross_and_curl():
    a = np.array([1.0, 0.0, 0.0])
    b = np.array([0.0, 1.0, 0.0])
    np.testing.assert_array_equal(geo.cross(a, b), [0.0, 0.0, 1.0])
    assert geo.cross(a[:2], b[:2]) == 1.0
    G = np.array([[0.0, -1.0], [1.0, 0.0]])  # solid-body rotation
    assert geo.curl_from_gradient(G) == 2.0
