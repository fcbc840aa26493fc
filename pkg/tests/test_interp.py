import numpy as np
import pytest

from agnoctl.interp import multilinear


def test_exact_at_nodes():
    axes = [np.array([0.0, 1.0, 2.0]), np.array([-1.0, 0.0, 1.0])]
    vals = np.arange(9.0).reshape(3, 3)
    for i, x in enumerate(axes[0]):
        for j, y in enumerate(axes[1]):
            assert multilinear(axes, vals, [x, y]) == pytest.approx(vals[i, j])


def test_reproduces_multilinear_function():
    # f(x, y) = 2 + 3x - y + 0.5 x y is multilinear, so interpolation is exact
    ax = [np.linspace(0.0, 2.0, 5), np.linspace(-1.0, 1.0, 4)]
    X, Y = np.meshgrid(*ax, indexing="ij")
    f = lambda x, y: 2.0 + 3.0 * x - y + 0.5 * x * y
    vals = f(X, Y)
    rng = np.random.default_rng(0)
    xs = rng.uniform(0.0, 2.0, 50)
    ys = rng.uniform(-1.0, 1.0, 50)
    np.testing.assert_allclose(multilinear(ax, vals, [xs, ys]), f(xs, ys), atol=1e-12)


def test_constant_extrapolation_outside_domain():
    ax = [np.array([0.0, 1.0])]
    vals = np.array([5.0, 7.0])
    assert multilinear(ax, vals, [np.array(-3.0)]) == pytest.approx(5.0)
    assert multilinear(ax, vals, [np.array(10.0)]) == pytest.approx(7.0)


def test_singleton_axis():
    ax = [np.array([0.5]), np.array([0.0, 1.0])]
    vals = np.array([[1.0, 3.0]])
    assert multilinear(ax, vals, [0.5, 0.5]) == pytest.approx(2.0)
    assert multilinear(ax, vals, [99.0, 1.0]) == pytest.approx(3.0)


def test_broadcasting():
    ax = [np.array([0.0, 1.0]), np.array([0.0, 1.0])]
    vals = np.array([[0.0, 1.0], [2.0, 3.0]])
    xs = np.array([0.0, 1.0, 0.5])
    out = multilinear(ax, vals, [xs, 0.0])
    np.testing.assert_allclose(out, [0.0, 2.0, 1.0])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        multilinear([np.array([0.0, 1.0])], np.zeros((2, 2)), [0.5])
    with pytest.raises(ValueError):
        multilinear([np.array([0.0, 1.0]), np.array([0.0, 1.0])], np.zeros((2, 2)), [0.5])
