import numpy as np
import pytest

from aeif.pca import PcaModel, fit_pca, inverse_transform_pca, transform_pca


def line_data():
    # Points on the direction (1, 1, 0) with a little spread along (0, 0, 1).
    t = np.linspace(-3, 3, 61)
    return np.column_stack([t, t, 0.01 * np.cos(7 * t)])


def test_leading_direction():
    m = fit_pca(line_data(), n_components=1)
    np.testing.assert_allclose(m.components[0], [1 / np.sqrt(2), 1 / np.sqrt(2), 0.0], atol=1e-6)


def test_sign_rule():
    m = fit_pca(-line_data(), n_components=2)
    pivot = np.argmax(np.abs(m.components), axis=1)
    assert np.all(m.components[np.arange(2), pivot] > 0)


def test_orthonormal_and_sorted():
    x = np.random.default_rng(0).normal(size=(300, 6)) * [5, 4, 3, 2, 1, 0.5]
    m = fit_pca(x, n_components=4)
    np.testing.assert_allclose(m.components @ m.components.T, np.eye(4), atol=1e-12)
    assert np.all(np.diff(m.explained_variance) <= 0)


def test_population_variance():
    x = np.random.default_rng(1).normal(size=(50, 3))
    m = fit_pca(x, n_components=3)
    np.testing.assert_allclose(m.explained_variance.sum(), x.var(axis=0).sum(), rtol=1e-12)


def test_full_rank_round_trip():
    x = np.random.default_rng(2).normal(size=(40, 5))
    m = fit_pca(x, n_components=5)
    np.testing.assert_allclose(inverse_transform_pca(m, transform_pca(m, x)), x, atol=1e-10)


def test_projection_is_centered():
    x = np.random.default_rng(3).normal(3.0, 1.0, size=(80, 4))
    y = transform_pca(fit_pca(x, 2), x)
    np.testing.assert_allclose(y.mean(axis=0), 0.0, atol=1e-12)


def test_variance_coverage():
    x = np.random.default_rng(4).normal(size=(500, 4)) * [10, 1, 0.1, 0.1]
    assert fit_pca(x, variance_coverage=0.9).n_components == 1
    assert fit_pca(x, variance_coverage=0.999).n_components == 2
    assert fit_pca(x, variance_coverage=1.0).n_components == 4


@pytest.mark.parametrize("kw", [dict(n_components=0), dict(n_components=7), dict(variance_coverage=1.5)])
def test_invalid(kw):
    with pytest.raises(ValueError):
        fit_pca(np.random.default_rng(0).normal(size=(20, 6)), **kw)


def test_too_few_windows():
    with pytest.raises(ValueError):
        fit_pca(np.zeros((2, 6)), n_components=2)


def test_dict_round_trip():
    m = fit_pca(line_data(), 2)
    back = PcaModel.from_dict(m.to_dict())
    np.testing.assert_array_equal(back.components, m.components)
