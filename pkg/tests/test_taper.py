# tests/test_taper.py
import math

import numpy as np
import pytest
from scipy import linalg
from scipy.signal import windows

from app.channel.errors import ChannelValidationError
from app.channel.taper import default_tapers, dpss, taper_grid


def dense_dpss(n, a, k):
    """Top-k eigenvectors of the dense concentration matrix, same sign rule."""
    w = a / n
    lag = np.subtract.outer(np.arange(n), np.arange(n)).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        matrix = np.sin(2 * np.pi * w * lag) / (np.pi * lag)
    np.fill_diagonal(matrix, 2 * w)
    _, vectors = linalg.eigh(matrix)
    tapers = vectors[:, ::-1][:, :k].T.copy()
    for row in tapers:
        lead = np.flatnonzero(np.abs(row) > 1e-8)[0]
        if row[lead] < 0:
            row *= -1
    return tapers


@pytest.mark.parametrize("n", [16, 30, 64])
@pytest.mark.parametrize("a", [2.0, 2.5])
def test_dpss_matches_dense_oracle(n, a):
    k = int(math.floor(2 * a))
    result = dpss(n, a, k)

    assert result.tapers.shape == (k, n)
    np.testing.assert_allclose(result.tapers, dense_dpss(n, a, k), atol=1e-8, rtol=0)


@pytest.mark.parametrize("n", [16, 30, 64])
@pytest.mark.parametrize("a", [2.0, 2.5])
def test_dpss_orthonormal_and_concentrations_descending(n, a):
    result = dpss(n, a, int(math.floor(2 * a)))

    np.testing.assert_allclose(result.tapers @ result.tapers.T, np.eye(result.count), atol=1e-10)
    assert np.all(np.diff(result.concentrations) < 0)
    assert np.all((result.concentrations > 0) & (result.concentrations <= 1 + 1e-12))


def test_dpss_agrees_with_scipy_up_to_sign():
    result = dpss(30, 2.0, 3)
    reference = windows.dpss(30, 2.0, Kmax=3, norm=2)
    np.testing.assert_allclose(np.abs(result.tapers), np.abs(reference), atol=1e-8)


def test_dpss_is_read_only():
    result = dpss(16, 2.0, 2)
    with pytest.raises(ValueError):
        result.tapers[0, 0] = 1.0


@pytest.mark.parametrize("n, a, k", [(1, 0.4, 1), (16, 8.0, 2), (16, 0.0, 2), (16, 2.0, 0), (16, 2.0, 17)])
def test_dpss_rejects_invalid_parameters(n, a, k):
    with pytest.raises(ChannelValidationError):
        dpss(n, a, k)


def test_taper_grid_is_separable():
    time_set, freq_set = dpss(12, 2.0, 2), dpss(10, 2.5, 3)
    grid = taper_grid(time_set, freq_set)

    assert grid.windows.shape == (6, 12, 10)
    assert (grid.n, grid.m) == (12, 10)
    for i in range(2):
        for j in range(3):
            np.testing.assert_allclose(grid.windows[i * 3 + j], np.outer(time_set.tapers[i], freq_set.tapers[j]))
    np.testing.assert_allclose((grid.windows**2).sum(axis=(1, 2)), 1.0, atol=1e-12)


def test_default_tapers_use_both_dimensions():
    grid = default_tapers(30, 30, 2.0, 2.5, 2, 2)
    assert grid.windows.shape == (4, 30, 30)
    assert (grid.time_count, grid.freq_count) == (2, 2)
