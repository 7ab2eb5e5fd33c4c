# app/channel/taper.py
"""Discrete prolate spheroidal sequences and separable time-frequency tapers."""

import math

import numpy as np
from scipy import linalg

from app.channel.errors import ChannelValidationError
from app.channel.schema import DpssSet, TaperGrid
from utils.logger import logger

SIGN_TOLERANCE = 1e-8


def _canonical_sign(tapers: np.ndarray) -> np.ndarray:
    # eigenvector sign is arbitrary: first element with |x| > tol is made positive
    for row in tapers:
        lead = np.flatnonzero(np.abs(row) > SIGN_TOLERANCE)
        if lead.size and row[lead[0]] < 0:
            row *= -1
    return tapers


def concentration(tapers: np.ndarray, w: float) -> np.ndarray:
    """Fraction of each taper's energy inside |f| <= w (cycles/sample).

    Evaluates u^T A u for the concentration matrix
    A[i, j] = sin(2πw(i-j)) / (π(i-j)) through the taper autocorrelation.
    """
    n = tapers.shape[-1]
    lags = np.arange(-(n - 1), n)
    kernel = 2 * w * np.sinc(2 * w * lags)
    return np.array([np.correlate(u, u, mode="full") @ kernel for u in tapers])


def dpss(n: int, a: float, k: int) -> DpssSet:
    """The ``k`` most concentrated Slepian sequences of length ``n``.

    ``a`` is the time-half-bandwidth product, W = a / n. The sequences are
    eigenvectors of the symmetric tridiagonal matrix with diagonal
    ((n-1-2i)/2)^2 cos(2πW) and off-diagonal i(n-i)/2.
    """
    if n < 2:
        raise ChannelValidationError(f"dpss length must be >= 2, got {n}")
    if not 0 < a < n / 2:
        raise ChannelValidationError(f"half-bandwidth product must satisfy 0 < a < n/2, got a={a}, n={n}")
    if not 1 <= k <= n:
        raise ChannelValidationError(f"taper count must satisfy 1 <= k <= n, got k={k}")
    if k > math.floor(2 * a):
        logger.warning(f"{k} tapers requested for a={a}: only about 2a={2 * a:g} are well concentrated")

    w = a / n
    idx = np.arange(n, dtype=float)
    diagonal = ((n - 1 - 2 * idx) / 2.0) ** 2 * np.cos(2 * np.pi * w)
    off_diagonal = idx[1:] * (n - idx[1:]) / 2.0

    try:
        _, vectors = linalg.eigh_tridiagonal(
            diagonal, off_diagonal, select="i", select_range=(n - k, n - 1)
        )
    except linalg.LinAlgError as e:
        raise ChannelValidationError(f"DPSS eigensolver did not converge for n={n}, a={a}: {e}") from e

    # largest eigenvalue first
    tapers = np.ascontiguousarray(vectors[:, ::-1].T)
    tapers /= np.linalg.norm(tapers, axis=1, keepdims=True)
    tapers = _canonical_sign(tapers)
    concentrations = concentration(tapers, w)

    tapers.setflags(write=False)
    concentrations.setflags(write=False)
    return DpssSet(length=n, half_bandwidth_product=a, tapers=tapers, concentrations=concentrations)


def taper_grid(time_set: DpssSet, freq_set: DpssSet) -> TaperGrid:
    """Outer products of every time taper with every frequency taper."""
    windows = np.einsum("in,jm->ijnm", time_set.tapers, freq_set.tapers).reshape(
        time_set.count * freq_set.count, time_set.length, freq_set.length
    )
    windows.setflags(write=False)
    return TaperGrid(windows=windows, time_count=time_set.count, freq_count=freq_set.count)


def default_tapers(n: int, m: int, a_t: float, a_f: float, count_t: int, count_f: int) -> TaperGrid:
    return taper_grid(dpss(n, a_t, count_t), dpss(m, a_f, count_f))
