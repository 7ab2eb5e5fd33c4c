# app/channel/stationarity.py
"""Collinearity between local scattering functions and stationarity extents."""

import math
from typing import List, Literal, Optional, Sequence

import numpy as np

from app.channel.errors import ChannelValidationError, EmptyGridError, UndefinedStationarityError
from app.channel.schema import CollinearityMatrix, ExtentSeries, IntervalSummary, LsfGrid, TimeInterval
from app.config.settings import settings
from utils.logger import logger


def _collinearity(
    blocks: Sequence[np.ndarray], domain: Literal["time", "frequency"], gamma_threshold: float
) -> CollinearityMatrix:
    """Normalised Gram matrix Σ_b X_b X_b^T over blocks of flattened LSFs.

    Accumulation runs over the blocks in index order.
    """
    gram = None
    for block in blocks:
        flat = block.reshape(block.shape[0], -1)
        product = flat @ flat.T
        gram = product if gram is None else gram + product
    gram = 0.5 * (gram + gram.T)

    energy = np.diag(gram).copy()
    defined = energy > 0
    if not defined.any():
        raise EmptyGridError(f"all {domain} indices have zero LSF energy")

    with np.errstate(invalid="ignore", divide="ignore"):
        values = gram / np.sqrt(np.outer(energy, energy))
    values = np.clip(values, 0.0, 1.0)
    values[~defined, :] = np.nan
    values[:, ~defined] = np.nan
    values[np.flatnonzero(defined), np.flatnonzero(defined)] = 1.0
    values.setflags(write=False)

    if not defined.all():
        logger.info(f"{int((~defined).sum())} {domain} indices undefined (zero energy)")
    return CollinearityMatrix(values=values, domain=domain, gamma_threshold=gamma_threshold)


def collinearity_freq(grid: LsfGrid, gamma_threshold: float = settings.GAMMA_THRESHOLD) -> CollinearityMatrix:
    """γ^(f)[k_f, k_Δf]: Frobenius inner products summed over k_t, normalised."""
    return _collinearity((grid.lsf[k_t] for k_t in range(grid.plan.k_t_count)), "frequency", gamma_threshold)


def collinearity_time(grid: LsfGrid, gamma_threshold: float = settings.GAMMA_THRESHOLD) -> CollinearityMatrix:
    """γ^(t)[k_t, k_Δt]: Frobenius inner products summed over k_f, normalised."""
    return _collinearity((grid.lsf[:, k_f] for k_f in range(grid.plan.k_f_count)), "time", gamma_threshold)


def stationarity_extent(matrix: CollinearityMatrix, region_len: int, hop: int, sample_step: float) -> ExtentSeries:
    """Extent of the maximal contiguous run around each index with γ > γ_th.

    Undefined indices break runs. Runs touching the first or last index are
    flagged as censored by the record edge.
    """
    size = matrix.size
    defined = matrix.defined
    series = ExtentSeries(extent=[], run_length=[], run_start=[], run_stop=[], censored=[])

    for k in range(size):
        if not defined[k]:
            series.extent.append(None)
            series.run_length.append(0)
            series.run_start.append(None)
            series.run_stop.append(None)
            series.censored.append(False)
            continue

        above = defined & (np.nan_to_num(matrix.values[k], nan=-1.0) > matrix.gamma_threshold)
        above[k] = True
        start = k
        while start > 0 and above[start - 1]:
            start -= 1
        stop = k
        while stop < size - 1 and above[stop + 1]:
            stop += 1

        run = stop - start + 1
        series.extent.append((region_len + (run - 1) * hop) * sample_step)
        series.run_length.append(run)
        series.run_start.append(start)
        series.run_stop.append(stop)
        series.censored.append(start == 0 or stop == size - 1)

    return series


def update_m(f_stat: Sequence[Optional[float]], f_s: float, q: Optional[int] = None) -> int:
    """M' = floor(min f_stat / f_s), clamped to the analysed width ``q``."""
    if not f_stat:
        raise ChannelValidationError("f_stat is empty")
    if any(v is None or math.isnan(v) for v in f_stat):
        raise UndefinedStationarityError(
            "f_stat has undefined entries; choose M explicitly (m_override / --m-update)"
        )
    m_new = int(math.floor(min(f_stat) / f_s + 1e-9))
    if q is not None:
        m_new = min(m_new, q)
    return max(m_new, 1)


def interval_summaries(
    t_stat: Sequence[Optional[float]],
    censored: Sequence[bool],
    start_times: Sequence[float],
    intervals: Sequence[TimeInterval],
) -> List[IntervalSummary]:
    """Mean/min stationarity time of the regions starting inside each interval."""
    summaries = []
    for interval in intervals:
        picked = [
            (value, flag)
            for value, flag, start in zip(t_stat, censored, start_times)
            if interval.start <= start < interval.stop and value is not None
        ]
        values = [value for value, _ in picked]
        summaries.append(
            IntervalSummary(
                name=interval.name,
                start=interval.start,
                stop=interval.stop,
                count=len(values),
                censored_count=sum(1 for _, flag in picked if flag),
                mean_t_stat=float(np.mean(values)) if values else None,
                min_t_stat=float(np.min(values)) if values else None,
            )
        )
    return summaries
