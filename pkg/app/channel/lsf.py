# app/channel/lsf.py
"""Local region segmentation, multitaper LSF estimation and derived profiles."""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft, stats

from app.channel.errors import AliasingError, ChannelValidationError, DimensionMismatchError
from app.channel.schema import ChannelRecord, DopplerInterval, LsfGrid, RegionPlan, TaperGrid
from app.config.settings import settings
from utils.logger import logger

ArrayOrFloat = Union[np.ndarray, float]


# ======================
# REGIONS AND AXES
# ======================
def plan_regions(record_dims: Tuple[int, int], n: int, m: int, delta_t: int, delta_f: int) -> RegionPlan:
    s_count, q_count = record_dims
    if n < 1 or m < 1 or delta_t < 1 or delta_f < 1:
        raise ChannelValidationError(f"region sizes and hops must be >= 1 (n={n}, m={m}, Δt={delta_t}, Δf={delta_f})")
    if n > s_count or m > q_count:
        raise DimensionMismatchError(f"region {n}x{m} larger than record {s_count}x{q_count}")
    return RegionPlan(
        n=n,
        m=m,
        delta_t=delta_t,
        delta_f=delta_f,
        k_t_count=(s_count - n) // delta_t + 1,
        k_f_count=(q_count - m) // delta_f + 1,
    )


def doppler_axis(n: int, t_s: float) -> np.ndarray:
    """Centred Doppler axis: bin p -> (p - floor(n/2)) / (n t_s)."""
    return (np.arange(n) - n // 2) / (n * t_s)


def delay_axis(m: int, f_s: float) -> np.ndarray:
    return np.arange(m) / (m * f_s)


def region_start_times(plan: RegionPlan, t_s: float) -> np.ndarray:
    return np.arange(plan.k_t_count) * plan.delta_t * t_s


def region_start_freqs(plan: RegionPlan, f_s: float) -> np.ndarray:
    return np.arange(plan.k_f_count) * plan.delta_f * f_s


def restrict_bandwidth(record: ChannelRecord, bandwidth_hz: float) -> ChannelRecord:
    """Keep the first floor(B / f_s) frequency columns."""
    columns = min(record.q, int(math.floor(bandwidth_hz / record.f_s + 1e-9)))
    if columns < 1:
        raise ChannelValidationError(f"bandwidth {bandwidth_hz:g} Hz is below one frequency bin")
    if columns == record.q:
        return record
    logger.info(f"Restricting analysis to {columns} of {record.q} frequency bins ({columns * record.f_s / 1e6:.1f} MHz)")
    return ChannelRecord(
        data=record.data[:, :columns],
        t_s=record.t_s,
        f_s=record.f_s,
        f_carrier=record.f_carrier,
        noise_floor_db=record.noise_floor_db,
        label=record.label,
    )


# ======================
# LSF ESTIMATION
# ======================
def _row_lsf(regions: np.ndarray, windows: np.ndarray) -> np.ndarray:
    """Multitaper LSF of one time row of regions, shape (K_f, N, M)."""
    tapered = regions[:, None, :, :] * windows[None, :, :, :]
    # DFT over time (Doppler), inverse DFT over frequency (delay), both unitary
    spectra = fft.ifft(fft.fft(tapered, axis=2, norm="ortho"), axis=3, norm="ortho")
    power = (spectra.real**2 + spectra.imag**2).mean(axis=1)
    return fft.fftshift(power, axes=1)


def lsf_estimate(
    record: ChannelRecord,
    plan: RegionPlan,
    tapers: TaperGrid,
    workers: int = 1,
    floor_db: Optional[float] = None,
    margin_db: float = settings.NOISE_MARGIN_DB,
) -> LsfGrid:
    """Ĉ = (1/IJ) Σ_w |F_N (Ĥ ⊙ G_w) F_M^H|² for every region of ``plan``.

    Rows of regions are evaluated independently (optionally in a thread
    pool) through the same code path, so the grid does not depend on
    ``workers``. A known ``floor_db`` is applied as in :func:`noise_threshold`,
    in place on the freshly stacked grid.
    """
    if (tapers.n, tapers.m) != (plan.n, plan.m):
        raise DimensionMismatchError(f"taper size {tapers.n}x{tapers.m} does not match region {plan.n}x{plan.m}")
    if plan.covered_time_samples > record.s or plan.covered_freq_samples > record.q:
        raise DimensionMismatchError(f"plan covers {plan.covered_time_samples}x{plan.covered_freq_samples}, record is {record.s}x{record.q}")

    regions = sliding_window_view(record.data, (plan.n, plan.m))[:: plan.delta_t, :: plan.delta_f]
    regions = regions[: plan.k_t_count, : plan.k_f_count]
    windows = tapers.windows

    logger.debug(f"LSF grid {plan.k_t_count}x{plan.k_f_count} of {plan.n}x{plan.m}, {windows.shape[0]} tapers, workers={workers}")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda k: _row_lsf(regions[k], windows), range(plan.k_t_count)))
    else:
        rows = [_row_lsf(regions[k], windows) for k in range(plan.k_t_count)]

    lsf = np.stack(rows)
    if floor_db is not None:
        _zero_below_floor(lsf, plan, floor_db, margin_db)
    lsf.setflags(write=False)
    return LsfGrid(
        lsf=lsf,
        doppler_axis=doppler_axis(plan.n, record.t_s),
        delay_axis=delay_axis(plan.m, record.f_s),
        plan=plan,
        t_s=record.t_s,
        f_s=record.f_s,
        taper_count=windows.shape[0],
    )


def with_lsf(grid: LsfGrid, lsf: np.ndarray) -> LsfGrid:
    lsf.setflags(write=False)
    return grid.model_copy(update={"lsf": lsf})


# ======================
# PROFILES AND SPREADS
# ======================
def doppler_power_profile(grid: LsfGrid, k_f_indices: Optional[Sequence[int]] = None) -> np.ndarray:
    """(1/M) Ĉ 1_M per region, averaged over the selected k_f: shape (K_t, N)."""
    selected = grid.lsf if k_f_indices is None else grid.lsf[:, list(k_f_indices)]
    return selected.mean(axis=3).mean(axis=1)


def delay_power_profile(grid: LsfGrid, k_t_indices: Optional[Sequence[int]] = None) -> np.ndarray:
    """(1/N) 1_N^T Ĉ per region, averaged over the selected k_t: shape (K_f, M)."""
    selected = grid.lsf if k_t_indices is None else grid.lsf[list(k_t_indices)]
    return selected.mean(axis=2).mean(axis=0)


def _central_spread(marginal: np.ndarray, axis: np.ndarray, total: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        p = marginal / total[..., None]
        mean = (p * axis).sum(axis=-1)
        variance = (p * axis**2).sum(axis=-1) - mean**2
    return np.sqrt(np.clip(variance, 0.0, None))


def rms_spreads(grid: LsfGrid) -> Tuple[np.ndarray, np.ndarray]:
    """RMS delay and Doppler spread per region, shape (K_t, K_f) each.

    Zero-energy regions are undefined and reported as NaN.
    """
    total = grid.region_energy
    tau_rms = _central_spread(grid.lsf.sum(axis=2), grid.delay_axis, total)
    nu_rms = _central_spread(grid.lsf.sum(axis=3), grid.doppler_axis, total)
    undefined = ~grid.defined
    tau_rms[undefined] = np.nan
    nu_rms[undefined] = np.nan
    return tau_rms, nu_rms


def coherence_bounds(tau_rms: ArrayOrFloat, nu_rms: ArrayOrFloat) -> Tuple[ArrayOrFloat, ArrayOrFloat]:
    """T_c = 1/ν_rms and f_c = 1/τ_rms; a zero spread gives +inf."""
    with np.errstate(divide="ignore"):
        t_c = 1.0 / np.asarray(nu_rms, dtype=float)
        f_c = 1.0 / np.asarray(tau_rms, dtype=float)
    if t_c.ndim == 0 and f_c.ndim == 0:
        return float(t_c), float(f_c)
    return t_c, f_c


# ======================
# NOISE
# ======================
def bin_noise_db(floor_db: float, plan: RegionPlan) -> float:
    """Expected LSF bin power of white noise with per-sample power ``floor_db``."""
    return floor_db - 10.0 * math.log10(plan.n * plan.m)


def noise_threshold(grid: LsfGrid, floor_db: float, margin_db: float = settings.NOISE_MARGIN_DB) -> LsfGrid:
    """Zero every LSF bin below floor + margin.

    ``floor_db`` is the per-sample noise power of the record (the unit of
    ``ChannelRecord.noise_floor_db``); it is scaled to the per-bin level of
    the unitary, unit-energy-taper estimator before comparison.
    """
    if margin_db != math.inf and (margin_db == -math.inf or floor_db == -math.inf):
        return grid
    lsf = grid.lsf.copy()
    _zero_below_floor(lsf, grid.plan, floor_db, margin_db)
    return with_lsf(grid, lsf)


def _zero_below_floor(lsf: np.ndarray, plan: RegionPlan, floor_db: float, margin_db: float):
    if margin_db == math.inf:
        lsf[...] = 0.0
        return
    if margin_db == -math.inf or floor_db == -math.inf:
        return

    threshold = 10.0 ** ((bin_noise_db(floor_db, plan) + margin_db) / 10.0)
    below = lsf < threshold
    np.putmask(lsf, below, 0.0)
    logger.debug(f"Noise threshold {10 * math.log10(threshold):.2f} dB/bin zeroed {int(below.sum())} of {lsf.size} bins")


def estimate_noise_floor(grid: LsfGrid, guard_fraction: float = settings.NOISE_GUARD_FRACTION) -> float:
    """Per-sample noise power (dB) from the largest-delay guard bins of every region.

    The median bin power is corrected for the Gamma(IJ) distribution of a
    uniformly weighted multitaper estimate of white noise.
    """
    m = grid.plan.m
    if m < 4:
        raise ChannelValidationError(f"noise floor estimation needs M >= 4 delay bins, got {m}")
    guard = max(1, int(math.ceil(guard_fraction * m)))
    median = float(np.median(grid.lsf[..., m - guard :]))
    if median <= 0:
        return -math.inf

    median_to_mean = stats.gamma(grid.taper_count).median() / grid.taper_count
    bin_power = median / median_to_mean
    floor_db = 10.0 * math.log10(bin_power * grid.plan.n * grid.plan.m)
    logger.debug(f"Estimated noise floor {floor_db:.2f} dB from {guard} guard delay bins")
    return floor_db


# ======================
# DOPPLER MASK
# ======================
def doppler_mask(
    record: ChannelRecord, n: int = settings.MASK_BLOCK_LEN, interval: DopplerInterval = DopplerInterval()
) -> ChannelRecord:
    """Keep only Doppler components inside ``interval`` (per frequency column).

    The time axis is cut into blocks of ``n`` samples (hop ``n``, last block
    zero-padded); each block is transformed, bins outside the interval are
    zeroed and the block is transformed back.
    """
    limit = 1.0 / (2.0 * record.t_s)
    for bound in (interval.lo, interval.hi):
        if math.isfinite(bound) and abs(bound) >= limit:
            raise AliasingError(f"doppler alias: mask bound {bound:g} Hz outside ±{limit:g} Hz")
    if n < 2:
        raise ChannelValidationError(f"mask block length must be >= 2, got {n}")

    blocks = -(-record.s // n)
    if record.s % n:
        logger.warning(f"Doppler mask: final block zero-padded ({record.s % n} of {n} samples)")
    padded = np.zeros((blocks * n, record.q), dtype=np.complex128)
    padded[: record.s] = record.data

    spectrum = fft.fft(padded.reshape(blocks, n, record.q), axis=1)
    keep = interval.contains(fft.fftfreq(n, record.t_s))
    spectrum[:, ~keep, :] = 0.0
    masked = fft.ifft(spectrum, axis=1).reshape(blocks * n, record.q)[: record.s]

    logger.info(f"Doppler mask {interval}: kept {int(keep.sum())} of {n} bins per block")
    return ChannelRecord(
        data=masked,
        t_s=record.t_s,
        f_s=record.f_s,
        f_carrier=record.f_carrier,
        noise_floor_db=record.noise_floor_db,
        label=f"{record.label} | doppler-mask{interval} block={n}",
    )
