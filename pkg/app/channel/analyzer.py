# app/channel/analyzer.py
from typing import Callable, Optional

import numpy as np

from app.channel.lsf import (
    coherence_bounds,
    doppler_mask,
    estimate_noise_floor,
    lsf_estimate,
    noise_threshold,
    plan_regions,
    region_start_freqs,
    region_start_times,
    restrict_bandwidth,
    rms_spreads,
)
from app.channel.schema import (
    AnalysisConfig,
    ChannelRecord,
    CoherenceSummary,
    CollinearityMatrix,
    ExtentSeries,
    LsfGrid,
    StationarityReport,
)
from app.channel.stationarity import (
    collinearity_freq,
    collinearity_time,
    interval_summaries,
    stationarity_extent,
    update_m,
)
from app.channel.taper import default_tapers
from utils.logger import logger

GridHook = Callable[[str, LsfGrid], None]
MatrixHook = Callable[[CollinearityMatrix], None]
MUpdateHook = Callable[[int, int], None]


def _defined(values):
    return [v for v in values if v is not None]


class StationarityAnalyzer:
    """Two-pass stationarity analysis of one channel record.

    Pass one estimates LSFs on the seed region and derives the stationarity
    bandwidth; M is then updated once and pass two derives the stationarity
    time. Optional hooks receive intermediate grids and matrices.
    """

    def __init__(
        self,
        config: Optional[AnalysisConfig] = None,
        on_grid: Optional[GridHook] = None,
        on_collinearity: Optional[MatrixHook] = None,
        on_m_update: Optional[MUpdateHook] = None,
    ):
        self.config = config or AnalysisConfig()

        # Store hooks
        self.on_grid = on_grid
        self.on_collinearity = on_collinearity
        self.on_m_update = on_m_update

    # Pre-processing
    def prepare(self, record: ChannelRecord) -> ChannelRecord:
        if self.config.mask_doppler is not None:
            record = doppler_mask(record, self.config.mask_block_len, self.config.mask_doppler)
        if self.config.bandwidth_mhz is not None:
            record = restrict_bandwidth(record, self.config.bandwidth_mhz * 1e6)
        return record

    def known_noise_floor(self, record: ChannelRecord) -> Optional[float]:
        if self.config.noise_floor_db is not None:
            return self.config.noise_floor_db
        return record.noise_floor_db

    def noise_floor(self, record: ChannelRecord, grid: LsfGrid) -> Optional[float]:
        known = self.known_noise_floor(record)
        if known is not None:
            return known
        if self.config.estimate_noise_floor and grid.plan.m >= 4:
            return estimate_noise_floor(grid, self.config.noise_guard_fraction)
        return None

    def estimate_grid(self, record: ChannelRecord, m: int, floor_db: Optional[float] = None) -> LsfGrid:
        cfg = self.config
        plan = plan_regions((record.s, record.q), cfg.n, m, cfg.delta_t, cfg.delta_f)
        tapers = default_tapers(cfg.n, m, cfg.taper_a_t, cfg.taper_a_f, cfg.tapers_t, cfg.tapers_f)
        logger.info(
            f"LSF plan N={plan.n} M={plan.m} Δt={plan.delta_t} Δf={plan.delta_f}: "
            f"K_t={plan.k_t_count} K_f={plan.k_f_count}"
        )
        return lsf_estimate(record, plan, tapers, workers=cfg.workers, floor_db=floor_db, margin_db=cfg.noise_margin_db)

    def coherence(self, grid: LsfGrid) -> CoherenceSummary:
        tau_rms, nu_rms = rms_spreads(grid)
        if np.all(np.isnan(tau_rms)):
            return CoherenceSummary()
        max_tau, max_nu = float(np.nanmax(tau_rms)), float(np.nanmax(nu_rms))
        t_c_min, f_c_min = coherence_bounds(max_tau, max_nu)

        if grid.plan.n * grid.t_s > t_c_min:
            logger.warning(
                f"Seed region {grid.plan.n * grid.t_s * 1e3:.2f} ms exceeds min coherence time {t_c_min * 1e3:.2f} ms"
            )
        if grid.plan.m * grid.f_s > f_c_min:
            logger.warning(
                f"Seed region {grid.plan.m * grid.f_s / 1e6:.1f} MHz exceeds min coherence bandwidth {f_c_min / 1e6:.1f} MHz"
            )
        return CoherenceSummary(max_tau_rms=max_tau, max_nu_rms=max_nu, t_c_min=t_c_min, f_c_min=f_c_min)

    def _updated_m(self, f_series: ExtentSeries, f_s: float, q: int) -> int:
        if self.config.m_override is not None:
            return min(self.config.m_override, q)
        # stationary over every analysed frequency index: use the whole band
        if all(run == len(f_series.run_length) for run in f_series.run_length):
            return q
        return update_m(f_series.extent, f_s, q)

    def analyze(self, record: ChannelRecord) -> StationarityReport:
        cfg = self.config
        record = self.prepare(record)

        # Pass one: seed region, stationarity bandwidth
        # a known floor is thresholded during estimation, an estimated one afterwards
        floor_db = self.known_noise_floor(record)
        seed_grid = self.estimate_grid(record, cfg.m, floor_db)
        if floor_db is None:
            floor_db = self.noise_floor(record, seed_grid)
            if floor_db is not None:
                seed_grid = noise_threshold(seed_grid, floor_db, cfg.noise_margin_db)
        if floor_db is not None:
            logger.info(f"Noise floor {floor_db:.2f} dB, threshold margin {cfg.noise_margin_db:g} dB")
        if callable(self.on_grid):
            self.on_grid("seed", seed_grid)

        coherence = self.coherence(seed_grid)
        gamma_f = collinearity_freq(seed_grid, cfg.gamma_threshold)
        if callable(self.on_collinearity):
            self.on_collinearity(gamma_f)
        f_series = stationarity_extent(gamma_f, cfg.m, cfg.delta_f, record.f_s)

        # M update, run once
        m_new = self._updated_m(f_series, record.f_s, record.q)
        logger.info(f"M updated {cfg.m} -> {m_new}")
        if callable(self.on_m_update):
            self.on_m_update(cfg.m, m_new)

        # Pass two: updated region, stationarity time
        grid = seed_grid if m_new == cfg.m else self.estimate_grid(record, m_new, floor_db)
        if callable(self.on_grid):
            self.on_grid("updated", grid)

        gamma_t = collinearity_time(grid, cfg.gamma_threshold)
        if callable(self.on_collinearity):
            self.on_collinearity(gamma_t)
        t_series = stationarity_extent(gamma_t, cfg.n, cfg.delta_t, record.t_s)

        start_times = region_start_times(grid.plan, record.t_s).tolist()
        f_values, t_values = _defined(f_series.extent), _defined(t_series.extent)
        report = StationarityReport(
            label=record.label,
            f_stat=f_series.extent,
            f_run_length=f_series.run_length,
            f_run_start=f_series.run_start,
            f_run_stop=f_series.run_stop,
            f_censored=f_series.censored,
            region_start_freqs=region_start_freqs(seed_grid.plan, record.f_s).tolist(),
            t_stat=t_series.extent,
            t_run_length=t_series.run_length,
            t_run_start=t_series.run_start,
            t_run_stop=t_series.run_stop,
            t_censored=t_series.censored,
            region_start_times=start_times,
            mean_t_stat=float(np.mean(t_values)) if t_values else None,
            min_f_stat=float(np.min(f_values)) if f_values else None,
            intervals=interval_summaries(t_series.extent, t_series.censored, start_times, cfg.intervals),
            undefined_indices={"time": gamma_t.undefined_indices, "frequency": gamma_f.undefined_indices},
            n=cfg.n,
            m_seed=cfg.m,
            m_updated=m_new,
            k_t_count=grid.plan.k_t_count,
            k_f_count_seed=seed_grid.plan.k_f_count,
            k_f_count=grid.plan.k_f_count,
            analyzed_bandwidth=record.bandwidth,
            noise_floor_db=floor_db,
            coherence=coherence,
            config=cfg.model_dump(mode="json"),
        )
        logger.info(
            f"Stationarity: min f_stat {report.min_f_stat}, mean t_stat {report.mean_t_stat} "
            f"over {grid.plan.k_t_count} time indices"
        )
        return report


def analyze(record: ChannelRecord, config: Optional[AnalysisConfig] = None) -> StationarityReport:
    return StationarityAnalyzer(config).analyze(record)
